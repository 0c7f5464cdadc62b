#include "hvsim/netsim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace hvsim {

const char* to_string(Technology t) {
  return t == Technology::Cellular ? "cellular" : "sidelink";
}

RadioConfig RadioConfig::cellular() { return {}; }

RadioConfig RadioConfig::sidelink() {
  RadioConfig r;
  r.technology = Technology::Sidelink;
  r.carrier_frequency = 5.9e9;
  return r;
}

void RadioConfig::validate() const {
  if (!(carrier_frequency > 0)) throw std::invalid_argument("carrier_frequency must be > 0");
  if (!(bandwidth >= 200e3)) throw std::invalid_argument("bandwidth must be >= 200 kHz");
  if (!std::isfinite(tx_power_ue_dbm) || !std::isfinite(tx_power_enb_dbm))
    throw std::invalid_argument("tx power must be finite");
  if (!(noise_figure_db >= 0)) throw std::invalid_argument("noise_figure must be >= 0");
}

// ---------------------------------------------------------------------------

double FlowStats::pdr() const {
  return sent == 0 ? 0.0 : static_cast<double>(delivered) / static_cast<double>(sent);
}

double FlowStats::mean_latency() const {
  if (latency_s.empty()) return std::nan("");
  return std::accumulate(latency_s.begin(), latency_s.end(), 0.0) /
         static_cast<double>(latency_s.size());
}

double FlowStats::throughput_bps(double duration_s) const {
  return duration_s > 0 ? delivered_bytes * 8.0 / duration_s : 0.0;
}

std::uint32_t TrafficLog::add_flow(Technology technology, std::uint32_t src, std::uint32_t dst) {
  flows_.push_back({technology, src, dst, {}});
  return static_cast<std::uint32_t>(flows_.size() - 1);
}

void TrafficLog::on_sent(std::uint32_t flow) { ++flows_.at(flow).stats.sent; }

void TrafficLog::on_delivered(const Packet& p, SimTime at, const LatencyBreakdown& latency) {
  auto& s = flows_.at(p.flow).stats;
  ++s.delivered;
  s.delivered_bytes += p.size_bytes;
  s.latency_s.push_back((at - p.created).seconds());
  record(p, at, true, latency);
}

void TrafficLog::on_lost(const Packet& p, SimTime at) {
  ++flows_.at(p.flow).stats.lost;
  record(p, at, false, {});
}

void TrafficLog::record(const Packet& p, SimTime at, bool delivered,
                        const LatencyBreakdown& latency) {
  if (!keep_records_) return;
  records_.push_back({p.id, p.flow, p.created, at, delivered, p.size_bytes,
                      flows_[p.flow].technology, p.src, p.dst, latency});
}

void TrafficLog::write_csv(std::ostream& out, int run, bool header) const {
  if (header) out << "run,t_created,t_finished,delivered,size,technology,src,dst\n";
  char buf[160];
  for (const auto& r : records_) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%d,%u,%s,%u,%u\n", run, r.created.seconds(),
                  r.finished.seconds(), r.delivered ? 1 : 0, r.size_bytes,
                  to_string(r.technology), r.src, r.dst);
    out << buf;
  }
}

// ---------------------------------------------------------------------------

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

double thermal_noise_dbm(double bandwidth_hz, double noise_figure_db) {
  return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

double sinr_db(double signal_dbm, std::span<const double> interferers_dbm, double noise_dbm) {
  double denom = dbm_to_mw(noise_dbm);
  for (double i : interferers_dbm) denom += dbm_to_mw(i);
  return signal_dbm - mw_to_dbm(denom);
}

namespace {

struct CqiEntry {
  double sinr_db;
  double efficiency;
};

constexpr std::array<CqiEntry, 15> kCqi{{{-6.7, 0.15},
                                         {-4.7, 0.23},
                                         {-2.3, 0.38},
                                         {0.2, 0.60},
                                         {2.4, 0.88},
                                         {4.3, 1.18},
                                         {5.9, 1.48},
                                         {8.1, 1.91},
                                         {10.3, 2.41},
                                         {11.7, 2.73},
                                         {14.1, 3.32},
                                         {16.3, 3.90},
                                         {18.7, 4.52},
                                         {21.0, 5.12},
                                         {22.7, 5.50}}};

std::int64_t ceil_ms(SimTime t) {
  constexpr std::int64_t ms = 1'000'000;
  const std::int64_t ns = t.ns();
  return ns >= 0 ? (ns + ms - 1) / ms : ns / ms;
}

}  // namespace

double spectral_efficiency(double sinr) {
  double eff = 0.0;
  for (const auto& e : kCqi) {
    if (sinr < e.sinr_db) break;
    eff = e.efficiency;
  }
  return eff;
}

double min_decodable_sinr_db() { return kCqi.front().sinr_db; }

int resource_blocks_for(double bandwidth_hz) {
  return std::max(1, static_cast<int>(std::floor(bandwidth_hz / 200e3 + 1e-9)));
}

std::vector<int> round_robin_grant(std::span<const SchedulerRequest> requests, int rbs,
                                   std::size_t& cursor) {
  const std::size_t n = requests.size();
  std::vector<int> grants(n, 0);
  if (n == 0) return grants;
  std::vector<double> left(n);
  std::size_t active = 0;
  for (std::size_t i = 0; i < n; ++i) {
    left[i] = requests[i].bits_per_rb > 0 ? requests[i].demand_bits : 0.0;
    if (left[i] > 0) ++active;
  }
  std::size_t i = cursor % n;
  while (rbs > 0 && active > 0) {
    if (left[i] > 0) {
      ++grants[i];
      --rbs;
      left[i] -= requests[i].bits_per_rb;
      if (left[i] <= 0) --active;
      cursor = (i + 1) % n;
    }
    i = (i + 1) % n;
  }
  return grants;
}

void TrafficSpec::validate() const {
  if (size_bytes == 0) throw std::invalid_argument("packet size must be > 0");
  if (!(interval_s > 0)) throw std::invalid_argument("packet interval must be > 0");
}

EventHandle start_traffic(Simulator& sim, const TrafficSpec& spec, SimTime phase,
                          std::function<void()> emit) {
  spec.validate();
  return sim.schedule_periodic(phase, SimTime::from_seconds(spec.interval_s), std::move(emit),
                               EventCategory::Network);
}

// ---------------------------------------------------------------------------
// Cellular

void CellularParams::validate() const {
  radio.validate();
  path_loss.validate();
  if (grant_delay_s < 0 || ue_processing_s < 0)
    throw std::invalid_argument("delays must be >= 0");
  if (!(attach_interval_s > 0) || !(channel_update_s > 0))
    throw std::invalid_argument("timer intervals must be > 0");
  if (hysteresis_db < 0) throw std::invalid_argument("hysteresis must be >= 0");
  if (buffer_bytes == 0) throw std::invalid_argument("buffer must be > 0");
}

namespace {

PathLossParams retune(PathLossParams pl, double frequency) {
  pl.baseline = LogDistanceParams::friis(frequency, pl.baseline.exponent,
                                         pl.baseline.reference_distance_m);
  return pl;
}

}  // namespace

CellularNetwork::CellularNetwork(Simulator& sim, const World& world, CellularParams params,
                                 TrafficLog& log)
    : sim_(&sim), world_(&world), params_(std::move(params)), log_(&log) {
  params_.validate();
  params_.path_loss = retune(params_.path_loss, params_.radio.carrier_frequency);
  rbs_ = resource_blocks_for(params_.radio.bandwidth);
  noise_dbm_ = thermal_noise_dbm(params_.radio.bandwidth, params_.radio.noise_figure_db);
}

std::uint32_t CellularNetwork::add_cell(const Vehicle& station, std::uint32_t carrier) {
  cells_.push_back({&station, carrier, {}, 0, 0});
  for (auto& u : ues_) u.loss_db.push_back(std::numeric_limits<double>::infinity());
  return static_cast<std::uint32_t>(cells_.size() - 1);
}

std::uint32_t CellularNetwork::add_ue(const Vehicle& ue) {
  Ue u;
  u.vehicle = &ue;
  u.loss_db.assign(cells_.size(), std::numeric_limits<double>::infinity());
  ues_.push_back(std::move(u));
  return static_cast<std::uint32_t>(ues_.size() - 1);
}

void CellularNetwork::start() {
  if (cells_.empty()) throw std::logic_error("cellular network needs at least one cell");
  refresh_channels();
  evaluate_attachment();
  sim_->schedule_periodic(SimTime::from_seconds(params_.channel_update_s),
                          SimTime::from_seconds(params_.channel_update_s),
                          [this] { refresh_channels(); }, EventCategory::Network);
  sim_->schedule_periodic(SimTime::from_seconds(params_.attach_interval_s),
                          SimTime::from_seconds(params_.attach_interval_s),
                          [this] { evaluate_attachment(); }, EventCategory::Network);
}

double CellularNetwork::rb_bits(double sinr) const {
  return spectral_efficiency(sinr) * kResourceBlockHz * kTti;
}

void CellularNetwork::refresh_channels() {
  for (auto& u : ues_) {
    const Vec3 p = u.vehicle->position();
    for (std::size_t c = 0; c < cells_.size(); ++c)
      u.loss_db[c] = path_loss_db(cells_[c].station->position(), p, params_.path_loss, *world_);
  }
  for (std::uint32_t i = 0; i < ues_.size(); ++i) set_serving(i, ues_[i].serving);
}

double CellularNetwork::rsrp_dbm(std::uint32_t ue, std::uint32_t cell) const {
  return params_.radio.tx_power_enb_dbm - ues_.at(ue).loss_db.at(cell);
}

double CellularNetwork::downlink_sinr_db(std::uint32_t ue) const {
  const auto& u = ues_.at(ue);
  if (!u.serving) return -std::numeric_limits<double>::infinity();
  std::vector<double> interference;
  for (std::uint32_t c = 0; c < cells_.size(); ++c)
    if (c != *u.serving && cells_[c].carrier == cells_[*u.serving].carrier)
      interference.push_back(rsrp_dbm(ue, c));
  return sinr_db(rsrp_dbm(ue, *u.serving), interference, noise_dbm_);
}

std::optional<std::uint32_t> CellularNetwork::serving_cell(std::uint32_t ue) const {
  return ues_.at(ue).serving;
}

const std::vector<std::uint32_t>& CellularNetwork::attached(std::uint32_t cell) const {
  return cells_.at(cell).attached;
}

double CellularNetwork::cell_capacity_bps(std::uint32_t) const {
  return rbs_ * kResourceBlockHz * kCqi.back().efficiency;
}

void CellularNetwork::set_serving(std::uint32_t ue, std::optional<std::uint32_t> cell) {
  Ue& u = ues_[ue];
  if (u.serving != cell) {
    if (u.serving) std::erase(cells_[*u.serving].attached, ue);
    if (cell) {
      auto& list = cells_[*cell].attached;
      list.insert(std::upper_bound(list.begin(), list.end(), ue), ue);
    }
    u.serving = cell;
  }
  if (!u.serving) {
    u.dl_bits_per_rb = u.ul_bits_per_rb = 0.0;
    return;
  }
  u.dl_bits_per_rb = rb_bits(downlink_sinr_db(ue));
  const double ul_signal = params_.radio.tx_power_ue_dbm - u.loss_db[*u.serving];
  u.ul_bits_per_rb = rb_bits(ul_signal - noise_dbm_);
}

void CellularNetwork::drop_buffers(Ue& u) {
  const SimTime now = sim_->now();
  for (auto* q : {&u.dl, &u.ul}) {
    for (const auto& item : *q) {
      log_->on_lost(item.packet, now);
      --backlog_;
    }
    q->clear();
  }
  u.dl_bytes = u.ul_bytes = 0;
}

void CellularNetwork::evaluate_attachment() {
  for (std::uint32_t i = 0; i < ues_.size(); ++i) {
    Ue& u = ues_[i];
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < cells_.size(); ++c)
      if (rsrp_dbm(i, c) > rsrp_dbm(i, best)) best = c;
    const double best_rsrp = rsrp_dbm(i, best);
    if (best_rsrp < params_.min_rsrp_dbm) {
      if (u.serving) {
        drop_buffers(u);
        set_serving(i, std::nullopt);
      }
      continue;
    }
    if (!u.serving) {
      set_serving(i, best);
    } else if (best != *u.serving) {
      const double current = rsrp_dbm(i, *u.serving);
      if (current < params_.min_rsrp_dbm || best_rsrp > current + params_.hysteresis_db) {
        set_serving(i, best);
        ++stats_.handovers;
      }
    }
  }
}

void CellularNetwork::enqueue(std::uint32_t ue, Item item, bool downlink) {
  Ue& u = ues_[ue];
  if (!u.serving) {
    log_->on_lost(item.packet, sim_->now());
    return;
  }
  auto& bytes = downlink ? u.dl_bytes : u.ul_bytes;
  if (bytes + item.packet.size_bytes > params_.buffer_bytes) {
    log_->on_lost(item.packet, sim_->now());
    return;
  }
  bytes += item.packet.size_bytes;
  (downlink ? u.dl : u.ul).push_back(std::move(item));
  ++backlog_;
  ensure_tti();
}

void CellularNetwork::send_downlink(std::uint32_t ue, const Packet& p) {
  log_->on_sent(p.flow);
  Item item{p, p.size_bytes * 8.0, sim_->now(), std::nullopt, {}, std::nullopt};
  enqueue(ue, std::move(item), true);
}

void CellularNetwork::send_uplink(std::uint32_t ue, const Packet& p,
                                  std::optional<std::uint32_t> relay_to) {
  log_->on_sent(p.flow);
  const SimTime processing = SimTime::from_seconds(params_.ue_processing_s);
  const SimTime access = SimTime::from_seconds(params_.grant_delay_s);
  sim_->schedule_in(
      processing + access,
      [this, ue, p, relay_to, processing, access] {
        Item item{p, p.size_bytes * 8.0, sim_->now(), std::nullopt, {}, relay_to};
        item.latency.processing = processing;
        item.latency.access = access;
        enqueue(ue, std::move(item), false);
      },
      EventCategory::Network);
}

void CellularNetwork::ensure_tti() {
  if (tti_pending_ || backlog_ == 0) return;
  tti_pending_ = true;
  sim_->schedule_at(SimTime::from_ms(ceil_ms(sim_->now())), [this] { run_tti(); },
                    EventCategory::Network);
}

bool CellularNetwork::serve(Cell& cell, bool downlink, SimTime tti_start) {
  const auto& ids = cell.attached;
  scratch_.assign(ids.size(), {});
  bool any = false;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Ue& u = ues_[ids[k]];
    const auto& q = downlink ? u.dl : u.ul;
    double demand = 0.0;
    for (const auto& item : q) {
      if (item.ready > tti_start) break;
      demand += item.remaining_bits;
    }
    scratch_[k] = {downlink ? u.dl_bits_per_rb : u.ul_bits_per_rb, demand};
    any = any || demand > 0;
  }
  if (!any) return false;

  auto& cursor = downlink ? cell.dl_cursor : cell.ul_cursor;
  const auto grants = round_robin_grant(scratch_, rbs_, cursor);
  const SimTime tti_end = tti_start + SimTime::from_ms(1);
  double granted_bits = 0.0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (grants[k] == 0) continue;
    Ue& u = ues_[ids[k]];
    auto& q = downlink ? u.dl : u.ul;
    auto& bytes = downlink ? u.dl_bytes : u.ul_bytes;
    double bits = grants[k] * scratch_[k].bits_per_rb;
    granted_bits += bits;
    while (bits > 0 && !q.empty() && q.front().ready <= tti_start) {
      Item& item = q.front();
      if (!item.first_service) {
        item.first_service = tti_start;
        item.latency.queueing += tti_start - item.ready;
      }
      const double used = std::min(bits, item.remaining_bits);
      item.remaining_bits -= used;
      bits -= used;
      if (item.remaining_bits > 1e-9) break;
      item.latency.transmission += tti_end - *item.first_service;
      bytes -= item.packet.size_bytes;
      --backlog_;
      if (item.relay_to) {
        Item next{item.packet, item.packet.size_bytes * 8.0, tti_end, std::nullopt, item.latency,
                  std::nullopt};
        relays_.push_back({*item.relay_to, std::move(next)});
      } else {
        log_->on_delivered(item.packet, tti_end, item.latency);
      }
      q.pop_front();
    }
  }
  const double peak = rbs_ * kResourceBlockHz * kTti * kCqi.back().efficiency;
  stats_.max_grant_ratio = std::max(stats_.max_grant_ratio, granted_bits / peak);
  return true;
}

void CellularNetwork::run_tti() {
  tti_pending_ = false;
  const SimTime start = sim_->now();
  ++stats_.ttis;
  for (auto& cell : cells_) {
    serve(cell, true, start);
    serve(cell, false, start);
  }
  // Relayed packets reach the core at the end of this TTI.
  const SimTime end = start + SimTime::from_ms(1);
  for (auto& [ue, item] : relays_) {
    if (!ues_[ue].serving) {
      log_->on_lost(item.packet, end);
      continue;
    }
    auto& u = ues_[ue];
    if (u.dl_bytes + item.packet.size_bytes > params_.buffer_bytes) {
      log_->on_lost(item.packet, end);
      continue;
    }
    u.dl_bytes += item.packet.size_bytes;
    u.dl.push_back(std::move(item));
    ++backlog_;
  }
  relays_.clear();
  if (backlog_ > 0) {
    tti_pending_ = true;
    sim_->schedule_at(end, [this] { run_tti(); }, EventCategory::Network);
  }
}

// ---------------------------------------------------------------------------
// Sidelink

void SidelinkParams::validate() const {
  radio.validate();
  path_loss.validate();
  if (processing_s < 0) throw std::invalid_argument("processing delay must be >= 0");
  if (!(period_s >= 1e-3)) throw std::invalid_argument("period must be >= 1 ms");
  if (!(selection_window_s >= 1e-3) || selection_window_s > period_s)
    throw std::invalid_argument("selection window must be in [1 ms, period]");
  if (subchannels < 1) throw std::invalid_argument("subchannels must be >= 1");
  if (reselection_min < 1 || reselection_max < reselection_min)
    throw std::invalid_argument("reselection counter range is invalid");
}

SidelinkNetwork::SidelinkNetwork(Simulator& sim, const World& world, SidelinkParams params,
                                 TrafficLog& log, std::uint64_t seed)
    : sim_(&sim), world_(&world), params_(std::move(params)), log_(&log), rng_(seed) {
  params_.validate();
  params_.path_loss = retune(params_.path_loss, params_.radio.carrier_frequency);
  noise_dbm_ = thermal_noise_dbm(params_.radio.bandwidth / params_.subchannels,
                                 params_.radio.noise_figure_db);
  period_ms_ = std::llround(params_.period_s * 1e3);
  window_ms_ = std::llround(params_.selection_window_s * 1e3);
}

std::uint32_t SidelinkNetwork::add_node(const Vehicle& v) {
  nodes_.push_back({&v, std::nullopt, 0});
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

void SidelinkNetwork::force_reservation(std::uint32_t node, SidelinkResource r, int count) {
  nodes_.at(node).reserved = r;
  nodes_.at(node).counter = count;
}

std::optional<SidelinkResource> SidelinkNetwork::reservation(std::uint32_t node) const {
  return nodes_.at(node).reserved;
}

void SidelinkNetwork::broadcast(std::uint32_t src, const Packet& p,
                                std::vector<std::uint32_t> receivers) {
  for (std::size_t i = 0; i < receivers.size(); ++i) log_->on_sent(p.flow);
  Node& n = nodes_.at(src);
  const SimTime ready = sim_->now() + SimTime::from_seconds(params_.processing_s);
  const std::int64_t ready_ms = ceil_ms(ready);

  std::int64_t subframe;
  if (!n.reserved || n.counter <= 0) {
    std::uniform_int_distribution<std::int64_t> offset(0, window_ms_ - 1);
    std::uniform_int_distribution<int> sub(0, params_.subchannels - 1);
    std::uniform_int_distribution<int> count(params_.reselection_min, params_.reselection_max);
    subframe = ready_ms + offset(rng_);
    n.reserved = SidelinkResource{static_cast<int>(subframe % period_ms_), sub(rng_)};
    n.counter = count(rng_);
  } else {
    const std::int64_t phase = ready_ms % period_ms_;
    subframe = ready_ms + ((n.reserved->subframe - phase) % period_ms_ + period_ms_) % period_ms_;
  }
  --n.counter;
  ++transmissions_;

  auto [it, fresh] = pending_.try_emplace(subframe);
  it->second.push_back({src, n.reserved->subchannel, p, std::move(receivers), ready});
  if (fresh)
    sim_->schedule_at(SimTime::from_ms(subframe), [this, subframe] { fire(subframe); },
                      EventCategory::Network);
}

void SidelinkNetwork::fire(std::int64_t subframe) {
  auto node = pending_.extract(subframe);
  const auto& txs = node.mapped();
  const SimTime start = SimTime::from_ms(subframe);
  const SimTime end = start + SimTime::from_ms(1);
  const double p_tx = params_.radio.tx_power_ue_dbm;
  const double collision_floor = noise_dbm_ + params_.collision_margin_db;

  for (std::size_t i = 0; i < txs.size(); ++i) {
    const Tx& tx = txs[i];
    const Vec3 src_pos = nodes_[tx.src].vehicle->position();
    for (std::uint32_t r : tx.receivers) {
      const Vec3 rx_pos = nodes_.at(r).vehicle->position();
      // Half duplex: a node transmitting in this subframe hears nothing.
      bool collided = false;
      for (const Tx& other : txs) collided = collided || other.src == r;
      for (std::size_t j = 0; j < txs.size() && !collided; ++j) {
        if (j == i || txs[j].subchannel != tx.subchannel) continue;
        const double other = p_tx - path_loss_db(nodes_[txs[j].src].vehicle->position(), rx_pos,
                                                 params_.path_loss, *world_);
        collided = other >= collision_floor;
      }
      if (collided) {
        ++collisions_;
        log_->on_lost(tx.packet, end);
        continue;
      }
      const double signal = p_tx - path_loss_db(src_pos, rx_pos, params_.path_loss, *world_);
      if (signal - noise_dbm_ < params_.sinr_threshold_db) {
        log_->on_lost(tx.packet, end);
        continue;
      }
      LatencyBreakdown lat;
      lat.processing = tx.ready - tx.packet.created;
      lat.access = start - tx.ready;
      lat.transmission = end - start;
      log_->on_delivered(tx.packet, end, lat);
    }
  }
}

}  // namespace hvsim
