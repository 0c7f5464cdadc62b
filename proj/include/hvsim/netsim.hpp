#pragma once

// Packet-level radio abstractions: a TTI-based cellular cell with
// round-robin resource blocks, and a sidelink with semi-persistent slot
// reservations. Both run entirely on the simulator thread.

#include "hvsim/channel.hpp"
#include "hvsim/des.hpp"
#include "hvsim/vehicle.hpp"

#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hvsim {

enum class Technology { Cellular, Sidelink };

const char* to_string(Technology t);

struct RadioConfig {
  Technology technology = Technology::Cellular;
  double carrier_frequency = 2.1e9;  // Hz
  double bandwidth = 20e6;           // Hz
  double tx_power_ue_dbm = 23.0;
  double tx_power_enb_dbm = 43.0;  // cellular only
  double noise_figure_db = 9.0;

  static RadioConfig cellular();
  static RadioConfig sidelink();
  void validate() const;  // throws std::invalid_argument
};

struct Packet {
  std::uint64_t id = 0;
  std::uint32_t size_bytes = 0;
  SimTime created;
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint32_t flow = 0;
};

// Components of a delivered packet's latency. total() equals
// delivery time minus creation time exactly.
struct LatencyBreakdown {
  SimTime processing;    // fixed intra-UE processing
  SimTime access;        // grant cycle or wait for the reserved slot
  SimTime queueing;      // buffered while the scheduler served others
  SimTime transmission;  // first granted TTI to completion

  SimTime total() const { return processing + access + queueing + transmission; }
};

struct PacketRecord {
  std::uint64_t packet = 0;
  std::uint32_t flow = 0;
  SimTime created;
  SimTime finished;
  bool delivered = false;
  std::uint32_t size_bytes = 0;
  Technology technology = Technology::Cellular;
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  LatencyBreakdown latency;
};

struct FlowStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t delivered_bytes = 0;
  std::vector<double> latency_s;

  double pdr() const;           // 0 when nothing was sent
  double mean_latency() const;  // NaN when nothing was delivered
  double throughput_bps(double duration_s) const;
};

// Collects per-flow outcomes. Packets still in flight at the end count as
// sent but not delivered.
class TrafficLog {
public:
  explicit TrafficLog(bool keep_records = false) : keep_records_(keep_records) {}

  std::uint32_t add_flow(Technology technology, std::uint32_t src, std::uint32_t dst);
  void on_sent(std::uint32_t flow);
  void on_delivered(const Packet& p, SimTime at, const LatencyBreakdown& latency);
  void on_lost(const Packet& p, SimTime at);

  std::size_t flow_count() const { return flows_.size(); }
  const FlowStats& stats(std::uint32_t flow) const { return flows_.at(flow).stats; }
  Technology technology(std::uint32_t flow) const { return flows_.at(flow).technology; }
  const std::vector<PacketRecord>& records() const { return records_; }

  // run,t_created,t_finished,delivered,size,technology,src,dst
  void write_csv(std::ostream& out, int run, bool header = true) const;

private:
  struct Flow {
    Technology technology;
    std::uint32_t src;
    std::uint32_t dst;
    FlowStats stats;
  };
  void record(const Packet& p, SimTime at, bool delivered, const LatencyBreakdown& latency);

  bool keep_records_;
  std::vector<Flow> flows_;
  std::vector<PacketRecord> records_;
};

// ---------------------------------------------------------------------------
// Link budget

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

// -174 dBm/Hz + 10 log10(B) + NF
double thermal_noise_dbm(double bandwidth_hz, double noise_figure_db);

double sinr_db(double signal_dbm, std::span<const double> interferers_dbm, double noise_dbm);

// CQI-style step table, 0.15 .. 5.5 bit/s/Hz; 0 below the lowest entry.
double spectral_efficiency(double sinr_db);
double min_decodable_sinr_db();

inline constexpr double kResourceBlockHz = 180e3;
inline constexpr double kTti = 1e-3;

// 100 blocks at 20 MHz.
int resource_blocks_for(double bandwidth_hz);

struct SchedulerRequest {
  double bits_per_rb = 0.0;
  double demand_bits = 0.0;
};

// Hands out `rbs` blocks one at a time, cycling from `cursor` over UEs that
// still have demand and a usable channel. `cursor` advances past the last
// served UE so remainders rotate across TTIs.
std::vector<int> round_robin_grant(std::span<const SchedulerRequest> requests, int rbs,
                                   std::size_t& cursor);

// ---------------------------------------------------------------------------
// Traffic patterns

struct TrafficSpec {
  std::uint32_t size_bytes = 190;
  double interval_s = 0.1;

  double offered_bps() const { return size_bytes * 8.0 / interval_s; }
  void validate() const;
};

inline TrafficSpec traffic_cam() { return {190, 0.1}; }
inline TrafficSpec traffic_cbr() { return {8000, 0.01}; }

// Calls `emit` every interval starting after `phase`.
EventHandle start_traffic(Simulator& sim, const TrafficSpec& spec, SimTime phase,
                          std::function<void()> emit);

// ---------------------------------------------------------------------------
// Cellular

struct CellularParams {
  RadioConfig radio = RadioConfig::cellular();
  PathLossParams path_loss;  // baseline frequency follows radio.carrier_frequency
  double grant_delay_s = 0.008;
  double ue_processing_s = 0.004;
  double attach_interval_s = 1.0;
  double hysteresis_db = 3.0;
  double min_rsrp_dbm = -100.0;  // wideband received power; about the lowest decodable SNR at 20 MHz
  double channel_update_s = 0.1;
  std::uint32_t buffer_bytes = 400'000;  // per UE and direction, tail drop

  void validate() const;
};

struct CellStats {
  std::uint64_t ttis = 0;
  double max_grant_ratio = 0.0;  // max over TTIs of granted bits / capacity
  std::uint64_t handovers = 0;
};

class CellularNetwork {
public:
  CellularNetwork(Simulator& sim, const World& world, CellularParams params, TrafficLog& log);
  CellularNetwork(const CellularNetwork&) = delete;
  CellularNetwork& operator=(const CellularNetwork&) = delete;

  // Cells on different carriers do not interfere.
  std::uint32_t add_cell(const Vehicle& station, std::uint32_t carrier = 0);
  std::uint32_t add_ue(const Vehicle& ue);

  // Attaches every UE and starts the channel and attachment timers.
  void start();

  // Downlink packet from a remote server.
  void send_downlink(std::uint32_t ue, const Packet& p);
  // Uplink packet; when `relay_to` is set it is forwarded through the core
  // to that UE's serving cell after reception.
  void send_uplink(std::uint32_t ue, const Packet& p, std::optional<std::uint32_t> relay_to = {});

  std::optional<std::uint32_t> serving_cell(std::uint32_t ue) const;
  double rsrp_dbm(std::uint32_t ue, std::uint32_t cell) const;
  double downlink_sinr_db(std::uint32_t ue) const;
  std::size_t cell_count() const { return cells_.size(); }
  std::size_t ue_count() const { return ues_.size(); }
  const std::vector<std::uint32_t>& attached(std::uint32_t cell) const;
  const CellStats& stats() const { return stats_; }
  double cell_capacity_bps(std::uint32_t cell) const;

  // Recomputes link state and attachment immediately (tests, scenario setup).
  void refresh_channels();
  void evaluate_attachment();

private:
  struct Item {
    Packet packet;
    double remaining_bits;
    SimTime ready;
    std::optional<SimTime> first_service;
    LatencyBreakdown latency;
    std::optional<std::uint32_t> relay_to;
  };
  struct Ue {
    const Vehicle* vehicle = nullptr;
    std::optional<std::uint32_t> serving;
    std::vector<double> loss_db;  // per cell
    double dl_bits_per_rb = 0.0;
    double ul_bits_per_rb = 0.0;
    std::deque<Item> dl;
    std::deque<Item> ul;
    std::uint32_t dl_bytes = 0;
    std::uint32_t ul_bytes = 0;
  };
  struct Cell {
    const Vehicle* station;
    std::uint32_t carrier;
    std::vector<std::uint32_t> attached;
    std::size_t dl_cursor = 0;
    std::size_t ul_cursor = 0;
  };

  void enqueue(std::uint32_t ue, Item item, bool downlink);
  void ensure_tti();
  void run_tti();
  bool serve(Cell& cell, bool downlink, SimTime tti_start);
  void set_serving(std::uint32_t ue, std::optional<std::uint32_t> cell);
  void drop_buffers(Ue& ue);
  double rb_bits(double sinr) const;

  Simulator* sim_;
  const World* world_;
  CellularParams params_;
  TrafficLog* log_;
  int rbs_;
  double noise_dbm_;
  std::vector<Cell> cells_;
  std::vector<Ue> ues_;
  bool tti_pending_ = false;
  std::uint64_t backlog_ = 0;  // items in ready buffers
  CellStats stats_;
  std::vector<SchedulerRequest> scratch_;
  std::vector<std::pair<std::uint32_t, Item>> relays_;
};

// ---------------------------------------------------------------------------
// Sidelink

struct SidelinkParams {
  RadioConfig radio = RadioConfig::sidelink();
  PathLossParams path_loss;
  double processing_s = 0.004;
  double period_s = 0.1;
  double selection_window_s = 0.01;
  int subchannels = 5;
  int reselection_min = 5;
  int reselection_max = 15;
  double sinr_threshold_db = 0.0;
  // A same-resource transmission is a collision where it arrives above the
  // noise floor by at least this margin.
  double collision_margin_db = 0.0;

  void validate() const;
};

struct SidelinkResource {
  int subframe = 0;  // offset within the reservation period, ms
  int subchannel = 0;
  auto operator<=>(const SidelinkResource&) const = default;
};

class SidelinkNetwork {
public:
  SidelinkNetwork(Simulator& sim, const World& world, SidelinkParams params, TrafficLog& log,
                  std::uint64_t seed);
  SidelinkNetwork(const SidelinkNetwork&) = delete;
  SidelinkNetwork& operator=(const SidelinkNetwork&) = delete;

  std::uint32_t add_node(const Vehicle& v);

  // One transmission heard by every listed receiver; each receiver is a
  // separate delivery outcome for packet.flow.
  void broadcast(std::uint32_t src, const Packet& p, std::vector<std::uint32_t> receivers);

  // Pins the reservation (tests); the counter is set to `count` transmissions.
  void force_reservation(std::uint32_t node, SidelinkResource r, int count = 1000);
  std::optional<SidelinkResource> reservation(std::uint32_t node) const;

  std::uint64_t collisions() const { return collisions_; }
  std::uint64_t transmissions() const { return transmissions_; }
  double noise_dbm() const { return noise_dbm_; }

private:
  struct Node {
    const Vehicle* vehicle;
    std::optional<SidelinkResource> reserved;
    int counter = 0;
  };
  struct Tx {
    std::uint32_t src;
    int subchannel;
    Packet packet;
    std::vector<std::uint32_t> receivers;
    SimTime ready;
  };
  void fire(std::int64_t subframe);

  Simulator* sim_;
  const World* world_;
  SidelinkParams params_;
  TrafficLog* log_;
  std::mt19937_64 rng_;
  double noise_dbm_;
  std::int64_t period_ms_;
  std::int64_t window_ms_;
  std::vector<Node> nodes_;
  std::map<std::int64_t, std::vector<Tx>> pending_;  // absolute subframe -> transmissions
  std::uint64_t collisions_ = 0;
  std::uint64_t transmissions_ = 0;
};

}  // namespace hvsim
