#include "hvsim/car.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hvsim {

void IdmParams::validate() const {
  if (!(desired_speed > 0 && time_headway > 0 && min_gap > 0 && max_accel > 0 &&
        comfortable_decel > 0 && exponent > 0 && emergency_decel > 0))
    throw std::invalid_argument("IDM parameters must be positive");
}

IdmResult idm_acceleration(double v, double gap, double dv, const IdmParams& p) {
  if (gap <= 0.0) return {-p.emergency_decel, true};
  const double free = 1.0 - std::pow(v / p.desired_speed, p.exponent);
  if (std::isinf(gap)) return {p.max_accel * free, false};
  const double s_star = p.min_gap +
                        std::max(0.0, v * p.time_headway +
                                          v * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel)));
  const double ratio = s_star / gap;
  const double a = p.max_accel * (free - ratio * ratio);
  return {std::max(a, -p.emergency_decel), false};
}

void MobilParams::validate() const {
  if (politeness < 0.0) throw std::invalid_argument("politeness must be non-negative");
  if (threshold < 0.0) throw std::invalid_argument("threshold must be non-negative");
  if (!(safe_decel > 0.0)) throw std::invalid_argument("safe_decel must be positive");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double follow(double v, const std::optional<LaneNeighbor>& leader, const IdmParams& p) {
  if (!leader) return idm_acceleration(v, kInf, 0.0, p).acceleration;
  return idm_acceleration(v, leader->gap, v - leader->speed, p).acceleration;
}

}  // namespace

MobilDecision mobil_should_change(const MobilSituation& s, const IdmParams& idm,
                                  const MobilParams& mobil) {
  const double v = s.ego_speed;
  const double ego_before = follow(v, s.current_leader, idm);
  const double ego_after = follow(v, s.target_leader, idm);

  double new_follower_gain = 0.0;
  double new_follower_after = 0.0;
  bool overlap = (s.target_leader && s.target_leader->gap <= 0.0);
  if (s.target_follower) {
    const auto& f = *s.target_follower;
    overlap = overlap || f.gap <= 0.0;
    std::optional<LaneNeighbor> before;
    if (s.target_leader)
      before = LaneNeighbor{f.gap + s.ego_length + s.target_leader->gap, s.target_leader->speed};
    new_follower_after = follow(f.speed, LaneNeighbor{f.gap, v}, idm);
    new_follower_gain = new_follower_after - follow(f.speed, before, idm);
  }

  double old_follower_gain = 0.0;
  if (s.current_follower) {
    const auto& f = *s.current_follower;
    std::optional<LaneNeighbor> after;
    if (s.current_leader)
      after = LaneNeighbor{f.gap + s.ego_length + s.current_leader->gap, s.current_leader->speed};
    old_follower_gain = follow(f.speed, after, idm) - follow(f.speed, LaneNeighbor{f.gap, v}, idm);
  }

  MobilDecision d;
  d.safe = !overlap && new_follower_after >= -mobil.safe_decel;
  d.incentive = (ego_after - ego_before) + mobil.politeness * (new_follower_gain + old_follower_gain);
  d.change = d.safe && d.incentive > mobil.threshold;
  return d;
}

RouteDecision route_next(const RoadGraph& graph, std::uint32_t edge, RouteStrategy strategy,
                         std::mt19937_64& rng, std::optional<std::uint32_t> destination,
                         bool allow_u_turn) {
  const auto succ = graph.successors(edge);
  if (succ.empty()) {
    if (allow_u_turn) {
      if (auto back = graph.reverse_of(edge)) return {RouteDecision::Kind::UTurn, *back};
    }
    return {RouteDecision::Kind::DeadEnd, 0};
  }
  if (strategy == RouteStrategy::Shortest && destination) {
    const std::uint32_t head = graph.edge(edge).to;
    if (head == *destination) return {RouteDecision::Kind::Arrived, 0};
    const auto path = graph.shortest_path(head, *destination);
    if (path.empty()) return {RouteDecision::Kind::Arrived, 0};
    return {RouteDecision::Kind::Next, path.front()};
  }
  std::uniform_int_distribution<std::size_t> pick(0, succ.size() - 1);
  return {RouteDecision::Kind::Next, succ[pick(rng)]};
}

Vec3 lane_point(const RoadGraph& graph, std::uint32_t edge, std::uint32_t lane, double offset,
                double lane_width) {
  const RoadEdge& e = graph.edge(edge);
  const Vec2 a = graph.node(e.from).position;
  const Vec2 b = graph.node(e.to).position;
  const Vec2 d = e.length > 0.0 ? Vec2((b - a) / e.length) : Vec2(1.0, 0.0);
  const Vec2 right(d.y(), -d.x());
  const Vec2 p = a + d * offset + right * (lane_width * (lane + 0.5));
  return Vec3(p.x(), p.y(), 0.0);
}

Car::Car(std::uint32_t id, const RoadGraph& graph, const LanePosition& start, CarParams params,
         std::uint64_t seed)
    : Vehicle(id, VehicleKind::Car, params.max_speed),
      graph_(&graph),
      params_(params),
      lane_(start),
      rng_(seed) {
  params_.idm.validate();
  params_.mobil.validate();
  const RoadEdge& e = graph.edge(start.edge);
  if (start.lane >= e.lanes) throw std::out_of_range("lane index exceeds edge lanes");
  if (start.offset < 0.0 || start.offset > e.length)
    throw std::out_of_range("offset outside the edge");
  lane_.speed = std::clamp(start.speed, 0.0, speed_cap());
  place(lane_point(graph, lane_.edge, lane_.lane, lane_.offset, params_.lane_width));
  update_pose(0.0, SimTime{});
  extend_plan();
}

double Car::speed_cap() const { return std::min(params_.max_speed, params_.idm.desired_speed); }

void Car::set_destination(std::uint32_t node) {
  destination_ = node;
  params_.strategy = RouteStrategy::Shortest;
  plan_.clear();
  extend_plan();
}

void Car::change_lane(std::uint32_t lane) {
  if (lane >= graph_->edge(lane_.edge).lanes) throw std::out_of_range("lane index exceeds edge lanes");
  lane_.lane = lane;
}

void Car::extend_plan() {
  while (plan_.size() < params_.plan_length) {
    const std::uint32_t last = plan_.empty() ? lane_.edge : plan_.back();
    RouteDecision d = route_next(*graph_, last, params_.strategy, rng_, destination_,
                                 params_.allow_u_turn);
    if (d.kind == RouteDecision::Kind::Arrived) {
      destination_.reset();
      d = route_next(*graph_, last, RouteStrategy::Random, rng_, {}, params_.allow_u_turn);
    }
    if (d.kind == RouteDecision::Kind::DeadEnd) break;
    plan_.push_back(d.edge);
  }
}

void Car::update_pose(double accel, SimTime now) {
  const RoadEdge& e = graph_->edge(lane_.edge);
  const Vec2 a = graph_->node(e.from).position;
  const Vec2 b = graph_->node(e.to).position;
  const Vec2 d2 = e.length > 0.0 ? Vec2((b - a) / e.length) : Vec2(1.0, 0.0);
  const Vec3 dir(d2.x(), d2.y(), 0.0);
  commit(lane_point(*graph_, lane_.edge, lane_.lane, lane_.offset, params_.lane_width),
         dir * lane_.speed, dir * accel, now);
}

void Car::step(double dt, SimTime now) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (removed_) return;
  IdmParams idm = params_.idm;
  idm.desired_speed = std::min(idm.desired_speed, graph_->edge(lane_.edge).speed_limit);
  const double a = command_ ? *command_ : idm_acceleration(lane_.speed, kInf, 0.0, idm).acceleration;
  command_.reset();

  const double v0 = lane_.speed;
  double v1 = v0 + a * dt;
  double dx;
  if (v1 < 0.0) {
    dx = a < 0.0 ? v0 * v0 / (-2.0 * a) : 0.0;
    v1 = 0.0;
  } else {
    dx = 0.5 * (v0 + v1) * dt;
  }
  v1 = std::min(v1, speed_cap());
  lane_.speed = v1;
  lane_.offset += dx;

  while (lane_.offset > graph_->edge(lane_.edge).length) {
    if (plan_.empty()) extend_plan();
    if (plan_.empty()) {
      removed_ = true;
      lane_.offset = graph_->edge(lane_.edge).length;
      spdlog::info("car {} removed at dead end of edge {}", id(), lane_.edge);
      break;
    }
    lane_.offset -= graph_->edge(lane_.edge).length;
    lane_.edge = plan_.front();
    plan_.pop_front();
    lane_.lane = std::min(lane_.lane, graph_->edge(lane_.edge).lanes - 1);
    extend_plan();
  }
  update_pose(a, now);
}

PredictionInput Car::prediction_input(double tau) const {
  PredictionInput in = Vehicle::prediction_input(tau);
  in.waypoints.clear();
  in.waypoints.push_back(Waypoint{lane_point(*graph_, lane_.edge, lane_.lane,
                                             graph_->edge(lane_.edge).length, params_.lane_width),
                                  2.0});
  for (std::uint32_t e : plan_) {
    const RoadEdge& edge = graph_->edge(e);
    in.waypoints.push_back(Waypoint{
        lane_point(*graph_, e, std::min(lane_.lane, edge.lanes - 1), edge.length, params_.lane_width),
        2.0});
  }
  in.speed = lane_.speed;
  return in;
}

// ---------------------------------------------------------------------------

Car& Traffic::add(std::unique_ptr<Car> car) {
  if (!car) throw std::invalid_argument("null car");
  cars_.push_back(std::move(car));
  return *cars_.back();
}

void Traffic::rebuild_lanes() {
  const auto& edges = graph_->edges();
  if (lanes_.size() != edges.size()) {
    lanes_.assign(edges.size(), {});
    for (std::size_t e = 0; e < edges.size(); ++e) lanes_[e].resize(edges[e].lanes);
  }
  for (auto& e : lanes_)
    for (auto& l : e) l.clear();
  for (std::size_t i = 0; i < cars_.size(); ++i) {
    const Car& c = *cars_[i];
    if (c.removed()) continue;
    const auto& lp = c.lane_position();
    lanes_[lp.edge][lp.lane].push_back(Slot{lp.offset, lp.speed, i});
  }
  for (auto& e : lanes_)
    for (auto& l : e)
      std::sort(l.begin(), l.end(), [](const Slot& x, const Slot& y) {
        return x.offset != y.offset ? x.offset < y.offset : x.index < y.index;
      });
}

const std::vector<Traffic::Slot>* Traffic::lane(std::uint32_t edge, std::uint32_t l) const {
  if (edge >= lanes_.size() || l >= lanes_[edge].size()) return nullptr;
  return &lanes_[edge][l];
}

std::optional<LaneNeighbor> Traffic::leader_in(std::size_t self, std::uint32_t l) const {
  const Car& car = *cars_[self];
  const auto& lp = car.lane_position();
  const double len = car.params().length;
  if (const auto* v = lane(lp.edge, l)) {
    for (const Slot& s : *v) {
      if (s.index == self) continue;
      if (s.offset > lp.offset || (s.offset == lp.offset && s.index > self))
        return LaneNeighbor{s.offset - lp.offset - len, s.speed};
    }
  }
  double dist = graph_->edge(lp.edge).length - lp.offset;
  for (std::uint32_t e : car.plan()) {
    if (dist > 300.0) break;
    const RoadEdge& edge = graph_->edge(e);
    const auto* v = lane(e, std::min(l, edge.lanes - 1));
    if (v && !v->empty()) {
      const Slot& s = v->front();
      if (s.index != self) return LaneNeighbor{dist + s.offset - len, s.speed};
    }
    dist += edge.length;
  }
  return std::nullopt;
}

std::optional<LaneNeighbor> Traffic::follower_in(std::size_t self, std::uint32_t l) const {
  const Car& car = *cars_[self];
  const auto& lp = car.lane_position();
  const double len = car.params().length;
  const auto* v = lane(lp.edge, l);
  if (!v) return std::nullopt;
  std::optional<LaneNeighbor> best;
  for (const Slot& s : *v) {
    if (s.index == self) continue;
    if (s.offset < lp.offset) best = LaneNeighbor{lp.offset - s.offset - len, s.speed};
  }
  return best;
}

std::optional<LaneNeighbor> Traffic::leader_of(const Car& car) const {
  for (std::size_t i = 0; i < cars_.size(); ++i)
    if (cars_[i].get() == &car) return leader_in(i, car.lane_position().lane);
  throw std::invalid_argument("car is not part of this traffic");
}

void Traffic::step(double dt, SimTime now) {
  rebuild_lanes();
  const std::uint64_t interval_ticks = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(cars_.empty() ? 1.0
                                                 : cars_.front()->params().lane_change_interval / dt)));
  std::vector<double> accel(cars_.size(), 0.0);
  std::vector<std::optional<std::uint32_t>> lane_change(cars_.size());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> claimed;  // (edge, lane) targets this tick

  for (std::size_t i = 0; i < cars_.size(); ++i) {
    Car& c = *cars_[i];
    if (c.removed()) continue;
    const auto& lp = c.lane_position();
    IdmParams idm = c.params().idm;
    idm.desired_speed = std::min(idm.desired_speed, graph_->edge(lp.edge).speed_limit);
    const auto leader = leader_in(i, lp.lane);
    IdmResult r = leader ? idm_acceleration(lp.speed, leader->gap, lp.speed - leader->speed, idm)
                         : idm_acceleration(lp.speed, kInf, 0.0, idm);
    if (leader) stats_.min_gap = std::min(stats_.min_gap, leader->gap);
    if (r.emergency) ++stats_.emergencies;
    accel[i] = r.acceleration;

    const std::uint32_t lanes = graph_->edge(lp.edge).lanes;
    if (lanes < 2 || (ticks_ + c.id()) % interval_ticks != 0) continue;
    MobilDecision best;
    std::optional<std::uint32_t> best_lane;
    for (int delta : {-1, 1}) {
      const int t = static_cast<int>(lp.lane) + delta;
      if (t < 0 || t >= static_cast<int>(lanes)) continue;
      const auto target = static_cast<std::uint32_t>(t);
      MobilSituation s;
      s.ego_speed = lp.speed;
      s.ego_length = c.params().length;
      s.current_leader = leader;
      s.current_follower = follower_in(i, lp.lane);
      s.target_leader = leader_in(i, target);
      s.target_follower = follower_in(i, target);
      const MobilDecision d = mobil_should_change(s, idm, c.params().mobil);
      if (!d.change) continue;
      if (!best_lane || d.incentive > best.incentive) {
        best = d;
        best_lane = target;
      } else if (d.incentive == best.incentive) {
        best_lane.reset();  // symmetric tie: stay
      }
    }
    if (best_lane) {
      const std::pair key{lp.edge, *best_lane};
      if (std::find(claimed.begin(), claimed.end(), key) == claimed.end()) {
        claimed.push_back(key);
        lane_change[i] = best_lane;
      }
    }
  }

  for (std::size_t i = 0; i < cars_.size(); ++i) {
    Car& c = *cars_[i];
    if (c.removed()) continue;
    if (lane_change[i]) {
      c.change_lane(*lane_change[i]);
      ++stats_.lane_changes;
    }
    c.command(accel[i]);
    c.step(dt, now);
    if (c.removed()) ++stats_.removed;
  }
  ++ticks_;
}

}  // namespace hvsim
