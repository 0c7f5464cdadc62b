#include "hvsim/prediction.hpp"

#include <cmath>
#include <stdexcept>

namespace hvsim {

const char* to_string(PredictionCase c) {
  switch (c) {
    case PredictionCase::Steering:
      return "steering";
    case PredictionCase::Waypoint:
      return "waypoint";
    case PredictionCase::Extrapolation:
      return "extrapolation";
    case PredictionCase::Hold:
      return "hold";
  }
  return "unknown";
}

PredictionStep predict_step(const Vec3& position, int iteration, const std::optional<Vec3>& steering,
                            const std::vector<Waypoint>& waypoints, const std::vector<Vec3>& history,
                            double d_inc, const PredictionParams& params) {
  if (iteration == 0 && steering) return {position + *steering, PredictionCase::Steering};

  if (!waypoints.empty()) {
    const Vec3 d = waypoints.front().target - position;
    const double dist = d.norm();
    if (dist > 0.0) {
      // The final waypoint is approached without overshooting it.
      const double step = waypoints.size() == 1 ? std::min(d_inc, dist) : d_inc;
      return {position + d / dist * step, PredictionCase::Waypoint};
    }
  }

  // Mean of the last h unit step directions, ending at `position`.
  Vec3 sum = Vec3::Zero();
  int n = 0;
  Vec3 next = position;
  for (auto it = history.rbegin(); it != history.rend() && n < params.history_length; ++it) {
    const Vec3 s = next - *it;
    const double len = s.norm();
    next = *it;
    if (len <= 0.0) continue;
    sum += s / len;
    ++n;
  }
  if (n == 0) return {position, PredictionCase::Hold};
  Vec3 mean = sum / params.history_length;
  if (!params.literal_extrapolation) mean = sum / n * d_inc;
  return {position + mean, PredictionCase::Extrapolation};
}

PredictedTrack predict_track(const PredictionInput& input, double horizon,
                             const PredictionParams& params) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(input.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (params.history_length < 1) throw std::invalid_argument("history_length must be >= 1");
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / input.tau - 1e-9)));
  const double d_inc = input.speed * input.tau;

  PredictedTrack track;
  track.horizon = horizon;
  track.tau = input.tau;
  track.positions.reserve(n);
  track.cases.reserve(n);

  std::vector<Waypoint> wps = input.waypoints;
  std::vector<Vec3> history = input.history;
  Vec3 p = input.position;
  bool holding = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (holding) {
      track.positions.push_back(p);
      track.cases.push_back(PredictionCase::Hold);
      continue;
    }
    const PredictionStep s =
        predict_step(p, static_cast<int>(i), input.steering, wps, history, d_inc, params);
    history.push_back(p);
    if (history.size() > static_cast<std::size_t>(params.history_length) + 1)
      history.erase(history.begin());
    p = s.position;
    if (s.used == PredictionCase::Waypoint || s.used == PredictionCase::Steering) {
      while (wps.size() > 1 && (wps.front().target - p).norm() <= wps.front().arrival_radius)
        wps.erase(wps.begin());
      if (wps.size() == 1 && (wps.front().target - p).norm() == 0.0) holding = true;
    }
    track.positions.push_back(p);
    track.cases.push_back(s.used);
  }
  return track;
}

PredictedTrack predict(const Vehicle& vehicle, double horizon, double tau,
                       const PredictionParams& params) {
  return predict_track(vehicle.prediction_input(tau), horizon, params);
}

RsrpSeries predict_rsrp(const PredictedTrack& track, const ConnectivityMap& map) {
  RsrpSeries out;
  out.rsrp_dbm.reserve(track.positions.size());
  out.clamped.reserve(track.positions.size());
  for (const Vec3& p : track.positions) {
    const auto l = map.lookup(p.head<2>());
    out.rsrp_dbm.push_back(l.rsrp_dbm);
    out.clamped.push_back(l.clamped);
  }
  return out;
}

const ConnectivityMap& nearest_layer(const std::vector<ConnectivityMap>& layers, double altitude) {
  if (layers.empty()) throw std::invalid_argument("no connectivity map layers");
  const ConnectivityMap* best = &layers.front();
  for (const auto& m : layers)
    if (std::abs(m.altitude() - altitude) < std::abs(best->altitude() - altitude)) best = &m;
  return *best;
}

}  // namespace hvsim
