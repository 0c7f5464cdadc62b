#pragma once

// Hierarchical mobility prediction. Each iteration uses the most precise
// source available: the steering output at i = 0, then waypoints, then
// extrapolation of the recent heading.

#include "hvsim/channel.hpp"
#include "hvsim/vehicle.hpp"

#include <vector>

namespace hvsim {

struct PredictionParams {
  int history_length = 5;  // h
  // Use the extrapolation branch exactly as printed: the mean unit direction,
  // without the d_inc = v * tau scaling.
  bool literal_extrapolation = false;
};

enum class PredictionCase { Steering, Waypoint, Extrapolation, Hold };

const char* to_string(PredictionCase c);

struct PredictionStep {
  Vec3 position{0.0, 0.0, 0.0};
  PredictionCase used = PredictionCase::Hold;
};

// One iteration from `position` given the remaining waypoints (front is the
// current target) and the position history, oldest first.
PredictionStep predict_step(const Vec3& position, int iteration, const std::optional<Vec3>& steering,
                            const std::vector<Waypoint>& waypoints, const std::vector<Vec3>& history,
                            double d_inc, const PredictionParams& params = {});

struct PredictedTrack {
  std::vector<Vec3> positions;  // one per iteration, ceil(horizon / tau)
  std::vector<PredictionCase> cases;
  double horizon = 0.0;
  double tau = 0.0;
};

PredictedTrack predict_track(const PredictionInput& input, double horizon,
                             const PredictionParams& params = {});

// Uniform entry point for every vehicle kind.
PredictedTrack predict(const Vehicle& vehicle, double horizon, double tau,
                       const PredictionParams& params = {});

struct RsrpSeries {
  std::vector<double> rsrp_dbm;
  std::vector<bool> clamped;  // position fell outside the map
};

RsrpSeries predict_rsrp(const PredictedTrack& track, const ConnectivityMap& map);

// Picks the layer whose altitude is closest to `altitude`.
const ConnectivityMap& nearest_layer(const std::vector<ConnectivityMap>& layers, double altitude);

}  // namespace hvsim
