#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pedcast/models.hpp"
#include "pedcast/seqdata.hpp"

namespace pedcast::synth {

// Behavior mix proportions must sum to 1.
struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::size_t num_tracks = 100;
  std::size_t num_videos = 10;
  double frame_rate = 30.0;
  double p_cross = 0.3;
  double p_not_cross = 0.3;
  double p_diagonal_cross = 0.15;
  double p_stop_then_cross = 0.25;
  double noise_sigma = 0.0;       // bbox observation noise, normalized units
  double dropout_prob = 0.0;      // per-frame detection miss
  double id_switch_prob = 0.0;    // per-track mid-track identity split
  double approach_rate = 0.002;   // box growth per frame from ego approach

  void validate() const;
};

struct Corpus {
  std::vector<seqdata::Track> clean;
  std::vector<seqdata::Track> perturbed;
};

// Deterministic ego-camera pedestrian tracks from piecewise kinematic
// templates. All emitted coordinates sit on a 2^-20 lattice so speed
// derivation and position reconstruction are exact in 64-bit floats.
Corpus generate(const ScenarioConfig& cfg);

// Repeats the last observed speed and action over the horizon.
models::Forecast constant_velocity_baseline(const seqdata::ObservationWindow& window);

}  // namespace pedcast::synth
