#pragma once

#include <string>

#include "pedcast/models.hpp"
#include "pedcast/seqdata.hpp"
#include "pedcast/synth.hpp"
#include "pedcast/trainer.hpp"

namespace pedcast::cli {

// Merged configuration for all subcommands, parsed from a line-based
// key=value file with [section] headers and '#' comments. Unknown
// sections or keys are rejected.
struct RunConfig {
  synth::ScenarioConfig scenario;
  seqdata::WindowSpec window;
  models::ModelConfig model;
  trainer::TrainConfig train;
  std::string tracks_path;
  std::string out_dir = "out";
  double split_train = 0.7, split_val = 0.1, split_test = 0.2;
  std::uint64_t split_seed = 42;
  double image_width = 1920.0, image_height = 1080.0;

  // Syncs window lengths into the model config; call after parsing.
  void finalize();
};

RunConfig parse_run_config(const std::string& path);

// PEDCAST_SEED, when set, overrides the scenario, split, and training
// seeds.
void apply_seed_override(RunConfig& cfg);

}  // namespace pedcast::cli
