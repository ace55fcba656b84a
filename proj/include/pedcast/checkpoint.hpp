#pragma once

#include <string>

#include "pedcast/models.hpp"

namespace pedcast::models {

// Binary little-endian checkpoint: magic "PCKP", format version, config
// record, then ordered (name, rank, dims, f64 values) entries.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ad::ParameterSet& params);

ModelConfig read_checkpoint_config(const std::string& path);

// Loads parameter values into params; the stored config must equal the
// requesting config and every tensor shape must match.
void load_checkpoint(const std::string& path, const ModelConfig& cfg,
                     ad::ParameterSet& params);

// Convenience: read config, build the layout, fill it.
std::pair<ModelConfig, ad::ParameterSet> load_checkpoint(const std::string& path);

}  // namespace pedcast::models
