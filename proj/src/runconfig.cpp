#include "pedcast/runconfig.hpp"

#include <cstdlib>
#include <fstream>

namespace pedcast::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos;
    const auto u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a non-negative integer: '" +
                      v + "'");
  }
}

}  // namespace

void RunConfig::finalize() {
  model.observe_len = window.observe_len;
  model.predict_len = window.predict_len;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(where + ": malformed section header '" + line + "'");
      section = line.substr(1, line.size() - 2);
      if (section != "scenario" && section != "window" && section != "model" &&
          section != "train" && section != "split" && section != "paths" &&
          section != "eval")
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string qkey = section + "." + key;

    if (section == "scenario") {
      if (key == "seed") cfg.scenario.seed = to_u64(qkey, value);
      else if (key == "num_tracks") cfg.scenario.num_tracks = to_u64(qkey, value);
      else if (key == "num_videos") cfg.scenario.num_videos = to_u64(qkey, value);
      else if (key == "frame_rate") cfg.scenario.frame_rate = to_double(qkey, value);
      else if (key == "p_cross") cfg.scenario.p_cross = to_double(qkey, value);
      else if (key == "p_not_cross") cfg.scenario.p_not_cross = to_double(qkey, value);
      else if (key == "p_diagonal_cross")
        cfg.scenario.p_diagonal_cross = to_double(qkey, value);
      else if (key == "p_stop_then_cross")
        cfg.scenario.p_stop_then_cross = to_double(qkey, value);
      else if (key == "noise_sigma") cfg.scenario.noise_sigma = to_double(qkey, value);
      else if (key == "dropout_prob") cfg.scenario.dropout_prob = to_double(qkey, value);
      else if (key == "id_switch_prob")
        cfg.scenario.id_switch_prob = to_double(qkey, value);
      else if (key == "approach_rate")
        cfg.scenario.approach_rate = to_double(qkey, value);
      else throw ConfigError(where + ": unknown key '" + qkey + "'");
    } else if (section == "window") {
      if (key == "O") cfg.window.observe_len = to_u64(qkey, value);
      else if (key == "T") cfg.window.predict_len = to_u64(qkey, value);
      else if (key == "stride") cfg.window.stride = to_u64(qkey, value);
      else throw ConfigError(where + ": unknown key '" + qkey + "'");
    } else if (section == "model") {
      if (key == "kind") cfg.model.kind = models::kind_from_name(value);
      else if (key == "embed_dim") cfg.model.embed_dim = to_u64(qkey, value);
      else if (key == "num_layers") cfg.model.num_layers = to_u64(qkey, value);
      else if (key == "num_heads") cfg.model.num_heads = to_u64(qkey, value);
      else if (key == "ff_dim") cfg.model.ff_dim = to_u64(qkey, value);
      else throw ConfigError(where + ": unknown key '" + qkey + "'");
    } else if (section == "train") {
      if (key == "batch_size") cfg.train.batch_size = to_u64(qkey, value);
      else if (key == "learning_rate") cfg.train.learning_rate = to_double(qkey, value);
      else if (key == "epochs") cfg.train.epochs = to_u64(qkey, value);
      else if (key == "lambda") cfg.train.loss_weight_lambda = to_double(qkey, value);
      else if (key == "seed") cfg.train.seed = to_u64(qkey, value);
      else if (key == "eval_every") cfg.train.eval_every = to_u64(qkey, value);
      else throw ConfigError(where + ": unknown key '" + qkey + "'");
    } else if (section == "split") {
      if (key == "train") cfg.split_train = to_double(qkey, value);
      else if (key == "val") cfg.split_val = to_double(qkey, value);
      else if (key == "test") cfg.split_test = to_double(qkey, value);
      else if (key == "seed") cfg.split_seed = to_u64(qkey, value);
      else throw ConfigError(where + ": unknown key '" + qkey + "'");
    } else if (section == "paths") {
      if (key == "tracks") cfg.tracks_path = value;
      else if (key == "out_dir") cfg.out_dir = value;
      else throw ConfigError(where + ": unknown key '" + qkey + "'");
    } else if (section == "eval") {
      if (key == "image_width") cfg.image_width = to_double(qkey, value);
      else if (key == "image_height") cfg.image_height = to_double(qkey, value);
      else throw ConfigError(where + ": unknown key '" + qkey + "'");
    } else {
      throw ConfigError(where + ": key '" + key + "' outside any section");
    }
  }
  cfg.finalize();
  return cfg;
}

void apply_seed_override(RunConfig& cfg) {
  const char* env = std::getenv("PEDCAST_SEED");
  if (!env) return;
  const std::uint64_t seed = to_u64("PEDCAST_SEED", env);
  cfg.scenario.seed = seed;
  cfg.train.seed = seed;
  cfg.split_seed = seed;
}

}  // namespace pedcast::cli
