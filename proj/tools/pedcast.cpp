// pedcast: synthetic corpus generation, training, evaluation, and
// single-window prediction for the bbox-sequence pedestrian forecasters.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "pedcast/checkpoint.hpp"
#include "pedcast/metrics.hpp"
#include "pedcast/runconfig.hpp"
#include "pedcast/synth.hpp"
#include "pedcast/trainer.hpp"

namespace fs = std::filesystem;
using namespace pedcast;

namespace {

// Exit codes: 0 ok, 2 config, 3 data, 4 numeric, 5 checkpoint, 6 query.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCheckpoint = 5;
constexpr int kExitQuery = 6;

struct QueryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ensure_writable(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    throw ConfigError("refusing to overwrite '" + path + "' (use --force)");
}

metrics::ImageSize parse_image_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos)
    throw ConfigError("--image-size expects WxH, got '" + s + "'");
  try {
    return {std::stod(s.substr(0, x)), std::stod(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--image-size expects WxH, got '" + s + "'");
  }
}

int cmd_generate(const std::string& config_path, std::string out_dir, bool force) {
  cli::RunConfig cfg = cli::parse_run_config(config_path);
  cli::apply_seed_override(cfg);
  if (out_dir.empty()) out_dir = cfg.out_dir;
  const std::string clean_path = (fs::path(out_dir) / "clean.tracks").string();
  const std::string pert_path = (fs::path(out_dir) / "perturbed.tracks").string();
  ensure_writable(clean_path, force);
  ensure_writable(pert_path, force);
  synth::Corpus corpus = synth::generate(cfg.scenario);
  fs::create_directories(out_dir);
  seqdata::save_tracks(corpus.clean, clean_path);
  seqdata::save_tracks(corpus.perturbed, pert_path);
  std::cout << "wrote " << corpus.clean.size() << " clean tracks to " << clean_path
            << "\nwrote " << corpus.perturbed.size() << " perturbed tracks to "
            << pert_path << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& model_override,
              std::size_t o_override, std::size_t t_override,
              const std::string& tracks_override, std::string out_dir,
              std::size_t epochs_override, bool resume, bool force) {
  cli::RunConfig cfg = cli::parse_run_config(config_path);
  cli::apply_seed_override(cfg);
  if (!model_override.empty()) cfg.model.kind = models::kind_from_name(model_override);
  if (o_override) cfg.window.observe_len = o_override;
  if (t_override) cfg.window.predict_len = t_override;
  if (!tracks_override.empty()) cfg.tracks_path = tracks_override;
  if (epochs_override) cfg.train.epochs = epochs_override;
  if (out_dir.empty()) out_dir = cfg.out_dir;
  cfg.finalize();
  cfg.model.validate();

  if (cfg.tracks_path.empty())
    throw ConfigError("no track file configured (paths.tracks or --tracks)");
  if (!fs::exists(cfg.tracks_path))
    throw DataError("track file does not exist: " + cfg.tracks_path);

  const std::string log_path = (fs::path(out_dir) / "log.csv").string();
  const std::string test_path = (fs::path(out_dir) / "test.tracks").string();
  if (!resume) {
    ensure_writable((fs::path(out_dir) / "last.pckp").string(), force);
    ensure_writable(log_path, force);
  }

  auto tracks = seqdata::load_tracks(cfg.tracks_path);
  auto windows = seqdata::make_windows(tracks, cfg.window);
  if (windows.empty())
    throw DataError("no windows of length O+T=" +
                    std::to_string(cfg.window.observe_len + cfg.window.predict_len) +
                    " available in " + cfg.tracks_path);
  auto split = seqdata::split_dataset(windows, cfg.split_train, cfg.split_val,
                                      cfg.split_test, cfg.split_seed);
  std::cout << "windows: " << split.train.size() << " train, " << split.val.size()
            << " val, " << split.test.size() << " test\n";

  fs::create_directories(out_dir);
  cfg.train.checkpoint_dir = out_dir;
  cfg.train.resume = resume;
  auto result = trainer::train(cfg.model, cfg.train, split.train, split.val);
  result.log.save(log_path);

  // test partition tracks, for eval runs against held-out videos
  std::set<std::string> test_videos;
  for (const auto& w : split.test) test_videos.insert(w.video_id);
  std::vector<seqdata::Track> test_tracks;
  for (const auto& t : tracks)
    if (test_videos.count(t.video_id)) test_tracks.push_back(t);
  if (!test_tracks.empty()) seqdata::save_tracks(test_tracks, test_path);

  std::cout << "trained " << models::kind_name(cfg.model.kind) << " for "
            << result.epochs_run << " epochs; final train loss "
            << (result.log.records.empty() ? 0.0
                                           : result.log.records.back().train_loss)
            << "\ncheckpoints in " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& tracks_path,
             bool horizon_sweep_flag, const std::string& image_size_str,
             const std::string& out_path, std::size_t stride, bool force) {
  const metrics::ImageSize img = parse_image_size(image_size_str);
  auto [cfg, params] = models::load_checkpoint(ckpt_path);
  auto tracks = seqdata::load_tracks(tracks_path);
  seqdata::WindowSpec spec{cfg.observe_len, cfg.predict_len, stride};
  auto windows = seqdata::make_windows(tracks, spec);
  if (windows.empty())
    throw DataError("no windows of length O+T available in " + tracks_path);

  auto report = trainer::evaluate(cfg, params, windows, img);
  std::printf("%-10s %6s %6s %10s %10s %10s\n", "model", "O", "T", "ADE(px)",
              "FDE(px)", "Accuracy");
  std::printf("%-10s %6zu %6zu %10.2f %10.2f %10.4f\n",
              models::kind_name(cfg.kind).c_str(), cfg.observe_len,
              cfg.predict_len, report.ade, report.fde, report.accuracy);
  std::printf("windows: %zu, TP/TN/FP/FN: %lld/%lld/%lld/%lld\n", windows.size(),
              static_cast<long long>(report.counts.tp),
              static_cast<long long>(report.counts.tn),
              static_cast<long long>(report.counts.fp),
              static_cast<long long>(report.counts.fn));
  if (horizon_sweep_flag) {
    auto sweep = metrics::horizon_sweep(cfg, params, windows, cfg.predict_len, img);
    const std::string csv = sweep.to_csv();
    if (!out_path.empty()) {
      ensure_writable(out_path, force);
      std::ofstream out(out_path);
      out << csv;
      std::cout << "per-step curves written to " << out_path << "\n";
    } else {
      std::cout << csv;
    }
  } else if (!out_path.empty()) {
    ensure_writable(out_path, force);
    std::ofstream out(out_path);
    out << report.to_csv();
    std::cout << "per-step curves written to " << out_path << "\n";
  }
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& tracks_path,
                const std::string& track_id, std::int64_t frame) {
  auto [cfg, params] = models::load_checkpoint(ckpt_path);
  auto tracks = seqdata::load_tracks(tracks_path);

  // the O aligned frames ending at `frame` for the requested track
  seqdata::ObservationWindow window;
  bool found = false;
  for (const auto& t : tracks) {
    if (t.track_id != track_id) continue;
    for (const auto& seg : seqdata::compute_speeds(t)) {
      for (std::size_t i = 0; i < seg.frames.size(); ++i) {
        if (seg.frames[i].frame != frame) continue;
        if (i + 1 < cfg.observe_len)
          throw QueryError("track '" + track_id + "' has only " +
                           std::to_string(i + 1) + " aligned frames at frame " +
                           std::to_string(frame) + ", need O=" +
                           std::to_string(cfg.observe_len));
        for (std::size_t j = i + 1 - cfg.observe_len; j <= i; ++j) {
          window.positions.push_back(seg.frames[j].bbox);
          window.speeds.push_back(seg.frames[j].speed);
          window.observed_actions.push_back(seg.frames[j].action);
        }
        window.video_id = seg.video_id;
        window.track_id = seg.track_id;
        window.start_frame = seg.frames[i + 1 - cfg.observe_len].frame;
        found = true;
      }
    }
  }
  if (!found)
    throw QueryError("no aligned frame " + std::to_string(frame) +
                     " found for track '" + track_id + "'");

  auto fc = models::decode_autoregressive(cfg, params, window, cfg.predict_len);
  std::printf("%-6s %10s %10s %10s %10s %8s %6s\n", "step", "x", "y", "w", "h",
              "p_cross", "label");
  for (std::size_t t = 0; t < fc.position_seq.size(); ++t) {
    const auto& b = fc.position_seq[t];
    std::printf("%-6zu %10.6f %10.6f %10.6f %10.6f %8.4f %6s\n", t + 1, b.x, b.y,
                b.w, b.h, fc.action_probs[t],
                fc.action_labels[t] ? "C" : "NC");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bbox-sequence pedestrian action and trajectory forecasting"};
  app.require_subcommand(1);

  std::string config_path, out_dir, model_override, tracks_path, ckpt_path;
  std::string image_size = "1920x1080", out_path, track_id;
  std::size_t o_override = 0, t_override = 0, epochs_override = 0, stride = 1;
  std::int64_t frame = 0;
  bool force = false, resume = false, sweep = false;

  auto* gen = app.add_subcommand("generate", "generate a synthetic track corpus");
  gen->add_option("--config", config_path, "run config file")->required();
  gen->add_option("--out-dir", out_dir, "output directory");
  gen->add_flag("--force", force, "overwrite existing outputs");

  auto* train = app.add_subcommand("train", "train a forecaster");
  train->add_option("--config", config_path, "run config file")->required();
  train->add_option("--model", model_override, "tf_ed or lstm_ed");
  train->add_option("--O", o_override, "observation length override");
  train->add_option("--T", t_override, "prediction length override");
  train->add_option("--tracks", tracks_path, "track file override");
  train->add_option("--out-dir", out_dir, "output directory");
  train->add_option("--epochs", epochs_override, "epoch count override");
  train->add_flag("--resume", resume, "resume from last checkpoint");
  train->add_flag("--force", force, "overwrite existing outputs");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on tracks");
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--tracks", tracks_path, "track file")->required();
  eval_cmd->add_flag("--horizon-sweep", sweep, "emit per-step ADE/accuracy curves");
  eval_cmd->add_option("--image-size", image_size, "pixel size WxH for metrics");
  eval_cmd->add_option("--out", out_path, "CSV output path for curves");
  eval_cmd->add_option("--stride", stride, "window stride");
  eval_cmd->add_flag("--force", force, "overwrite existing outputs");

  auto* predict = app.add_subcommand("predict", "forecast one window");
  predict->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  predict->add_option("--tracks", tracks_path, "track file")->required();
  predict->add_option("--track-id", track_id, "track identifier")->required();
  predict->add_option("--frame", frame, "last observed frame index")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(config_path, out_dir, force);
    if (train->parsed())
      return cmd_train(config_path, model_override, o_override, t_override,
                       tracks_path, out_dir, epochs_override, resume, force);
    if (eval_cmd->parsed())
      return cmd_eval(ckpt_path, tracks_path, sweep, image_size, out_path, stride,
                      force);
    if (predict->parsed()) return cmd_predict(ckpt_path, tracks_path, track_id, frame);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const QueryError& e) {
    std::cerr << "query error: " << e.what() << "\n";
    return kExitQuery;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
