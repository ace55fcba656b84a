#include "pedcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pedcast::synth {

using seqdata::BBox;
using seqdata::Track;
using seqdata::TrackFrame;

namespace {

// Road band in normalized image x.
constexpr double kBandLo = 0.35;
constexpr double kBandHi = 0.65;

double quantize(double v) {
  return std::round(v * 1048576.0) / 1048576.0;  // 2^-20 lattice
}

double clamp_center(double v) {
  return std::clamp(v, -0.19, 1.19);
}

struct Walker {
  double x, y, w, h;
};

enum class Template { Cross, NotCross, DiagonalCross, StopThenCross };

Template pick_template(std::mt19937_64& rng, const ScenarioConfig& cfg) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u = uni(rng);
  if (u < cfg.p_cross) return Template::Cross;
  if (u < cfg.p_cross + cfg.p_not_cross) return Template::NotCross;
  if (u < cfg.p_cross + cfg.p_not_cross + cfg.p_diagonal_cross)
    return Template::DiagonalCross;
  return Template::StopThenCross;
}

void emit(Track& t, std::int64_t frame, const Walker& wk, int action) {
  BBox b{quantize(wk.x), quantize(wk.y), std::max(quantize(wk.w), 1.0 / 1024.0),
         std::max(quantize(wk.h), 1.0 / 1024.0)};
  t.frames.push_back({frame, b, action});
}

Track make_clean_track(std::mt19937_64& rng, const ScenarioConfig& cfg,
                       const std::string& video_id, const std::string& track_id) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

  Track t;
  t.video_id = video_id;
  t.track_id = track_id;
  t.frame_rate = cfg.frame_rate;

  const Template tmpl = pick_template(rng, cfg);
  const bool from_left = uni(rng) < 0.5;
  const double dir = from_left ? 1.0 : -1.0;
  const double vx = uniform(0.004, 0.009);
  const double drift_y = uniform(-0.001, 0.001);

  Walker wk;
  wk.y = uniform(0.45, 0.70);
  wk.w = uniform(0.04, 0.07);
  wk.h = uniform(0.12, 0.20);
  const double growth = 1.0 + cfg.approach_rate;

  std::int64_t frame = 0;
  auto step_size = [&](double dx, double dy, int action) {
    wk.x += dx;
    wk.y = std::clamp(wk.y + dy, 0.05, 0.95);
    wk.w = std::min(wk.w * growth, 0.5);
    wk.h = std::min(wk.h * growth, 0.9);
    emit(t, frame++, wk, action);
  };

  switch (tmpl) {
    case Template::NotCross: {
      // walks along the sidewalk, never enters the road band
      wk.x = from_left ? uniform(0.08, 0.20) : uniform(0.80, 0.92);
      const double jitter = uniform(-0.0005, 0.0005);
      const double vy = uniform(-0.004, 0.004);
      const int len = static_cast<int>(uniform(40.0, 100.0));
      emit(t, frame++, wk, 0);
      for (int i = 1; i < len; ++i) step_size(jitter, vy, 0);
      break;
    }
    case Template::Cross:
    case Template::DiagonalCross: {
      wk.x = from_left ? uniform(0.10, 0.20) : uniform(0.80, 0.90);
      const double vy = tmpl == Template::DiagonalCross
                            ? (uni(rng) < 0.5 ? 1.0 : -1.0) * uniform(0.002, 0.004)
                            : drift_y;
      const double exit_x = from_left ? kBandHi : kBandLo;
      emit(t, frame++, wk, wk.x > kBandLo && wk.x < kBandHi ? 1 : 0);
      while ((from_left ? wk.x < exit_x : wk.x > exit_x) && frame < 400) {
        step_size(dir * vx, vy, 0);
        t.frames.back().action = wk.x > kBandLo && wk.x < kBandHi ? 1 : 0;
      }
      break;
    }
    case Template::StopThenCross: {
      // approach the curb, pause, then traverse; the label rises exactly
      // once, at the moment motion resumes
      wk.x = from_left ? uniform(0.08, 0.16) : uniform(0.84, 0.92);
      const double stop_x = from_left ? kBandLo - 0.01 : kBandHi + 0.01;
      const double exit_x = from_left ? kBandHi : kBandLo;
      const int stop_len = static_cast<int>(uniform(12.0, 22.0));
      emit(t, frame++, wk, 0);
      while ((from_left ? wk.x < stop_x : wk.x > stop_x) && frame < 400)
        step_size(dir * vx, drift_y, 0);
      for (int i = 0; i < stop_len; ++i) step_size(0.0, 0.0, 0);
      while ((from_left ? wk.x < exit_x : wk.x > exit_x) && frame < 800)
        step_size(dir * vx, drift_y, 1);
      break;
    }
  }
  return t;
}

Track perturb_track(std::mt19937_64& rng, const ScenarioConfig& cfg,
                    const Track& clean) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Track out;
  out.video_id = clean.video_id;
  out.track_id = clean.track_id;
  out.frame_rate = clean.frame_rate;
  for (const TrackFrame& f : clean.frames) {
    TrackFrame g = f;
    if (cfg.noise_sigma > 0.0) {
      g.bbox.x = quantize(clamp_center(g.bbox.x + cfg.noise_sigma * gauss(rng)));
      g.bbox.y = quantize(clamp_center(g.bbox.y + cfg.noise_sigma * gauss(rng)));
      g.bbox.w = std::max(
          quantize(g.bbox.w + 0.5 * cfg.noise_sigma * gauss(rng)), 1.0 / 1024.0);
      g.bbox.h = std::max(
          quantize(g.bbox.h + 0.5 * cfg.noise_sigma * gauss(rng)), 1.0 / 1024.0);
    }
    const bool drop = cfg.dropout_prob > 0.0 && uni(rng) < cfg.dropout_prob;
    if (!drop) out.frames.push_back(g);
  }
  if (out.frames.size() < 2) out.frames = clean.frames;
  return out;
}

}  // namespace

void ScenarioConfig::validate() const {
  const double total = p_cross + p_not_cross + p_diagonal_cross + p_stop_then_cross;
  if (std::fabs(total - 1.0) > 1e-9)
    throw ConfigError("behavior mix proportions sum to " + std::to_string(total) +
                      ", expected 1");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");
  for (double p : {dropout_prob, id_switch_prob})
    if (p < 0.0 || p > 1.0)
      throw ConfigError("scenario probabilities must lie in [0, 1]");
  if (num_tracks == 0 || num_videos == 0)
    throw ConfigError("num_tracks and num_videos must be positive");
  if (approach_rate < 0.0 || approach_rate > 0.05)
    throw ConfigError("approach_rate must lie in [0, 0.05]");
}

Corpus generate(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Corpus corpus;
  const std::size_t per_video =
      (cfg.num_tracks + cfg.num_videos - 1) / cfg.num_videos;
  for (std::size_t i = 0; i < cfg.num_tracks; ++i) {
    char vid[32], tid[32];
    std::snprintf(vid, sizeof vid, "vid%04zu", i / per_video);
    std::snprintf(tid, sizeof tid, "ped%05zu", i);
    Track clean = make_clean_track(rng, cfg, vid, tid);
    Track pert = perturb_track(rng, cfg, clean);

    if (cfg.id_switch_prob > 0.0 && uni(rng) < cfg.id_switch_prob &&
        pert.frames.size() >= 4) {
      std::uniform_int_distribution<std::size_t> cut(2, pert.frames.size() - 2);
      const std::size_t split = cut(rng);
      Track a = pert, b = pert;
      a.track_id = pert.track_id + "#a";
      a.frames.assign(pert.frames.begin(),
                      pert.frames.begin() + static_cast<std::ptrdiff_t>(split));
      b.track_id = pert.track_id + "#b";
      b.frames.assign(pert.frames.begin() + static_cast<std::ptrdiff_t>(split),
                      pert.frames.end());
      corpus.perturbed.push_back(std::move(a));
      corpus.perturbed.push_back(std::move(b));
    } else {
      corpus.perturbed.push_back(std::move(pert));
    }
    corpus.clean.push_back(std::move(clean));
  }
  for (const Track& t : corpus.clean) seqdata::validate_track(t);
  for (const Track& t : corpus.perturbed) seqdata::validate_track(t);
  return corpus;
}

models::Forecast constant_velocity_baseline(const seqdata::ObservationWindow& window) {
  models::Forecast fc;
  const seqdata::SpeedVec last = window.speeds.back();
  const int last_action = window.observed_actions.back();
  const std::size_t horizon = window.predict_len();
  for (std::size_t t = 0; t < horizon; ++t) {
    fc.speed_seq.push_back(last);
    fc.action_probs.push_back(static_cast<double>(last_action));
    fc.action_labels.push_back(last_action);
  }
  fc.position_seq = seqdata::reconstruct_positions(window.positions.back(), fc.speed_seq);
  return fc;
}

}  // namespace pedcast::synth
