#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "pedcast/synth.hpp"

using namespace pedcast;
using synth::ScenarioConfig;

namespace {

bool on_lattice(double v) {
  const double scaled = v * 1048576.0;
  return scaled == std::round(scaled);
}

}  // namespace

TEST_CASE("generate: clean corpus has the requested shape and valid boxes") {
  ScenarioConfig cfg;
  cfg.seed = 3;
  cfg.num_tracks = 40;
  cfg.num_videos = 5;
  auto corpus = synth::generate(cfg);
  CHECK(corpus.clean.size() == 40);
  std::set<std::string> videos, ids;
  for (const auto& t : corpus.clean) {
    videos.insert(t.video_id);
    ids.insert(t.video_id + "/" + t.track_id);
    CHECK(t.frames.size() >= 2);
    for (const auto& f : t.frames) {
      CHECK_NOTHROW(seqdata::validate_bbox(f.bbox));
      CHECK(on_lattice(f.bbox.x));
      CHECK(on_lattice(f.bbox.y));
      CHECK(on_lattice(f.bbox.w));
      CHECK(on_lattice(f.bbox.h));
      CHECK((f.action == 0 || f.action == 1));
    }
    for (std::size_t i = 1; i < t.frames.size(); ++i)
      CHECK(t.frames[i].frame == t.frames[i - 1].frame + 1);
  }
  CHECK(videos.size() == 5);
  CHECK(ids.size() == 40);
}

TEST_CASE("generate: identity perturbation leaves tracks equal to clean") {
  ScenarioConfig cfg;
  cfg.seed = 5;
  cfg.num_tracks = 15;
  cfg.num_videos = 3;
  auto corpus = synth::generate(cfg);
  REQUIRE(corpus.perturbed.size() == corpus.clean.size());
  for (std::size_t i = 0; i < corpus.clean.size(); ++i) {
    const auto& a = corpus.clean[i];
    const auto& b = corpus.perturbed[i];
    CHECK(a.track_id == b.track_id);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t j = 0; j < a.frames.size(); ++j) {
      CHECK(a.frames[j].bbox.x == b.frames[j].bbox.x);
      CHECK(a.frames[j].bbox.h == b.frames[j].bbox.h);
      CHECK(a.frames[j].action == b.frames[j].action);
    }
  }
}

TEST_CASE("generate: same seed reproduces the corpus exactly") {
  ScenarioConfig cfg;
  cfg.seed = 11;
  cfg.num_tracks = 25;
  cfg.num_videos = 4;
  cfg.noise_sigma = 0.003;
  cfg.dropout_prob = 0.05;
  cfg.id_switch_prob = 0.2;
  auto c1 = synth::generate(cfg);
  auto c2 = synth::generate(cfg);
  REQUIRE(c1.perturbed.size() == c2.perturbed.size());
  for (std::size_t i = 0; i < c1.perturbed.size(); ++i) {
    const auto& a = c1.perturbed[i];
    const auto& b = c2.perturbed[i];
    CHECK(a.track_id == b.track_id);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t j = 0; j < a.frames.size(); ++j) {
      CHECK(a.frames[j].frame == b.frames[j].frame);
      CHECK(a.frames[j].bbox.x == b.frames[j].bbox.x);
      CHECK(a.frames[j].bbox.y == b.frames[j].bbox.y);
    }
  }
  cfg.seed = 12;
  auto c3 = synth::generate(cfg);
  bool differs = c3.perturbed.size() != c1.perturbed.size();
  for (std::size_t i = 0; !differs && i < c1.perturbed.size(); ++i)
    differs = c1.perturbed[i].frames.size() != c3.perturbed[i].frames.size() ||
              c1.perturbed[i].frames[0].bbox.x != c3.perturbed[i].frames[0].bbox.x;
  CHECK(differs);
}

TEST_CASE("generate: crossing labels form at most one rising edge") {
  ScenarioConfig cfg;
  cfg.seed = 7;
  cfg.num_tracks = 120;
  cfg.num_videos = 6;
  auto corpus = synth::generate(cfg);
  std::size_t with_crossing = 0, without = 0;
  for (const auto& t : corpus.clean) {
    int rises = 0, falls = 0;
    for (std::size_t i = 1; i < t.frames.size(); ++i) {
      if (t.frames[i].action == 1 && t.frames[i - 1].action == 0) ++rises;
      if (t.frames[i].action == 0 && t.frames[i - 1].action == 1) ++falls;
    }
    CHECK(rises <= 1);
    CHECK(falls <= 1);
    bool any = false;
    for (const auto& f : t.frames) any = any || f.action == 1;
    (any ? with_crossing : without) += 1;
  }
  // the behavior mix must actually produce both classes
  CHECK(with_crossing > 20);
  CHECK(without > 20);
}

TEST_CASE("generate: noise stays near the clean track and on the lattice") {
  ScenarioConfig cfg;
  cfg.seed = 13;
  cfg.num_tracks = 20;
  cfg.num_videos = 2;
  cfg.noise_sigma = 0.002;
  auto corpus = synth::generate(cfg);
  double max_dev = 0.0;
  for (std::size_t i = 0; i < corpus.clean.size(); ++i) {
    const auto& clean = corpus.clean[i];
    const auto& noisy = corpus.perturbed[i];
    REQUIRE(noisy.frames.size() == clean.frames.size());
    for (std::size_t j = 0; j < clean.frames.size(); ++j) {
      CHECK(on_lattice(noisy.frames[j].bbox.x));
      max_dev = std::max(max_dev,
                         std::fabs(noisy.frames[j].bbox.x - clean.frames[j].bbox.x));
    }
  }
  CHECK(max_dev > 0.0);
  CHECK(max_dev < 0.002 * 6);  // ~6 sigma
}

TEST_CASE("generate: certain id switch splits every long track in two") {
  ScenarioConfig cfg;
  cfg.seed = 17;
  cfg.num_tracks = 10;
  cfg.num_videos = 2;
  cfg.id_switch_prob = 1.0;
  auto corpus = synth::generate(cfg);
  CHECK(corpus.clean.size() == 10);
  CHECK(corpus.perturbed.size() == 20);
  std::size_t clean_frames = 0, pert_frames = 0;
  for (const auto& t : corpus.clean) clean_frames += t.frames.size();
  for (const auto& t : corpus.perturbed) {
    pert_frames += t.frames.size();
    CHECK((t.track_id.find("#a") != std::string::npos ||
           t.track_id.find("#b") != std::string::npos));
  }
  CHECK(pert_frames == clean_frames);
}

TEST_CASE("generate: dropout removes frames but never below two") {
  ScenarioConfig cfg;
  cfg.seed = 19;
  cfg.num_tracks = 30;
  cfg.num_videos = 3;
  cfg.dropout_prob = 0.3;
  auto corpus = synth::generate(cfg);
  std::size_t clean_frames = 0, pert_frames = 0;
  for (const auto& t : corpus.clean) clean_frames += t.frames.size();
  for (const auto& t : corpus.perturbed) {
    pert_frames += t.frames.size();
    CHECK(t.frames.size() >= 2);
  }
  CHECK(pert_frames < clean_frames);
}

TEST_CASE("scenario config validation") {
  ScenarioConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p_cross = 0.9;  // mix no longer sums to 1
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ScenarioConfig{};
  cfg.noise_sigma = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ScenarioConfig{};
  cfg.dropout_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ScenarioConfig{};
  cfg.num_tracks = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("constant velocity baseline repeats the last speed and action") {
  seqdata::ObservationWindow w;
  for (int i = 0; i < 4; ++i) {
    w.positions.push_back({0.2 + 0.01 * i, 0.5, 0.05, 0.1});
    w.speeds.push_back({0.01, 0.0, 0.0, 0.0});
    w.observed_actions.push_back(i == 3 ? 1 : 0);
  }
  w.speeds.back() = {0.02, -0.01, 0.001, 0.0};
  for (int i = 0; i < 3; ++i) {
    w.target_speeds.push_back({0.0, 0.0, 0.0, 0.0});
    w.target_actions.push_back(0);
  }
  w.target_positions = seqdata::reconstruct_positions(w.positions.back(),
                                                      w.target_speeds);
  auto fc = synth::constant_velocity_baseline(w);
  REQUIRE(fc.speed_seq.size() == 3);
  for (const auto& s : fc.speed_seq) {
    CHECK(s.dx == 0.02);
    CHECK(s.dy == -0.01);
    CHECK(s.dw == 0.001);
  }
  for (int lbl : fc.action_labels) CHECK(lbl == 1);
  CHECK(fc.position_seq[0].x == doctest::Approx(w.positions.back().x + 0.02));
  CHECK(fc.position_seq[2].x == doctest::Approx(w.positions.back().x + 0.06));
}

TEST_CASE("generated corpus plus window pipeline yields training data") {
  ScenarioConfig cfg;
  cfg.seed = 23;
  cfg.num_tracks = 60;
  cfg.num_videos = 6;
  auto corpus = synth::generate(cfg);
  seqdata::WindowSpec spec;
  spec.observe_len = 16;
  spec.predict_len = 16;
  auto windows = seqdata::make_windows(corpus.clean, spec);
  CHECK(windows.size() > 100);
  std::size_t crossing_steps = 0, total_steps = 0;
  for (const auto& w : windows)
    for (int a : w.target_actions) {
      total_steps += 1;
      crossing_steps += static_cast<std::size_t>(a);
    }
  // both classes present in targets
  CHECK(crossing_steps > 0);
  CHECK(crossing_steps < total_steps);
}
