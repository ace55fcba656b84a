#include "pedcast/seqdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pedcast::seqdata {

void WindowSpec::validate() const {
  if (observe_len < 1 || predict_len < 1 || stride < 1)
    throw ConfigError("window spec requires O >= 1, T >= 1, stride >= 1");
}

void validate_bbox(const BBox& b) {
  if (!(b.w > 0.0) || !(b.h > 0.0))
    throw DataError("bbox width/height must be positive, got w=" +
                    std::to_string(b.w) + " h=" + std::to_string(b.h));
  if (b.x < -0.2 || b.x > 1.2 || b.y < -0.2 || b.y > 1.2)
    throw DataError("bbox center (" + std::to_string(b.x) + ", " +
                    std::to_string(b.y) + ") outside [-0.2, 1.2]");
}

void validate_speed(const SpeedVec& s) {
  for (double v : {s.dx, s.dy, s.dw, s.dh})
    if (!(std::fabs(v) < 1.0))
      throw DataError("speed component " + std::to_string(v) +
                      " exceeds one frame width; track data is corrupt");
}

void validate_track(const Track& t) {
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    validate_bbox(t.frames[i].bbox);
    if (t.frames[i].action != 0 && t.frames[i].action != 1)
      throw DataError("track '" + t.track_id + "' has non-binary action label");
    if (i > 0 && t.frames[i].frame <= t.frames[i - 1].frame)
      throw DataError("track '" + t.track_id + "' frame indices not strictly increasing");
  }
}

std::vector<AlignedSegment> compute_speeds(const Track& track, bool split_gaps) {
  validate_track(track);
  std::vector<AlignedSegment> segments;
  if (track.frames.size() < 2) return segments;
  AlignedSegment current{track.video_id, track.track_id, {}};
  for (std::size_t i = 1; i < track.frames.size(); ++i) {
    const TrackFrame& prev = track.frames[i - 1];
    const TrackFrame& cur = track.frames[i];
    if (cur.frame != prev.frame + 1) {
      if (!split_gaps)
        throw DataError("track '" + track.track_id + "' has a frame gap at " +
                        std::to_string(prev.frame) + " -> " +
                        std::to_string(cur.frame));
      if (!current.frames.empty()) {
        segments.push_back(std::move(current));
        current = AlignedSegment{track.video_id, track.track_id, {}};
      }
      continue;
    }
    SpeedVec s{cur.bbox.x - prev.bbox.x, cur.bbox.y - prev.bbox.y,
               cur.bbox.w - prev.bbox.w, cur.bbox.h - prev.bbox.h};
    validate_speed(s);
    current.frames.push_back({cur.frame, cur.bbox, s, cur.action});
  }
  if (!current.frames.empty()) segments.push_back(std::move(current));
  return segments;
}

std::vector<ObservationWindow> make_windows(const AlignedSegment& segment,
                                            const WindowSpec& spec) {
  spec.validate();
  const std::size_t need = spec.observe_len + spec.predict_len;
  std::vector<ObservationWindow> out;
  if (segment.frames.size() < need) return out;
  for (std::size_t start = 0; start + need <= segment.frames.size();
       start += spec.stride) {
    ObservationWindow w;
    w.video_id = segment.video_id;
    w.track_id = segment.track_id;
    w.start_frame = segment.frames[start].frame;
    for (std::size_t i = 0; i < spec.observe_len; ++i) {
      const AlignedFrame& f = segment.frames[start + i];
      w.positions.push_back(f.bbox);
      w.speeds.push_back(f.speed);
      w.observed_actions.push_back(f.action);
    }
    for (std::size_t i = 0; i < spec.predict_len; ++i) {
      const AlignedFrame& f = segment.frames[start + spec.observe_len + i];
      w.target_speeds.push_back(f.speed);
      w.target_actions.push_back(f.action);
    }
    w.target_positions = reconstruct_positions(w.positions.back(), w.target_speeds);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<ObservationWindow> make_windows(const std::vector<Track>& tracks,
                                            const WindowSpec& spec) {
  std::vector<ObservationWindow> out;
  for (const Track& t : tracks)
    for (const AlignedSegment& seg : compute_speeds(t)) {
      auto ws = make_windows(seg, spec);
      out.insert(out.end(), std::make_move_iterator(ws.begin()),
                 std::make_move_iterator(ws.end()));
    }
  return out;
}

DatasetSplit split_dataset(const std::vector<ObservationWindow>& windows,
                           double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed) {
  if (train_ratio < 0.0 || val_ratio < 0.0 || test_ratio < 0.0 ||
      std::fabs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  std::vector<std::string> videos;
  {
    std::set<std::string> seen;
    for (const auto& w : windows)
      if (seen.insert(w.video_id).second) videos.push_back(w.video_id);
  }
  std::sort(videos.begin(), videos.end());
  std::mt19937_64 rng(seed);
  std::shuffle(videos.begin(), videos.end(), rng);

  const std::size_t n = videos.size();
  std::size_t nonempty = 0;
  for (double r : {train_ratio, val_ratio, test_ratio})
    if (r > 0.0) ++nonempty;
  if (n < nonempty)
    throw DataError("cannot split " + std::to_string(n) + " videos into " +
                    std::to_string(nonempty) + " non-empty partitions");

  const auto cut1 = static_cast<std::size_t>(
      std::llround(train_ratio * static_cast<double>(n)));
  const auto cut2 = static_cast<std::size_t>(
      std::llround((train_ratio + val_ratio) * static_cast<double>(n)));
  std::map<std::string, int> partition;
  for (std::size_t i = 0; i < n; ++i)
    partition[videos[i]] = i < cut1 ? 0 : (i < cut2 ? 1 : 2);

  DatasetSplit split;
  for (const auto& w : windows) {
    switch (partition.at(w.video_id)) {
      case 0: split.train.push_back(w); break;
      case 1: split.val.push_back(w); break;
      default: split.test.push_back(w); break;
    }
  }
  return split;
}

std::vector<BBox> reconstruct_positions(const BBox& last_observed,
                                        const std::vector<SpeedVec>& speeds) {
  std::vector<BBox> out;
  out.reserve(speeds.size());
  BBox p = last_observed;
  for (const SpeedVec& s : speeds) {
    p.x += s.dx;
    p.y += s.dy;
    p.w += s.dw;
    p.h += s.dh;
    out.push_back(p);
  }
  return out;
}

static constexpr const char* kTrackHeader = "#pedcast-tracks v1";

std::vector<Track> load_tracks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open track file: " + path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != kTrackHeader)
    throw ParseError(path + ":1: missing header '" + std::string(kTrackHeader) + "'");
  lineno = 1;

  std::vector<Track> tracks;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen_frames;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      const std::string video = rec.at("video_id").get<std::string>();
      const std::string tid = rec.at("track_id").get<std::string>();
      const auto frame = rec.at("frame").get<std::int64_t>();
      TrackFrame tf;
      tf.frame = frame;
      tf.bbox = {rec.at("x").get<double>(), rec.at("y").get<double>(),
                 rec.at("w").get<double>(), rec.at("h").get<double>()};
      tf.action = rec.at("action").get<int>();
      if (!seen_frames.insert({video, tid, frame}).second)
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": duplicate frame " + std::to_string(frame) +
                        " for track '" + tid + "'");
      auto key = std::make_pair(video, tid);
      auto it = index.find(key);
      if (it == index.end()) {
        Track t;
        t.video_id = video;
        t.track_id = tid;
        if (rec.contains("fps")) t.frame_rate = rec.at("fps").get<double>();
        index.emplace(key, tracks.size());
        tracks.push_back(std::move(t));
        it = index.find(key);
      }
      tracks[it->second].frames.push_back(tf);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (Track& t : tracks) {
    std::sort(t.frames.begin(), t.frames.end(),
              [](const TrackFrame& a, const TrackFrame& b) { return a.frame < b.frame; });
    validate_track(t);
  }
  return tracks;
}

void save_tracks(const std::vector<Track>& tracks, const std::string& path) {
  std::vector<const Track*> ordered;
  ordered.reserve(tracks.size());
  for (const Track& t : tracks) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(), [](const Track* a, const Track* b) {
    return std::tie(a->video_id, a->track_id) < std::tie(b->video_id, b->track_id);
  });
  std::ofstream out(path);
  if (!out) throw DataError("cannot write track file: " + path);
  out << kTrackHeader << "\n";
  for (const Track* t : ordered) {
    for (const TrackFrame& f : t->frames) {
      nlohmann::json rec;
      rec["video_id"] = t->video_id;
      rec["track_id"] = t->track_id;
      rec["frame"] = f.frame;
      rec["x"] = f.bbox.x;
      rec["y"] = f.bbox.y;
      rec["w"] = f.bbox.w;
      rec["h"] = f.bbox.h;
      rec["action"] = f.action;
      if (t->frame_rate != 30.0) rec["fps"] = t->frame_rate;
      out << rec.dump() << "\n";
    }
  }
  if (!out) throw DataError("write error on track file: " + path);
}

}  // namespace pedcast::seqdata
