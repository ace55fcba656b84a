#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedcast/errors.hpp"

namespace pedcast::seqdata {

// Normalized bounding-box center state of one pedestrian at one frame.
struct BBox {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
};

// Per-frame bbox delta between consecutive frames.
struct SpeedVec {
  double dx = 0.0, dy = 0.0, dw = 0.0, dh = 0.0;
};

// 0 = not crossing, 1 = crossing.
using ActionLabel = int;

struct TrackFrame {
  std::int64_t frame = 0;
  BBox bbox;
  ActionLabel action = 0;
};

struct Track {
  std::string video_id;
  std::string track_id;
  double frame_rate = 30.0;
  std::vector<TrackFrame> frames;
};

// One frame with its derived speed (speed from the preceding frame).
struct AlignedFrame {
  std::int64_t frame = 0;
  BBox bbox;
  SpeedVec speed;
  ActionLabel action = 0;
};

// Contiguous gap-free run of aligned frames from one track.
struct AlignedSegment {
  std::string video_id;
  std::string track_id;
  std::vector<AlignedFrame> frames;
};

struct WindowSpec {
  std::size_t observe_len = 16;  // O
  std::size_t predict_len = 16;  // T
  std::size_t stride = 1;

  void validate() const;
};

struct ObservationWindow {
  std::vector<BBox> positions;          // length O
  std::vector<SpeedVec> speeds;         // length O, aligned
  std::vector<ActionLabel> observed_actions;  // length O
  std::vector<SpeedVec> target_speeds;       // length T
  std::vector<BBox> target_positions;        // length T
  std::vector<ActionLabel> target_actions;   // length T
  std::string video_id;
  std::string track_id;
  std::int64_t start_frame = 0;

  std::size_t observe_len() const { return positions.size(); }
  std::size_t predict_len() const { return target_speeds.size(); }
};

void validate_bbox(const BBox& b);
void validate_speed(const SpeedVec& s);
void validate_track(const Track& t);

// Derives per-frame speeds; the first frame of each run is dropped. A
// frame gap splits the track into independent segments when split_gaps
// is true, otherwise a gap is a data error.
std::vector<AlignedSegment> compute_speeds(const Track& track,
                                           bool split_gaps = true);

// Sliding windows at offsets 0, stride, 2*stride, ... with O+T aligned
// frames each. target_positions are the cumulative reconstruction from
// the last observed bbox, which on lattice-exact data coincides with the
// raw track positions.
std::vector<ObservationWindow> make_windows(const AlignedSegment& segment,
                                            const WindowSpec& spec);
std::vector<ObservationWindow> make_windows(const std::vector<Track>& tracks,
                                            const WindowSpec& spec);

struct DatasetSplit {
  std::vector<ObservationWindow> train, val, test;
};

// Video-level split: all windows of one video land in one partition.
DatasetSplit split_dataset(const std::vector<ObservationWindow>& windows,
                           double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed);

std::vector<BBox> reconstruct_positions(const BBox& last_observed,
                                        const std::vector<SpeedVec>& speeds);

// Line-delimited track file with mandatory "#pedcast-tracks v1" header;
// one JSON object per line, sorted by (video_id, track_id, frame).
std::vector<Track> load_tracks(const std::string& path);
void save_tracks(const std::vector<Track>& tracks, const std::string& path);

}  // namespace pedcast::seqdata
