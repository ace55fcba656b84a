#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedcast/models.hpp"
#include "pedcast/seqdata.hpp"

namespace pedcast::metrics {

struct ImageSize {
  double width = 1920.0;
  double height = 1080.0;
};

struct ConfusionCounts {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::int64_t total() const { return tp + tn + fp + fn; }
  void add(int predicted, int truth);
};

struct EvalReport {
  double ade = 0.0;
  double fde = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_step_ade;
  std::vector<double> per_step_accuracy;
  ConfusionCounts counts;
  ImageSize image_size;
  // mean absolute w/h error in pixels, reported as a diagnostic
  double mean_wh_error = 0.0;

  std::string to_table() const;
  std::string to_csv() const;
};

// Mean Euclidean displacement of predicted vs ground-truth box centers,
// in pixels.
double ade(const std::vector<seqdata::BBox>& pred,
           const std::vector<seqdata::BBox>& gt, const ImageSize& img);

// Displacement of the final step only, in pixels.
double fde(const std::vector<seqdata::BBox>& pred,
           const std::vector<seqdata::BBox>& gt, const ImageSize& img);

double accuracy(const std::vector<int>& pred_labels,
                const std::vector<int>& gt_labels, ConfusionCounts& counts);

// Aggregates a forecast per window: per-window ADE values are averaged
// with equal weight across windows.
class Aggregator {
 public:
  Aggregator(std::size_t horizon, ImageSize img);
  void add(const models::Forecast& fc, const seqdata::ObservationWindow& window);
  EvalReport report() const;

 private:
  std::size_t horizon_;
  ImageSize img_;
  std::size_t windows_ = 0;
  std::vector<double> step_disp_sum_;   // per step, summed over windows
  std::vector<double> fde_sum_;
  std::vector<ConfusionCounts> step_counts_;
  double wh_err_sum_ = 0.0;
  std::size_t wh_err_n_ = 0;
};

// Per-step ADE / accuracy curves for horizons 1..t_max using the model's
// autoregressive decoding, aggregated across windows.
EvalReport horizon_sweep(const models::ModelConfig& cfg,
                         const ad::ParameterSet& params,
                         const std::vector<seqdata::ObservationWindow>& windows,
                         std::size_t t_max, const ImageSize& img);

}  // namespace pedcast::metrics
