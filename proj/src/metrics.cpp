#include "pedcast/metrics.hpp"

#include <cmath>
#include <sstream>

namespace pedcast::metrics {

using seqdata::BBox;

void ConfusionCounts::add(int predicted, int truth) {
  if (truth == 1)
    predicted == 1 ? ++tp : ++fn;
  else
    predicted == 1 ? ++fp : ++tn;
}

namespace {

double center_displacement(const BBox& a, const BBox& b, const ImageSize& img) {
  const double dx = (a.x - b.x) * img.width;
  const double dy = (a.y - b.y) * img.height;
  return std::sqrt(dx * dx + dy * dy);
}

void require_lengths(std::size_t pred, std::size_t gt, const char* what) {
  if (pred != gt || pred == 0)
    throw ContractError(std::string(what) + ": sequence lengths " +
                        std::to_string(pred) + " vs " + std::to_string(gt) +
                        " (need equal, >= 1)");
}

}  // namespace

double ade(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
           const ImageSize& img) {
  require_lengths(pred.size(), gt.size(), "ade");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += center_displacement(pred[i], gt[i], img);
  return sum / static_cast<double>(pred.size());
}

double fde(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
           const ImageSize& img) {
  require_lengths(pred.size(), gt.size(), "fde");
  return center_displacement(pred.back(), gt.back(), img);
}

double accuracy(const std::vector<int>& pred_labels,
                const std::vector<int>& gt_labels, ConfusionCounts& counts) {
  require_lengths(pred_labels.size(), gt_labels.size(), "accuracy");
  for (std::size_t i = 0; i < pred_labels.size(); ++i)
    counts.add(pred_labels[i], gt_labels[i]);
  return static_cast<double>(counts.tp + counts.tn) /
         static_cast<double>(counts.total());
}

Aggregator::Aggregator(std::size_t horizon, ImageSize img)
    : horizon_(horizon), img_(img), step_disp_sum_(horizon, 0.0),
      fde_sum_(1, 0.0), step_counts_(horizon) {
  if (horizon == 0) throw ContractError("Aggregator: horizon must be >= 1");
}

void Aggregator::add(const models::Forecast& fc,
                     const seqdata::ObservationWindow& window) {
  if (fc.position_seq.size() < horizon_ || window.target_positions.size() < horizon_)
    throw ContractError("Aggregator: forecast/window shorter than horizon " +
                        std::to_string(horizon_));
  for (std::size_t t = 0; t < horizon_; ++t) {
    step_disp_sum_[t] +=
        center_displacement(fc.position_seq[t], window.target_positions[t], img_);
    step_counts_[t].add(fc.action_labels[t], window.target_actions[t]);
    wh_err_sum_ +=
        0.5 * (std::fabs(fc.position_seq[t].w - window.target_positions[t].w) *
                   img_.width +
               std::fabs(fc.position_seq[t].h - window.target_positions[t].h) *
                   img_.height);
    ++wh_err_n_;
  }
  fde_sum_[0] += center_displacement(fc.position_seq[horizon_ - 1],
                                     window.target_positions[horizon_ - 1], img_);
  ++windows_;
}

EvalReport Aggregator::report() const {
  if (windows_ == 0) throw ContractError("Aggregator: no windows scored");
  EvalReport r;
  r.image_size = img_;
  const double inv_w = 1.0 / static_cast<double>(windows_);
  double ade_sum = 0.0;
  for (std::size_t t = 0; t < horizon_; ++t) {
    r.per_step_ade.push_back(step_disp_sum_[t] * inv_w);
    ade_sum += r.per_step_ade.back();
    const ConfusionCounts& c = step_counts_[t];
    r.per_step_accuracy.push_back(static_cast<double>(c.tp + c.tn) /
                                  static_cast<double>(c.total()));
    r.counts.tp += c.tp;
    r.counts.tn += c.tn;
    r.counts.fp += c.fp;
    r.counts.fn += c.fn;
  }
  r.ade = ade_sum / static_cast<double>(horizon_);
  r.fde = fde_sum_[0] * inv_w;
  r.accuracy = static_cast<double>(r.counts.tp + r.counts.tn) /
               static_cast<double>(r.counts.total());
  r.mean_wh_error = wh_err_n_ ? wh_err_sum_ / static_cast<double>(wh_err_n_) : 0.0;
  return r;
}

EvalReport horizon_sweep(const models::ModelConfig& cfg,
                         const ad::ParameterSet& params,
                         const std::vector<seqdata::ObservationWindow>& windows,
                         std::size_t t_max, const ImageSize& img) {
  if (t_max == 0 || t_max > cfg.predict_len)
    throw ContractError("horizon_sweep: t_max must lie in [1, model horizon]");
  Aggregator agg(t_max, img);
  for (const auto& w : windows)
    agg.add(models::decode_autoregressive(cfg, params, w, t_max), w);
  return agg.report();
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "ADE (px)    " << ade << "\n"
     << "FDE (px)    " << fde << "\n"
     << "Accuracy    " << accuracy << "\n"
     << "TP/TN/FP/FN " << counts.tp << "/" << counts.tn << "/" << counts.fp
     << "/" << counts.fn << "\n"
     << "WH err (px) " << mean_wh_error << "\n";
  return os.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "step,ade_px,accuracy\n";
  for (std::size_t t = 0; t < per_step_ade.size(); ++t)
    os << (t + 1) << "," << per_step_ade[t] << "," << per_step_accuracy[t] << "\n";
  return os.str();
}

}  // namespace pedcast::metrics
