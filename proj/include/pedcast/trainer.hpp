#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedcast/adam.hpp"
#include "pedcast/metrics.hpp"
#include "pedcast/models.hpp"

namespace pedcast::trainer {

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  std::size_t epochs = 100;
  double loss_weight_lambda = 1.0;  // BCE weight against MSE
  std::uint64_t seed = 0;
  std::string checkpoint_dir;  // empty: no checkpoints written
  std::size_t eval_every = 10;
  bool resume = false;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_ade = -1.0;       // -1 when not evaluated this epoch
  double val_accuracy = -1.0;
  double wall_time_s = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;
  std::string to_csv() const;
  void save(const std::string& path) const;
};

// MSE over predicted speeds plus lambda * BCE over action logits, each
// term averaged over its own elements.
ad::TensorPtr multitask_loss(ad::Tape& tape, const ad::TensorPtr& speed_out,
                             const ad::TensorPtr& action_logits,
                             const seqdata::ObservationWindow& window,
                             double lambda);

struct TrainResult {
  ad::ParameterSet params;
  TrainLog log;
  std::size_t epochs_run = 0;
};

TrainResult train(const models::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<seqdata::ObservationWindow>& train_set,
                  const std::vector<seqdata::ObservationWindow>& val_set);

// Autoregressive decoding of every window, aggregated by the metrics
// module. Order-independent.
metrics::EvalReport evaluate(const models::ModelConfig& cfg,
                             const ad::ParameterSet& params,
                             const std::vector<seqdata::ObservationWindow>& test_set,
                             const metrics::ImageSize& img);

// Training-state sidecar next to a checkpoint (Adam moments + epoch),
// written as "<checkpoint>.train".
void save_train_state(const std::string& path, const ad::AdamState& state,
                      std::size_t epochs_completed, double best_val_loss);
bool load_train_state(const std::string& path, ad::AdamState& state,
                      std::size_t& epochs_completed, double& best_val_loss);

}  // namespace pedcast::trainer
