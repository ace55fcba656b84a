#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedcast/seqdata.hpp"
#include "pedcast/tape.hpp"

namespace pedcast::models {

enum class ModelKind { TF_ed, LSTM_ed };

// Speeds are tiny in normalized units (~1e-3 per frame). The models
// consume and emit speeds multiplied by this factor so the regression
// target is O(1); decode_autoregressive converts back to raw units.
inline constexpr double kSpeedScale = 100.0;

std::string kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::TF_ed;
  std::size_t embed_dim = 256;
  std::size_t num_layers = 3;
  std::size_t num_heads = 8;   // TF only
  std::size_t ff_dim = 512;    // TF only
  std::size_t observe_len = 16;
  std::size_t predict_len = 16;

  void validate() const;
  std::size_t head_dim() const { return embed_dim / num_heads; }
};

struct Forecast {
  std::vector<seqdata::SpeedVec> speed_seq;
  std::vector<seqdata::BBox> position_seq;
  std::vector<double> action_probs;
  std::vector<int> action_labels;  // prob >= 0.5 counts as crossing
};

struct ModelOutput {
  ad::TensorPtr speed_out;      // [T x 4]
  ad::TensorPtr action_logits;  // [T]
};

struct AttentionInputs {
  ad::TensorPtr q, k, v;
  ad::TensorPtr mask_bias;  // optional [len_q x len_kv], 0 or -1e9, constant
  std::size_t d_k = 0;      // scaling dimension; 0 means cols of q
};

// Sinusoidal positional encoding: sin(t / 10000^(d/D)) on even d,
// cos(t / 10000^((d-1)/D)) on odd d. Constant, no gradient.
ad::TensorPtr positional_encoding(std::size_t seq_len, std::size_t embed_dim);

// Additive mask bias for causal self-attention (strictly upper
// triangle masked).
ad::TensorPtr causal_mask_bias(std::size_t len);

// softmax(q k^T / sqrt(d_k) + mask) v
ad::TensorPtr attention(ad::Tape& tape, const AttentionInputs& in);

ad::ParameterSet init_params(const ModelConfig& cfg, std::uint64_t seed);

// Walks the canonical (name, shape) parameter layout of a config in
// checkpoint order.
void for_each_param_shape(
    const ModelConfig& cfg,
    const std::function<void(const std::string&, const std::vector<std::size_t>&)>& fn);

// Teacher-forcing target input: the learned start token followed by the
// first T-1 ground-truth target speeds.
ad::TensorPtr make_shifted_targets(ad::Tape& tape,
                                   const seqdata::ObservationWindow& window,
                                   const ad::ParameterSet& params);

ModelOutput tf_forward(ad::Tape& tape, const seqdata::ObservationWindow& window,
                       const ad::TensorPtr& target_inputs, const ModelConfig& cfg,
                       const ad::ParameterSet& params);

ModelOutput lstm_forward(ad::Tape& tape, const seqdata::ObservationWindow& window,
                         const ModelConfig& cfg, const ad::ParameterSet& params);

// Teacher-forced (TF-ed) or unrolled (LSTM-ed) training forward.
ModelOutput forward(ad::Tape& tape, const seqdata::ObservationWindow& window,
                    const ModelConfig& cfg, const ad::ParameterSet& params);

// Evaluation-mode inference; TF-ed feeds its own predictions back step
// by step, LSTM-ed is autoregressive by construction.
Forecast decode_autoregressive(const ModelConfig& cfg,
                               const ad::ParameterSet& params,
                               const seqdata::ObservationWindow& window,
                               std::size_t horizon);

}  // namespace pedcast::models
