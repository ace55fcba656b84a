#pragma once

#include <functional>
#include <vector>

#include "pedcast/tensor.hpp"

namespace pedcast::ad {

struct LstmCellParams {
  TensorPtr w_xi, w_hi, b_i;
  TensorPtr w_xf, w_hf, b_f;
  TensorPtr w_xo, w_ho, b_o;
  TensorPtr w_xc, w_hc, b_c;
};

struct LstmState {
  TensorPtr h;
  TensorPtr c;
};

// Records one forward computation and replays it in reverse for
// gradients. A tape is confined to one thread; rebuild it for every
// forward pass and clear() once gradients have been harvested.
class Tape {
 public:
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  // a [m x k] * b[n x k]^T -> [m x n]
  TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);

  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);  // hadamard
  // a [m x n] + row vector b [n] broadcast over rows
  TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b);
  TensorPtr scale(const TensorPtr& a, double s);

  TensorPtr tanh_op(const TensorPtr& a);
  TensorPtr sigmoid(const TensorPtr& a);
  TensorPtr relu(const TensorPtr& a);
  TensorPtr softmax_rows(const TensorPtr& a);
  // Row-wise layer normalization with learned gain/bias of length cols.
  TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                       const TensorPtr& bias, double eps = 1e-5);

  TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
  TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
  TensorPtr slice_rows(const TensorPtr& a, std::size_t start, std::size_t len);
  TensorPtr slice_cols(const TensorPtr& a, std::size_t start, std::size_t len);
  TensorPtr reshape(const TensorPtr& a, std::vector<std::size_t> shape);

  TensorPtr sum(const TensorPtr& a);
  TensorPtr mean(const TensorPtr& a);

  // mean((pred - target)^2); target is treated as a constant.
  TensorPtr mse(const TensorPtr& pred, const std::vector<double>& target);
  // mean over logits of the numerically stable binary cross-entropy
  // between sigmoid(logit) and the 0/1 label.
  TensorPtr bce_with_logits(const TensorPtr& logits,
                            const std::vector<double>& labels);

  // Fused LSTM cell: gates via sigmoid, candidate via tanh,
  // c = f*c_prev + i*cand, h = o*tanh(c). One tape node.
  LstmState lstm_cell(const TensorPtr& x, const TensorPtr& h_prev,
                      const TensorPtr& c_prev, const LstmCellParams& p);

  // Seeds d(loss)/d(loss) = seed and propagates through the recorded
  // graph. loss must be scalar. Consumes the tape.
  void backward(const TensorPtr& loss, double seed = 1.0);

  void clear();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  TensorPtr result(std::vector<std::size_t> shape, bool requires_grad);
  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

  std::vector<std::function<void()>> nodes_;
  bool consumed_ = false;
};

}  // namespace pedcast::ad
