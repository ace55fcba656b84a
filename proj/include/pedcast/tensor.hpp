#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pedcast/errors.hpp"

namespace pedcast::ad {

// Toggles NaN/Inf detection on op outputs. On by default; hot loops that
// have already been validated may switch it off.
extern bool debug_checks;

// Dense row-major 64-bit tensor. Rank is 1 or 2 everywhere in this
// project; shape is kept general so reshape stays trivial.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized iff requires_grad
  bool requires_grad = false;

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  std::string shape_str() const;
  void zero_grad();
  void check_finite(const char* where) const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<std::size_t> shape);
TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> data,
                      bool requires_grad = false);
TensorPtr scalar_tensor(double v);

// Ordered name -> parameter map. Iteration follows insertion order so
// optimizer sweeps, checkpoints, and gradient checks all agree.
class ParameterSet {
 public:
  TensorPtr add(const std::string& name, std::vector<std::size_t> shape);
  void insert(const std::string& name, TensorPtr t);
  TensorPtr get(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t total_values() const;
  void zero_grads();

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, TensorPtr> by_name_;
};

}  // namespace pedcast::ad
