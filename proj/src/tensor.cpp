#include "pedcast/tensor.hpp"

#include <numeric>
#include <sstream>

namespace pedcast::ad {

bool debug_checks = true;

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void Tensor::zero_grad() {
  std::fill(grad.begin(), grad.end(), 0.0);
}

void Tensor::check_finite(const char* where) const {
  if (!debug_checks) return;
  for (double v : value)
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite value in ") + where);
}

static std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

TensorPtr make_tensor(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0));
}

TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> data,
                      bool requires_grad) {
  if (shape_product(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape product " +
                     std::to_string(shape_product(shape)));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->value = std::move(data);
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(t->value.size(), 0.0);
  return t;
}

TensorPtr scalar_tensor(double v) {
  return make_tensor({1}, {v});
}

TensorPtr ParameterSet::add(const std::string& name, std::vector<std::size_t> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  auto t = make_tensor(std::move(shape), std::vector<double>(n, 0.0),
                       /*requires_grad=*/true);
  insert(name, t);
  return t;
}

void ParameterSet::insert(const std::string& name, TensorPtr t) {
  if (by_name_.count(name))
    throw ContractError("duplicate parameter name: " + name);
  order_.push_back(name);
  by_name_.emplace(name, std::move(t));
}

TensorPtr ParameterSet::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end())
    throw ContractError("unknown parameter name: " + name);
  return it->second;
}

std::size_t ParameterSet::total_values() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += by_name_.at(name)->size();
  return n;
}

void ParameterSet::zero_grads() {
  for (const auto& name : order_) by_name_.at(name)->zero_grad();
}

}  // namespace pedcast::ad
