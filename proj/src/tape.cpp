#include "pedcast/tape.hpp"

#include <algorithm>
#include <cmath>

#include "pedcast/kernels.hpp"

namespace pedcast::ad {

namespace {

void require_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->shape != b->shape)
    throw ShapeError(std::string(op) + ": shape mismatch " + a->shape_str() +
                     " vs " + b->shape_str());
}

bool any_grad(std::initializer_list<const TensorPtr*> ts) {
  for (const TensorPtr* t : ts)
    if ((*t)->requires_grad) return true;
  return false;
}

}  // namespace

TensorPtr Tape::result(std::vector<std::size_t> shape, bool requires_grad) {
  auto t = make_tensor(std::move(shape));
  if (requires_grad) {
    t->requires_grad = true;
    t->grad.assign(t->size(), 0.0);
  }
  return t;
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw ShapeError("matmul: incompatible shapes " + a->shape_str() + " * " +
                     b->shape_str());
  const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto c = result({m, n}, any_grad({&a, &b}));
  kernels::matmul_acc(a->value.data(), b->value.data(), c->value.data(), m, k, n);
  c->check_finite("matmul");
  if (c->requires_grad)
    record([a, b, c, m, k, n] {
      if (a->requires_grad)
        kernels::matmul_nt_acc(c->grad.data(), b->value.data(), a->grad.data(), m, n, k);
      if (b->requires_grad)
        kernels::matmul_tn_acc(a->value.data(), c->grad.data(), b->grad.data(), m, k, n);
    });
  return c;
}

TensorPtr Tape::matmul_nt(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[1])
    throw ShapeError("matmul_nt: incompatible shapes " + a->shape_str() + " * " +
                     b->shape_str() + "^T");
  const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[0];
  auto c = result({m, n}, any_grad({&a, &b}));
  kernels::matmul_nt_acc(a->value.data(), b->value.data(), c->value.data(), m, k, n);
  c->check_finite("matmul_nt");
  if (c->requires_grad)
    record([a, b, c, m, k, n] {
      if (a->requires_grad)
        kernels::matmul_acc(c->grad.data(), b->value.data(), a->grad.data(), m, n, k);
      if (b->requires_grad)
        kernels::matmul_tn_acc(c->grad.data(), a->value.data(), b->grad.data(), m, n, k);
    });
  return c;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "add");
  auto c = result(a->shape, any_grad({&a, &b}));
  for (std::size_t i = 0; i < c->size(); ++i)
    c->value[i] = a->value[i] + b->value[i];
  c->check_finite("add");
  if (c->requires_grad)
    record([a, b, c] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < c->size(); ++i) a->grad[i] += c->grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < c->size(); ++i) b->grad[i] += c->grad[i];
    });
  return c;
}

TensorPtr Tape::sub(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "sub");
  auto c = result(a->shape, any_grad({&a, &b}));
  for (std::size_t i = 0; i < c->size(); ++i)
    c->value[i] = a->value[i] - b->value[i];
  c->check_finite("sub");
  if (c->requires_grad)
    record([a, b, c] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < c->size(); ++i) a->grad[i] += c->grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < c->size(); ++i) b->grad[i] -= c->grad[i];
    });
  return c;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "mul");
  auto c = result(a->shape, any_grad({&a, &b}));
  for (std::size_t i = 0; i < c->size(); ++i)
    c->value[i] = a->value[i] * b->value[i];
  c->check_finite("mul");
  if (c->requires_grad)
    record([a, b, c] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < c->size(); ++i)
          a->grad[i] += c->grad[i] * b->value[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < c->size(); ++i)
          b->grad[i] += c->grad[i] * a->value[i];
    });
  return c;
}

TensorPtr Tape::add_rowvec(const TensorPtr& a, const TensorPtr& b) {
  const std::size_t m = a->rows(), n = a->cols();
  if (b->size() != n)
    throw ShapeError("add_rowvec: row vector " + b->shape_str() +
                     " does not match matrix " + a->shape_str());
  auto c = result(a->shape, any_grad({&a, &b}));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c->value[i * n + j] = a->value[i * n + j] + b->value[j];
  c->check_finite("add_rowvec");
  if (c->requires_grad)
    record([a, b, c, m, n] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < m * n; ++i) a->grad[i] += c->grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) b->grad[j] += c->grad[i * n + j];
    });
  return c;
}

TensorPtr Tape::scale(const TensorPtr& a, double s) {
  auto c = result(a->shape, a->requires_grad);
  for (std::size_t i = 0; i < c->size(); ++i) c->value[i] = a->value[i] * s;
  c->check_finite("scale");
  if (c->requires_grad)
    record([a, c, s] {
      for (std::size_t i = 0; i < c->size(); ++i) a->grad[i] += c->grad[i] * s;
    });
  return c;
}

TensorPtr Tape::tanh_op(const TensorPtr& a) {
  auto c = result(a->shape, a->requires_grad);
  for (std::size_t i = 0; i < c->size(); ++i) c->value[i] = std::tanh(a->value[i]);
  if (c->requires_grad)
    record([a, c] {
      for (std::size_t i = 0; i < c->size(); ++i)
        a->grad[i] += c->grad[i] * (1.0 - c->value[i] * c->value[i]);
    });
  return c;
}

TensorPtr Tape::sigmoid(const TensorPtr& a) {
  auto c = result(a->shape, a->requires_grad);
  for (std::size_t i = 0; i < c->size(); ++i)
    c->value[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
  if (c->requires_grad)
    record([a, c] {
      for (std::size_t i = 0; i < c->size(); ++i)
        a->grad[i] += c->grad[i] * c->value[i] * (1.0 - c->value[i]);
    });
  return c;
}

TensorPtr Tape::relu(const TensorPtr& a) {
  auto c = result(a->shape, a->requires_grad);
  for (std::size_t i = 0; i < c->size(); ++i)
    c->value[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  if (c->requires_grad)
    record([a, c] {
      for (std::size_t i = 0; i < c->size(); ++i)
        if (a->value[i] > 0.0) a->grad[i] += c->grad[i];
    });
  return c;
}

TensorPtr Tape::softmax_rows(const TensorPtr& a) {
  a->check_finite("softmax_rows input");
  const std::size_t m = a->rows(), n = a->cols();
  auto c = result(a->shape, a->requires_grad);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = a->value.data() + i * n;
    double* y = c->value.data() + i * n;
    double mx = x[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  if (c->requires_grad)
    record([a, c, m, n] {
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = c->value.data() + i * n;
        const double* dy = c->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
        for (std::size_t j = 0; j < n; ++j)
          a->grad[i * n + j] += y[j] * (dy[j] - dot);
      }
    });
  return c;
}

TensorPtr Tape::layer_norm(const TensorPtr& x, const TensorPtr& gain,
                           const TensorPtr& bias, double eps) {
  const std::size_t m = x->rows(), n = x->cols();
  if (gain->size() != n || bias->size() != n)
    throw ShapeError("layer_norm: gain/bias length must equal cols of " +
                     x->shape_str());
  auto c = result(x->shape, any_grad({&x, &gain, &bias}));
  // keep normalized activations and inverse std for the backward pass
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x->value.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xi[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (xi[j] - mu) * is;
      (*xhat)[i * n + j] = xh;
      c->value[i * n + j] = gain->value[j] * xh + bias->value[j];
    }
  }
  c->check_finite("layer_norm");
  if (c->requires_grad)
    record([x, gain, bias, c, xhat, inv_std, m, n] {
      for (std::size_t i = 0; i < m; ++i) {
        const double* dy = c->grad.data() + i * n;
        const double* xh = xhat->data() + i * n;
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dxh = dy[j] * gain->value[j];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xh[j];
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        if (x->requires_grad)
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = dy[j] * gain->value[j];
            x->grad[i * n + j] += (*inv_std)[i] *
                (dxh - inv_n * sum_dxhat - xh[j] * inv_n * sum_dxhat_xhat);
          }
        if (gain->requires_grad)
          for (std::size_t j = 0; j < n; ++j) gain->grad[j] += dy[j] * xh[j];
        if (bias->requires_grad)
          for (std::size_t j = 0; j < n; ++j) bias->grad[j] += dy[j];
      }
    });
  return c;
}

TensorPtr Tape::concat_rows(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty part list");
  const std::size_t n = parts[0]->cols();
  std::size_t m = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p->cols() != n)
      throw ShapeError("concat_rows: column mismatch " + p->shape_str());
    m += p->rows();
    rg = rg || p->requires_grad;
  }
  auto c = result({m, n}, rg);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.begin(), p->value.end(), c->value.begin() + off);
    off += p->size();
  }
  if (rg)
    record([parts, c] {
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p->requires_grad)
          for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += c->grad[off + i];
        off += p->size();
      }
    });
  return c;
}

TensorPtr Tape::concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty part list");
  const std::size_t m = parts[0]->rows();
  std::size_t n = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p->rows() != m)
      throw ShapeError("concat_cols: row mismatch " + p->shape_str());
    n += p->cols();
    rg = rg || p->requires_grad;
  }
  auto c = result({m, n}, rg);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p->cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy(p->value.begin() + i * pc, p->value.begin() + (i + 1) * pc,
                c->value.begin() + i * n + off);
    off += pc;
  }
  if (rg)
    record([parts, c, m, n] {
      std::size_t off = 0;
      for (const auto& p : parts) {
        const std::size_t pc = p->cols();
        if (p->requires_grad)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j)
              p->grad[i * pc + j] += c->grad[i * n + off + j];
        off += pc;
      }
    });
  return c;
}

TensorPtr Tape::slice_rows(const TensorPtr& a, std::size_t start, std::size_t len) {
  const std::size_t m = a->rows(), n = a->cols();
  if (start + len > m)
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds " + a->shape_str());
  auto c = result({len, n}, a->requires_grad);
  std::copy(a->value.begin() + start * n, a->value.begin() + (start + len) * n,
            c->value.begin());
  if (c->requires_grad)
    record([a, c, start, n] {
      for (std::size_t i = 0; i < c->size(); ++i)
        a->grad[start * n + i] += c->grad[i];
    });
  return c;
}

TensorPtr Tape::slice_cols(const TensorPtr& a, std::size_t start, std::size_t len) {
  const std::size_t m = a->rows(), n = a->cols();
  if (start + len > n)
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds " + a->shape_str());
  auto c = result({m, len}, a->requires_grad);
  for (std::size_t i = 0; i < m; ++i)
    std::copy(a->value.begin() + i * n + start,
              a->value.begin() + i * n + start + len, c->value.begin() + i * len);
  if (c->requires_grad)
    record([a, c, start, m, n, len] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j)
          a->grad[i * n + start + j] += c->grad[i * len + j];
    });
  return c;
}

TensorPtr Tape::reshape(const TensorPtr& a, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != a->size())
    throw ShapeError("reshape: cannot view " + a->shape_str() + " as product " +
                     std::to_string(n));
  auto c = result(std::move(shape), a->requires_grad);
  c->value = a->value;
  if (c->requires_grad)
    record([a, c] {
      for (std::size_t i = 0; i < c->size(); ++i) a->grad[i] += c->grad[i];
    });
  return c;
}

TensorPtr Tape::sum(const TensorPtr& a) {
  auto c = result({1}, a->requires_grad);
  double s = 0.0;
  for (double v : a->value) s += v;
  c->value[0] = s;
  c->check_finite("sum");
  if (c->requires_grad)
    record([a, c] {
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += c->grad[0];
    });
  return c;
}

TensorPtr Tape::mean(const TensorPtr& a) {
  if (a->size() == 0) throw ContractError("mean: empty tensor");
  auto c = sum(a);
  return scale(c, 1.0 / static_cast<double>(a->size()));
}

TensorPtr Tape::mse(const TensorPtr& pred, const std::vector<double>& target) {
  if (pred->size() != target.size())
    throw ShapeError("mse: prediction " + pred->shape_str() + " vs target length " +
                     std::to_string(target.size()));
  auto c = result({1}, pred->requires_grad);
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = pred->value[i] - target[i];
    s += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(target.size());
  c->value[0] = s * inv_n;
  c->check_finite("mse");
  if (c->requires_grad) {
    auto tgt = std::make_shared<std::vector<double>>(target);
    record([pred, c, tgt, inv_n] {
      for (std::size_t i = 0; i < pred->size(); ++i)
        pred->grad[i] += c->grad[0] * 2.0 * inv_n * (pred->value[i] - (*tgt)[i]);
    });
  }
  return c;
}

TensorPtr Tape::bce_with_logits(const TensorPtr& logits,
                                const std::vector<double>& labels) {
  if (logits->size() != labels.size())
    throw ShapeError("bce_with_logits: logits " + logits->shape_str() +
                     " vs labels length " + std::to_string(labels.size()));
  auto c = result({1}, logits->requires_grad);
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double z = logits->value[i], y = labels[i];
    s += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  c->value[0] = s * inv_n;
  c->check_finite("bce_with_logits");
  if (c->requires_grad) {
    auto lbl = std::make_shared<std::vector<double>>(labels);
    record([logits, c, lbl, inv_n] {
      for (std::size_t i = 0; i < logits->size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-logits->value[i]));
        logits->grad[i] += c->grad[0] * inv_n * (p - (*lbl)[i]);
      }
    });
  }
  return c;
}

LstmState Tape::lstm_cell(const TensorPtr& x, const TensorPtr& h_prev,
                          const TensorPtr& c_prev, const LstmCellParams& p) {
  const std::size_t batch = x->rows(), in = x->cols(), dim = h_prev->cols();
  if (h_prev->rows() != batch || c_prev->rows() != batch || c_prev->cols() != dim)
    throw ShapeError("lstm_cell: state shapes " + h_prev->shape_str() + "/" +
                     c_prev->shape_str() + " inconsistent with input " +
                     x->shape_str());
  if (p.w_xi->shape != std::vector<std::size_t>{in, dim} ||
      p.w_hi->shape != std::vector<std::size_t>{dim, dim} || p.b_i->size() != dim)
    throw ShapeError("lstm_cell: gate parameter shapes inconsistent with input " +
                     x->shape_str() + " and hidden dim " + std::to_string(dim));

  const bool rg = any_grad({&x, &h_prev, &c_prev, &p.w_xi, &p.w_hi, &p.b_i,
                            &p.w_xf, &p.w_hf, &p.b_f, &p.w_xo, &p.w_ho, &p.b_o,
                            &p.w_xc, &p.w_hc, &p.b_c});
  auto h = result({batch, dim}, rg);
  auto c = result({batch, dim}, rg);

  // pre-activations for the four gate stacks
  auto gate = [&](const TensorPtr& wx, const TensorPtr& wh, const TensorPtr& b) {
    std::vector<double> z(batch * dim);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < dim; ++j) z[i * dim + j] = b->value[j];
    kernels::matmul_acc(x->value.data(), wx->value.data(), z.data(), batch, in, dim);
    kernels::matmul_acc(h_prev->value.data(), wh->value.data(), z.data(), batch,
                        dim, dim);
    return z;
  };
  auto gi = std::make_shared<std::vector<double>>(gate(p.w_xi, p.w_hi, p.b_i));
  auto gf = std::make_shared<std::vector<double>>(gate(p.w_xf, p.w_hf, p.b_f));
  auto go = std::make_shared<std::vector<double>>(gate(p.w_xo, p.w_ho, p.b_o));
  auto gc = std::make_shared<std::vector<double>>(gate(p.w_xc, p.w_hc, p.b_c));
  auto tc = std::make_shared<std::vector<double>>(batch * dim);

  for (std::size_t i = 0; i < batch * dim; ++i) {
    (*gi)[i] = 1.0 / (1.0 + std::exp(-(*gi)[i]));
    (*gf)[i] = 1.0 / (1.0 + std::exp(-(*gf)[i]));
    (*go)[i] = 1.0 / (1.0 + std::exp(-(*go)[i]));
    (*gc)[i] = std::tanh((*gc)[i]);
    c->value[i] = (*gf)[i] * c_prev->value[i] + (*gi)[i] * (*gc)[i];
    (*tc)[i] = std::tanh(c->value[i]);
    h->value[i] = (*go)[i] * (*tc)[i];
  }
  h->check_finite("lstm_cell");

  if (rg) {
    LstmCellParams prm = p;
    record([x, h_prev, c_prev, h, c, prm, gi, gf, go, gc, tc, batch, in, dim] {
      const std::size_t total = batch * dim;
      std::vector<double> dzi(total), dzf(total), dzo(total), dzc(total);
      for (std::size_t i = 0; i < total; ++i) {
        const double dh = h->grad[i];
        const double dc_total =
            c->grad[i] + dh * (*go)[i] * (1.0 - (*tc)[i] * (*tc)[i]);
        const double d_o = dh * (*tc)[i];
        const double d_i = dc_total * (*gc)[i];
        const double d_f = dc_total * c_prev->value[i];
        const double d_g = dc_total * (*gi)[i];
        dzi[i] = d_i * (*gi)[i] * (1.0 - (*gi)[i]);
        dzf[i] = d_f * (*gf)[i] * (1.0 - (*gf)[i]);
        dzo[i] = d_o * (*go)[i] * (1.0 - (*go)[i]);
        dzc[i] = d_g * (1.0 - (*gc)[i] * (*gc)[i]);
        if (c_prev->requires_grad) c_prev->grad[i] += dc_total * (*gf)[i];
      }
      auto back_gate = [&](const std::vector<double>& dz, const TensorPtr& wx,
                           const TensorPtr& wh, const TensorPtr& b) {
        if (x->requires_grad)
          kernels::matmul_nt_acc(dz.data(), wx->value.data(), x->grad.data(),
                                 batch, dim, in);
        if (h_prev->requires_grad)
          kernels::matmul_nt_acc(dz.data(), wh->value.data(), h_prev->grad.data(),
                                 batch, dim, dim);
        if (wx->requires_grad)
          kernels::matmul_tn_acc(x->value.data(), dz.data(), wx->grad.data(),
                                 batch, in, dim);
        if (wh->requires_grad)
          kernels::matmul_tn_acc(h_prev->value.data(), dz.data(), wh->grad.data(),
                                 batch, dim, dim);
        if (b->requires_grad)
          for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t j = 0; j < dim; ++j) b->grad[j] += dz[i * dim + j];
      };
      back_gate(dzi, prm.w_xi, prm.w_hi, prm.b_i);
      back_gate(dzf, prm.w_xf, prm.w_hf, prm.b_f);
      back_gate(dzo, prm.w_xo, prm.w_ho, prm.b_o);
      back_gate(dzc, prm.w_xc, prm.w_hc, prm.b_c);
    });
  }
  return {h, c};
}

void Tape::backward(const TensorPtr& loss, double seed) {
  if (loss->size() != 1)
    throw ContractError("backward: loss must be scalar, got " + loss->shape_str());
  if (!loss->requires_grad)
    throw ContractError("backward: loss does not depend on any parameter");
  if (consumed_)
    throw ContractError("backward: tape already consumed; rebuild the forward pass");
  consumed_ = true;
  loss->grad[0] += seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() {
  nodes_.clear();
  consumed_ = false;
}

}  // namespace pedcast::ad
