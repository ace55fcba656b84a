#include "pedcast/kernels.hpp"

#include <cstdint>

namespace pedcast::kernels {

namespace {

// Row i of the output depends only on row i of a (or column data of b),
// so splitting the i loop across threads keeps every element's summation
// order identical to the serial version.

inline void row_matmul(const double* a, const double* b, double* c,
                       std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    if (av == 0.0) continue;
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void row_matmul_nt(const double* a, const double* b, double* c,
                          std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a[p] * brow[p];
    c[j] += acc;
  }
}

}  // namespace

void matmul_acc_serial(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    row_matmul(a + i * k, b, c + i * n, k, n);
}

void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m > 1 && m * k * n > 16384)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
    row_matmul(a + i * k, b, c + i * n, k, n);
}

void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    row_matmul_nt(a + i * k, b, c + i * n, k, n);
}

void matmul_nt_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m > 1 && m * k * n > 16384)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
    row_matmul_nt(a + i * k, b, c + i * n, k, n);
}

void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n) {
  // c[p, j] += sum_i a[i, p] * b[i, j]; parallel version splits over p.
  for (std::size_t p = 0; p < k; ++p) {
    double* crow = c + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (k > 1 && m * k * n > 16384)
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(k); ++p) {
    double* crow = c + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace pedcast::kernels
