#pragma once

#include <cstddef>

// Dense kernels behind the autodiff ops. Each has a serial reference
// version and an OpenMP version parallelized over output rows, so the
// two produce bit-identical results for any thread count.

namespace pedcast::kernels {

// c[m x n] += a[m x k] * b[k x n]
void matmul_acc_serial(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n);
void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);

// c[m x n] += a[m x k] * b[n x k]^T
void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n);
void matmul_nt_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);

// c[k x n] += a[m x k]^T * b[m x n]
void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);

}  // namespace pedcast::kernels
