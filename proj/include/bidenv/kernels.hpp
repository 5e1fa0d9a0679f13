#pragma once

#include <cstddef>

// Dense inner-loop kernels over raw row-major buffers. The default entry
// points parallelize over independent output rows with OpenMP; each output
// element is still a serial reduction in a fixed order, so results are
// bit-identical for any thread count. kern::ref holds serial twins with the
// same loop structure (used by tests for bitwise comparison and by the
// kernel benchmark).
namespace bidenv::kern {

// c[m x n] = a[m x k] * b[k x n]; accumulate adds into c instead of overwriting
void matmul_nn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate = false);

// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate = false);

// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate = false);

// Row-wise softmax with masking: entries at or below the mask threshold get
// probability exactly 0; a fully masked row comes out all-zero.
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y);

// Row-wise layer norm: y = (x - mean) / sqrt(var + eps) * gain + bias.
// Caches per-row mean and inverse std for the backward pass when non-null.
void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x,
                     const double* gain, const double* bias, double eps,
                     double* y, double* mean_cache, double* rstd_cache);

namespace ref {

void matmul_nn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate = false);
void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate = false);
void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate = false);
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y);
void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x,
                     const double* gain, const double* bias, double eps,
                     double* y, double* mean_cache, double* rstd_cache);

}  // namespace ref

}  // namespace bidenv::kern
