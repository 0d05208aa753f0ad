#pragma once

// Hot loops shared by the free module and the extremal solver. Each kernel
// has a serial reference and an OpenMP version; the Toeplitz kernels also
// have an FFT path used in production.

#include <cstddef>
#include <span>
#include <vector>

namespace entroflow::kernels {

enum class Exec { kSerial, kParallel, kFft };

/// Thread budget: ENTROFLOW_THREADS when set to a positive integer, else the
/// OpenMP default.
int thread_cap();
/// Applies thread_cap() to the OpenMP runtime; idempotent.
void apply_thread_cap();

/// Weights of the log kernel between unit cells at integer offset k:
/// integral over [0,1]x[k,k+1] of log|s - t|, i.e. F(k+1) - 2F(k) + F(k-1)
/// with F(u) = u^2/2 log|u| - 3u^2/4. W_0 = -3/2.
std::vector<double> log_cell_weights(std::size_t count);

/// y_i = sum_j kernel[|i - j|] x_j.
std::vector<double> toeplitz_symmetric(std::span<const double> kernel, std::span<const double> x, Exec exec);
/// y_i = sum_j kernel[i - j + (n - 1)] x_j for a kernel of length 2n - 1.
std::vector<double> toeplitz_general(std::span<const double> kernel, std::span<const double> x, Exec exec);

/// Quadratic form sum_ij p_i p_j kernel[|i - j|].
double toeplitz_form(std::span<const double> kernel, std::span<const double> p, Exec exec);

}  // namespace entroflow::kernels
