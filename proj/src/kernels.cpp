#include "entroflow/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <string>

#include "entroflow/error.hpp"
#include "fft.hpp"

namespace entroflow::kernels {

int thread_cap() {
  if (const char* env = std::getenv("ENTROFLOW_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

void apply_thread_cap() {
  static std::once_flag once;
  std::call_once(once, [] { omp_set_num_threads(thread_cap()); });
}

std::vector<double> log_cell_weights(std::size_t count) {
  auto F = [](double u) { return u == 0.0 ? 0.0 : 0.5 * u * u * std::log(std::abs(u)) - 0.75 * u * u; };
  std::vector<double> w(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double x = static_cast<double>(k);
    if (k < 64) {
      w[k] = F(x + 1.0) - 2.0 * F(x) + F(x - 1.0);
    } else {
      // Asymptotic series avoids cancellation in the second difference.
      const double r = 1.0 / (x * x);
      w[k] = std::log(x) - r / 12.0 - r * r / 60.0 - r * r * r / 168.0;
    }
  }
  return w;
}

namespace {

std::vector<double> direct_symmetric(std::span<const double> kernel, std::span<const double> x, bool parallel) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
#pragma omp parallel for if (parallel) schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += kernel[i > j ? i - j : j - i] * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<double> direct_general(std::span<const double> kernel, std::span<const double> x, bool parallel) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
#pragma omp parallel for if (parallel) schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += kernel[i + n - 1 - j] * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<double> fft_general(std::span<const double> kernel, std::span<const double> x) {
  const std::size_t n = x.size();
  // Full linear convolution of the (2n-1)-kernel with x, then the centre block.
  const auto full = detail::linear_convolve(kernel, x);
  return std::vector<double>(full.begin() + static_cast<std::ptrdiff_t>(n - 1),
                             full.begin() + static_cast<std::ptrdiff_t>(2 * n - 1));
}

}  // namespace

std::vector<double> toeplitz_symmetric(std::span<const double> kernel, std::span<const double> x, Exec exec) {
  const std::size_t n = x.size();
  if (kernel.size() < n) throw Error(ErrorCode::kInvalidArgument, "kernel shorter than input");
  if (n == 0) return {};
  if (exec == Exec::kFft) {
    std::vector<double> full(2 * n - 1);
    for (std::size_t k = 0; k < 2 * n - 1; ++k) full[k] = kernel[k >= n - 1 ? k - (n - 1) : (n - 1) - k];
    return fft_general(full, x);
  }
  if (exec == Exec::kParallel) apply_thread_cap();
  return direct_symmetric(kernel, x, exec == Exec::kParallel);
}

std::vector<double> toeplitz_general(std::span<const double> kernel, std::span<const double> x, Exec exec) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (kernel.size() != 2 * n - 1) throw Error(ErrorCode::kInvalidArgument, "general kernel must have length 2n-1");
  if (exec == Exec::kFft) return fft_general(kernel, x);
  if (exec == Exec::kParallel) apply_thread_cap();
  return direct_general(kernel, x, exec == Exec::kParallel);
}

double toeplitz_form(std::span<const double> kernel, std::span<const double> p, Exec exec) {
  if (exec == Exec::kFft) {
    const auto y = toeplitz_symmetric(kernel, p, Exec::kFft);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * y[i];
    return s;
  }
  const bool parallel = exec == Exec::kParallel;
  if (parallel) apply_thread_cap();
  const std::size_t n = p.size();
  double s = 0.0;
#pragma omp parallel for if (parallel) reduction(+ : s) schedule(dynamic, 64)
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.5 * kernel[0] * p[i];
    for (std::size_t j = i + 1; j < n; ++j) row += kernel[j - i] * p[j];
    s += 2.0 * p[i] * row;
  }
  return s;
}

}  // namespace entroflow::kernels
