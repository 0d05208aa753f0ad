#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

namespace entroflow::detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n) {
  std::vector<double> in(n, 0.0);
  std::copy_n(x.begin(), std::min(n, x.size()), in.begin());
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> X, std::size_t n) {
  // c2r destroys its input.
  std::vector<std::complex<double>> in(X.begin(), X.end());
  std::vector<double> out(n);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()), out.data(),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> linear_convolve(std::span<const double> a, std::span<const double> b) {
  const std::size_t len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(len);
  auto A = rfft(a, n);
  const auto B = rfft(b, n);
  for (std::size_t k = 0; k < A.size(); ++k) A[k] *= B[k];
  auto c = irfft(A, n);
  c.resize(len);
  return c;
}

}  // namespace entroflow::detail
