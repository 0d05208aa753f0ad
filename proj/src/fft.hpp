#pragma once

// Thin FFTW wrappers. Plan creation is serialized; execution is reentrant.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace entroflow::detail {

std::size_t next_pow2(std::size_t n);

/// Real forward transform of length n (input zero-padded to n); returns n/2+1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n);
/// Inverse of rfft, including the 1/n factor.
std::vector<double> irfft(std::span<const std::complex<double>> X, std::size_t n);

/// Full linear convolution, length a.size() + b.size() - 1.
std::vector<double> linear_convolve(std::span<const double> a, std::span<const double> b);

/// Angular frequency of bin k for a length-n transform with spacing dx.
inline double angular_frequency(std::size_t k, std::size_t n, double dx) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return kTwoPi * static_cast<double>(k) / (static_cast<double>(n) * dx);
}

}  // namespace entroflow::detail
