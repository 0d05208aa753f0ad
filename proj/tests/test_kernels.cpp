#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "entroflow/error.hpp"
#include "entroflow/kernels.hpp"

using namespace entroflow::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(LogCellWeights, DiagonalAndAsymptotics) {
  const auto w = log_cell_weights(200);
  EXPECT_DOUBLE_EQ(w[0], -1.5);
  // Direct second difference at k = 64 against the series used from there on.
  auto F = [](double u) { return 0.5 * u * u * std::log(u) - 0.75 * u * u; };
  EXPECT_NEAR(w[64], F(65.0) - 2.0 * F(64.0) + F(63.0), 1e-9);
  EXPECT_NEAR(w[199], std::log(199.0), 1e-5);
}

class ToeplitzExec : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ToeplitzExec, SymmetricPathsAgree) {
  const std::size_t n = GetParam();
  const auto kernel = random_vector(n, 1), x = random_vector(n, 2);
  const auto s = toeplitz_symmetric(kernel, x, Exec::kSerial);
  const auto p = toeplitz_symmetric(kernel, x, Exec::kParallel);
  const auto f = toeplitz_symmetric(kernel, x, Exec::kFft);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_DOUBLE_EQ(s[i], p[i]);
    EXPECT_NEAR(s[i], f[i], 1e-10 * static_cast<double>(n));
  }
}

TEST_P(ToeplitzExec, GeneralPathsAgree) {
  const std::size_t n = GetParam();
  const auto kernel = random_vector(2 * n - 1, 3), x = random_vector(n, 4);
  const auto s = toeplitz_general(kernel, x, Exec::kSerial);
  const auto p = toeplitz_general(kernel, x, Exec::kParallel);
  const auto f = toeplitz_general(kernel, x, Exec::kFft);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_DOUBLE_EQ(s[i], p[i]);
    EXPECT_NEAR(s[i], f[i], 1e-10 * static_cast<double>(n));
  }
}

TEST_P(ToeplitzExec, FormPathsAgree) {
  const std::size_t n = GetParam();
  const auto kernel = log_cell_weights(n), p = random_vector(n, 5);
  const double s = toeplitz_form(kernel, p, Exec::kSerial);
  EXPECT_NEAR(toeplitz_form(kernel, p, Exec::kParallel), s, 1e-9 * std::abs(s) + 1e-9);
  EXPECT_NEAR(toeplitz_form(kernel, p, Exec::kFft), s, 1e-9 * std::abs(s) + 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Sizes, ToeplitzExec, ::testing::Values(1, 2, 7, 64, 1000, 3001));

TEST(ToeplitzGeneral, RejectsWrongKernelLength) {
  const std::vector<double> k(4), x(3);
  EXPECT_THROW(toeplitz_general(k, x, Exec::kSerial), entroflow::Error);
}

TEST(ThreadCap, ReadsEnvironment) {
  setenv("ENTROFLOW_THREADS", "3", 1);
  EXPECT_EQ(thread_cap(), 3);
  setenv("ENTROFLOW_THREADS", "zero", 1);
  EXPECT_GE(thread_cap(), 1);
  setenv("ENTROFLOW_THREADS", "-2", 1);
  EXPECT_GE(thread_cap(), 1);
  unsetenv("ENTROFLOW_THREADS");
  EXPECT_GE(thread_cap(), 1);
}
