#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "primepca/kernels.hpp"

using namespace primepca::simd;

namespace {

std::vector<double> randvec(std::size_t n, std::mt19937_64& g) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(g);
  return v;
}

double rel(double a, double b, double scale) { return std::abs(a - b) / std::max(1.0, scale); }

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
  EXPECT_TRUE(isa_supported(Isa::scalar));
  EXPECT_EQ(kernels_for(Isa::scalar).isa, Isa::scalar);
  EXPECT_EQ(isa_name(Isa::scalar), "scalar");
  EXPECT_TRUE(isa_supported(kernels().isa));
}

TEST(Kernels, ScalarReferenceValues) {
  const auto& k = kernels_for(Isa::scalar);
  const double x[] = {1, 2, 3}, y[] = {4, -5, 6};
  EXPECT_EQ(k.dot(x, y, 3), 12.0);
  EXPECT_EQ(k.sum_squares(x, 3), 14.0);
  double z[] = {1, 1, 1};
  k.axpy(2.0, x, z, 3);
  EXPECT_EQ(z[2], 7.0);
  const std::int32_t idx[] = {2, 0};
  double out[2];
  k.gather(y, idx, out, 2);
  EXPECT_EQ(out[0], 6.0);
  EXPECT_EQ(out[1], 4.0);
  const double w[] = {0.5, 2.0};
  EXPECT_EQ(k.gather_dot(y, idx, w, 2), 11.0);
  EXPECT_EQ(k.dot(x, y, 0), 0.0);
}

TEST(Kernels, Avx2MatchesScalar) {
  if (!isa_supported(Isa::avx2)) GTEST_SKIP() << "CPU lacks AVX2/FMA";
  const auto& s = kernels_for(Isa::scalar);
  const auto& v = kernels_for(Isa::avx2);
  std::mt19937_64 g(7);
  for (std::size_t n = 0; n < 70; ++n) {
    const auto x = randvec(n, g), y = randvec(n, g);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale += std::abs(x[i] * y[i]);
    EXPECT_LE(rel(s.dot(x.data(), y.data(), n), v.dot(x.data(), y.data(), n), scale), 1e-13);
    EXPECT_LE(rel(s.sum_squares(x.data(), n), v.sum_squares(x.data(), n), s.sum_squares(x.data(), n)),
              1e-13);

    auto ya = y, yb = y;
    s.axpy(0.37, x.data(), ya.data(), n);
    v.axpy(0.37, x.data(), yb.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ya[i], yb[i], 1e-14 * (1 + std::abs(ya[i])));

    std::vector<double> ha(n), hb(n);
    s.hadamard(x.data(), y.data(), ha.data(), n);
    v.hadamard(x.data(), y.data(), hb.data(), n);
    EXPECT_EQ(ha, hb);

    const std::size_t src_n = 3 * n + 1;
    const auto src = randvec(src_n, g);
    std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(src_n - 1));
    std::vector<std::int32_t> idx(n);
    for (auto& i : idx) i = pick(g);
    std::vector<double> ga(n), gb(n);
    s.gather(src.data(), idx.data(), ga.data(), n);
    v.gather(src.data(), idx.data(), gb.data(), n);
    EXPECT_EQ(ga, gb);
    double gscale = 0.0;
    for (std::size_t i = 0; i < n; ++i) gscale += std::abs(src[idx[i]] * x[i]);
    EXPECT_LE(rel(s.gather_dot(src.data(), idx.data(), x.data(), n),
                  v.gather_dot(src.data(), idx.data(), x.data(), n), gscale),
              1e-13);
  }
}
