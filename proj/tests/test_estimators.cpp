#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "primepca/error.hpp"
#include "primepca/estimators.hpp"
#include "primepca/simulate.hpp"

using namespace primepca;
using namespace primepca::est;
using linalg::Frame;

namespace {

Mask bernoulli_mask(Index n, Index d, double p, std::mt19937_64& g) {
  Mask m(n, d);
  std::bernoulli_distribution b(p);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = b(g) ? 1 : 0;
  return m;
}

struct Noiseless {
  Matrix y;
  Frame truth;
  Matrix scores;
};

Noiseless low_rank(Index n, Index d, Index k, double sd, std::mt19937_64& g) {
  Noiseless out;
  out.truth = Frame(oracle::random_frame(d, k, g));
  out.scores = sd * oracle::gaussian(n, k, g);
  out.y = out.scores * out.truth.matrix().transpose();
  return out;
}

// Rows with no observation get one entry so refine's precondition holds.
Mask ensure_rows(Mask m) {
  for (Index i = 0; i < m.rows(); ++i)
    if (m.row(i).cast<int>().sum() == 0) m(i, i % m.cols()) = 1;
  return m;
}

Matrix top_right_oracle(const Matrix& y, Index k) {
  return oracle::jacobi_eigen(y.transpose() * y).vectors.leftCols(k);
}

}  // namespace

TEST(Ipw, FullyObservedIsSampleGram) {
  std::mt19937_64 g(1);
  const Matrix y = oracle::gaussian(30, 5, g);
  const auto pm = PartialMatrix::fully_observed(y);
  EXPECT_LE((ipw_covariance(pm) - y.transpose() * y / 30.0).cwiseAbs().maxCoeff(), 1e-13);

  Matrix one(1, 2);
  one << 2, 3;
  Matrix expect(2, 2);
  expect << 4, 6, 6, 9;
  EXPECT_EQ(ipw_covariance(PartialMatrix::fully_observed(one)), expect);
  EXPECT_THROW(ipw_covariance(PartialMatrix(one, Mask::Zero(1, 2))), InvalidArgument);
}

TEST(Ipw, HomogeneousWeights) {
  const Matrix w = homogeneous_weights(0.5, 3);
  EXPECT_DOUBLE_EQ(w(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(w(0, 1), 4.0);
  EXPECT_EQ(homogeneous_weights(1.0, 4), Matrix::Ones(4, 4));
}

TEST(Ipw, UnbiasedOverMaskDraws) {
  std::mt19937_64 g(2);
  const Index n = 10, d = 4;
  const double p = 0.5;
  const Matrix y = oracle::gaussian(n, d, g);
  const Matrix target = y.transpose() * y / static_cast<double>(n);
  const int draws = 10000;
  Matrix sum = Matrix::Zero(d, d), sum2 = Matrix::Zero(d, d);
  for (int r = 0; r < draws; ++r) {
    const Matrix gh = ipw_covariance(PartialMatrix(y, bernoulli_mask(n, d, p, g)), p);
    sum += gh;
    sum2 += gh.cwiseProduct(gh);
  }
  const Matrix mean = sum / draws;
  for (Index j = 0; j < d; ++j) {
    for (Index k = 0; k <= j; ++k) {
      const double var = sum2(j, k) / draws - mean(j, k) * mean(j, k);
      EXPECT_LE(std::abs(mean(j, k) - target(j, k)), 3.0 * std::sqrt(var / draws)) << j << "," << k;
    }
  }
}

TEST(InitWeights, FullAndTwoPattern) {
  EXPECT_EQ(init_weights(PartialMatrix::fully_observed(Matrix::Ones(5, 3))), Matrix::Ones(3, 3));
  // rows alternate between (1,0,1,...,1) and (0,1,1,...,1)
  const Index n = 10, d = 5;
  Mask m = Mask::Ones(n, d);
  for (Index i = 0; i < n; ++i) m(i, (i + 1) % 2) = 0;
  const Matrix w = init_weights(PartialMatrix(Matrix::Ones(n, d), m));
  EXPECT_EQ(w(0, 1), 0.0);
  EXPECT_EQ(w(0, 2), 2.0);
  EXPECT_EQ(w(2, 3), 1.0);
  EXPECT_EQ(w(1, 1), 2.0);
}

TEST(InitWeights, NormBoundFrequency) {
  const Index n = 500, d = 20;
  const double p = 0.5;
  const double bound = 2.0 / (p * p);
  std::mt19937_64 g(3);
  const int draws = 500;
  int good = 0;
  for (int r = 0; r < draws; ++r) {
    const Matrix w = init_weights(PartialMatrix(Matrix::Ones(n, d), bernoulli_mask(n, d, p, g)));
    const auto nn = linalg::operator_norms(w);
    const double dd = static_cast<double>(d);
    good += nn.op <= dd * bound && nn.one_to_one <= dd * bound && nn.inf_to_inf <= dd * bound &&
            nn.entrywise_l1 <= dd * dd * bound && nn.frobenius <= dd * bound &&
            nn.two_to_inf <= std::sqrt(dd) * bound;
  }
  const double floor = 1.0 - static_cast<double>(d * d) * std::exp(-3.0 * n * p * p / 32.0);
  EXPECT_GE(static_cast<double>(good) / draws, floor);
}

TEST(InitCovariance, PairwiseCompleteOracle) {
  std::mt19937_64 g(4);
  const Index n = 60, d = 6;
  const Matrix y = oracle::gaussian(n, d, g);
  const PartialMatrix pm(y, bernoulli_mask(n, d, 0.4, g));
  const Matrix gt = init_covariance(pm);
  for (Index j = 0; j < d; ++j) {
    for (Index k = 0; k < d; ++k) {
      double s = 0.0;
      int c = 0;
      for (Index i = 0; i < n; ++i) {
        if (pm.observed(i, j) && pm.observed(i, k)) {
          s += y(i, j) * y(i, k);
          ++c;
        }
      }
      EXPECT_NEAR(gt(j, k), c > 0 ? s / c : 0.0, 1e-12);
    }
  }
}

TEST(InitCovariance, FullObservationAndEquivariance) {
  std::mt19937_64 g(5);
  const Matrix y = oracle::gaussian(40, 7, g);
  const auto full = init_estimator(PartialMatrix::fully_observed(y), 2);
  // the cosine-based oracle resolves angles only down to ~sqrt(eps)
  EXPECT_LE(oracle::sin_theta(full.vectors.matrix(), top_right_oracle(y, 2)), 1e-7);
  EXPECT_THROW(init_estimator(PartialMatrix::fully_observed(y), 8), InvalidArgument);

  const PartialMatrix pm(y, bernoulli_mask(40, 7, 0.5, g));
  const Matrix base = init_covariance(pm);
  std::vector<Index> rows(40);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), g);
  EXPECT_LE((init_covariance(pm.select_rows(rows)) - base).cwiseAbs().maxCoeff(), 1e-12);

  Eigen::PermutationMatrix<Eigen::Dynamic> perm(7);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 7, g);
  const PartialMatrix cp(pm.values() * perm, (pm.mask().cast<int>() * perm).cast<std::uint8_t>());
  EXPECT_LE((init_covariance(cp) - perm.transpose() * base * perm).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InitCovariance, TwoPatternMomentsMatch) {
  // The two covariances differ only in the sign of the (1, 2) entry, which the
  // two-pattern mask never reveals.
  const Index n = 20, d = 4;
  const double h = 1.0 / std::sqrt(2.0);
  Vector a = Vector::Zero(d), b = Vector::Zero(d);
  a(0) = h, a(1) = h;
  b(0) = h, b(1) = -h;
  auto draw = [&](const Vector& alpha, std::uint64_t seed) {
    sim::Rng rng(seed);
    Matrix y(n, d);
    for (Index i = 0; i < n; ++i) {
      const double u = rng.normal();
      for (Index j = 0; j < d; ++j) y(i, j) = u * alpha(j) + rng.normal();
    }
    return init_covariance(PartialMatrix(y, sim::generate_mask(sim::TwoPattern{}, n, d, seed + 1)));
  };
  const int draws = 10000;
  Matrix s1 = Matrix::Zero(d, d), q1 = s1, s2 = s1, q2 = s1;
  for (int r = 0; r < draws; ++r) {
    const Matrix g1 = draw(a, 1000 + 2 * r), g2 = draw(b, 900000 + 2 * r);
    s1 += g1, q1 += g1.cwiseProduct(g1);
    s2 += g2, q2 += g2.cwiseProduct(g2);
  }
  for (Index j = 0; j < d; ++j) {
    for (Index k = 0; k <= j; ++k) {
      const double m1 = s1(j, k) / draws, m2 = s2(j, k) / draws;
      const double v1 = q1(j, k) / draws - m1 * m1, v2 = q2(j, k) / draws - m2 * m2;
      EXPECT_LE(std::abs(m1 - m2), 4.0 * std::sqrt((v1 + v2) / draws)) << j << "," << k;
      EXPECT_LE(std::abs(v1 - v2), 0.15 * std::max(v1, v2) + 1e-12) << j << "," << k;
    }
  }
  EXPECT_EQ(s1(0, 1), 0.0);
}

TEST(Refine, FullyObservedGivesTopSingularSpace) {
  std::mt19937_64 g(6);
  const Matrix y = oracle::gaussian(50, 8, g);
  const auto pm = PartialMatrix::fully_observed(y);
  const Frame start(oracle::random_frame(8, 3, g));
  const Frame out = refine(3, start, pm);
  EXPECT_LE(oracle::sin_theta(out.matrix(), top_right_oracle(y, 3)), 1e-8);
}

TEST(Refine, NoiselessFixedPoint) {
  std::mt19937_64 g(7);
  const auto x = low_rank(300, 40, 2, 10.0, g);
  const PartialMatrix pm(x.y, ensure_rows(bernoulli_mask(300, 40, 0.2, g)));
  const Frame out = refine(2, x.truth, pm);
  EXPECT_LE(linalg::sin_theta_loss(out, x.truth), 1e-8);
  EXPECT_LE((out.matrix().transpose() * out.matrix() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(Refine, ContractsTwoToInfinityDistance) {
  std::mt19937_64 g(8);
  const auto x = low_rank(1000, 50, 2, 10.0, g);
  const PartialMatrix pm(x.y, ensure_rows(bernoulli_mask(1000, 50, 0.5, g)));
  for (const double eps : {1e-2, 1e-3}) {
    const Frame v_in = Frame::orthonormalized(x.truth.matrix() + eps * oracle::gaussian(50, 2, g));
    const Frame v_out = refine(2, v_in, pm);
    EXPECT_LT(linalg::two_to_inf_distance(v_out, x.truth), linalg::two_to_inf_distance(v_in, x.truth));
  }
}

TEST(Refine, Preconditions) {
  Mask m = Mask::Ones(4, 3);
  m.row(2).setZero();
  const PartialMatrix pm(Matrix::Ones(4, 3), m);
  EXPECT_THROW(refine(1, Frame(Matrix::Identity(3, 1)), pm), InvalidArgument);
  EXPECT_THROW(refine(4, Frame(Matrix::Identity(3, 3)), PartialMatrix::fully_observed(Matrix::Ones(4, 3))),
               InvalidArgument);
}

TEST(Screen, FullObservationKeepsEveryRow) {
  std::mt19937_64 g(9);
  const auto pm = PartialMatrix::fully_observed(oracle::gaussian(20, 6, g));
  const Frame v(oracle::random_frame(6, 2, g));
  // sigma_K of a full orthonormal frame is 1; sigma* = 1 would sit exactly on the cutoff
  EXPECT_EQ(screen_rows(2, v, pm, 1.5).size(), 20u);
  EXPECT_EQ(screen_rows(2, v, pm, 0.5).size(), 0u);
}

TEST(Screen, RowWithExactlyKEntriesIsDropped) {
  Mask m = Mask::Ones(3, 4);
  m(1, 2) = m(1, 3) = 0;
  const auto kept = screen_rows(2, Frame(Matrix::Identity(4, 2)), PartialMatrix(Matrix::Ones(3, 4), m), 100.0);
  EXPECT_EQ(kept, (std::vector<Index>{0, 2}));
}

TEST(Screen, MatchesPerRowOracle) {
  std::mt19937_64 g(10);
  const Index n = 400, d = 30, k = 2;
  const Mask m = sim::generate_mask(sim::CheckerColumns{0.5, 0.1}, n, d, 10);
  const PartialMatrix pm(oracle::gaussian(n, d, g), m);
  const Frame v(oracle::random_frame(d, k, g));
  std::vector<Index> expect;
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> cols;
    for (Index j = 0; j < d; ++j)
      if (m(i, j)) cols.push_back(j);
    if (static_cast<Index>(cols.size()) <= k) continue;
    Matrix vj(static_cast<Index>(cols.size()), k);
    for (std::size_t r = 0; r < cols.size(); ++r) vj.row(static_cast<Index>(r)) = v.matrix().row(cols[r]);
    const double sk = oracle::singular_values(vj)(k - 1);
    if (sk >= std::sqrt(static_cast<double>(cols.size())) / (std::sqrt(static_cast<double>(d)) * 3.0))
      expect.push_back(i);
  }
  const auto got = screen_rows(k, v, pm, 3.0);
  EXPECT_EQ(got, expect);
  EXPECT_GT(expect.size(), 0u);
  EXPECT_LT(expect.size(), static_cast<std::size_t>(n));
}

TEST(PrimePca, HugeKappaStopsAfterOneIteration) {
  std::mt19937_64 g(11);
  const auto x = low_rank(200, 20, 2, 5.0, g);
  const PartialMatrix pm(x.y + oracle::gaussian(200, 20, g), ensure_rows(bernoulli_mask(200, 20, 0.5, g)));
  PrimeConfig cfg;
  cfg.K = 2;
  cfg.kappa_star = 1e300;
  const auto rep = prime_pca(cfg, pm);
  EXPECT_EQ(rep.iterations_used, 1);
  EXPECT_EQ(rep.iterations.size(), 1u);
  EXPECT_EQ(rep.stop, StopReason::converged);
}

TEST(PrimePca, FullyObservedExactAfterOneStepAndIdempotent) {
  std::mt19937_64 g(12);
  const Matrix y = oracle::gaussian(60, 9, g);
  const Frame truth(top_right_oracle(y, 2));
  PrimeConfig cfg;
  cfg.K = 2;
  cfg.n_iter = 5;
  const auto rep = prime_pca(cfg, Frame(oracle::random_frame(9, 2, g)), PartialMatrix::fully_observed(y), &truth);
  ASSERT_EQ(rep.iterations.size(), 5u);
  EXPECT_LE(*rep.iterations[0].loss, 1e-8);
  for (std::size_t t = 1; t < 5; ++t) EXPECT_LT(rep.iterations[t].step_change, 1e-10);
  EXPECT_EQ(rep.stop, StopReason::max_iter);
}

TEST(PrimePca, EmptyScreeningNamesIteration) {
  std::mt19937_64 g(13);
  const PartialMatrix pm(oracle::gaussian(50, 10, g), ensure_rows(bernoulli_mask(50, 10, 0.5, g)));
  PrimeConfig cfg;
  cfg.K = 1;
  cfg.sigma_star = 1e-6;
  try {
    prime_pca(cfg, pm);
    FAIL();
  } catch (const ScreeningError& e) {
    EXPECT_EQ(e.iteration(), 1);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
  cfg.sigma_star = 0.0;
  EXPECT_THROW(validate(cfg), InvalidArgument);
}

TEST(PrimePca, ScalingEquivariance) {
  std::mt19937_64 g(14);
  const auto x = low_rank(300, 25, 2, 4.0, g);
  const PartialMatrix pm(x.y + oracle::gaussian(300, 25, g), ensure_rows(bernoulli_mask(300, 25, 0.3, g)));
  const auto scaled = pm.scaled(7.5);
  const auto i1 = init_estimator(pm, 2), i2 = init_estimator(scaled, 2);
  EXPECT_LE(linalg::sin_theta_loss(i1.vectors, i2.vectors), 1e-10);
  EXPECT_LE(linalg::sin_theta_loss(refine(2, i1.vectors, pm), refine(2, i1.vectors, scaled)), 1e-10);
  PrimeConfig cfg;
  cfg.K = 2;
  cfg.n_iter = 15;
  EXPECT_LE(linalg::sin_theta_loss(prime_pca(cfg, pm).estimate, prime_pca(cfg, scaled).estimate), 1e-10);
}

TEST(PrimePca, NoiselessTrajectoryIsMonotone) {
  sim::DataModelSpec spec;
  spec.n = 2000, spec.d = 500, spec.K = 2;
  spec.score_variances = Vector::Constant(2, 100.0);
  PrimeConfig cfg;
  cfg.K = 2;
  cfg.n_iter = 1200;
  int monotone = 0;
  const int runs = 20;
  for (int r = 0; r < runs; ++r) {
    const auto data = sim::generate_data(spec, sim::derive_seed(500 + r, 0));
    const PartialMatrix pm(data.y, sim::generate_mask(sim::Homogeneous{0.05}, 2000, 500, sim::derive_seed(500 + r, 1)));
    const auto rep = prime_pca(cfg, pm, &data.truth);
    bool ok = true;
    for (std::size_t t = 1; t < rep.iterations.size(); ++t) {
      const double prev = *rep.iterations[t - 1].loss, cur = *rep.iterations[t].loss;
      if (prev <= 1e-10) break;
      if (cur > prev * (1.0 + 1e-9)) ok = false;
    }
    monotone += ok;
  }
  EXPECT_EQ(monotone, runs);
}

TEST(Scores, FullyObservedNoiselessRecoversScores) {
  std::mt19937_64 g(15);
  const auto x = low_rank(40, 10, 3, 2.0, g);
  const auto s = estimate_scores(x.truth, PartialMatrix::fully_observed(x.y), 3);
  ASSERT_EQ(s.rows.size(), 40u);
  EXPECT_LE((s.scores - x.scores).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Scores, SingleObservedEntry) {
  Vector v(3);
  v << 0.8, 0.6, 0.0;
  Matrix y(3, 3);
  y << 2, 0, 0, 0, 3, 0, 0, 0, 5;
  Mask m = Mask::Zero(3, 3);
  m(0, 0) = m(1, 1) = m(2, 2) = 1;
  const auto s = estimate_scores(Frame(v), PartialMatrix(y, m), 1, ScoreRows::any_observed);
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_NEAR(s.scores(0, 0), 2.0 / 0.8, 1e-14);
  EXPECT_NEAR(s.scores(1, 0), 3.0 / 0.6, 1e-14);
  EXPECT_EQ(s.scores(2, 0), 0.0);   // v_j = 0: the pseudoinverse drops it
  EXPECT_TRUE(estimate_scores(Frame(v), PartialMatrix(y, m), 1).rows.empty());
}

TEST(Scores, MatchNormalEquations) {
  std::mt19937_64 g(16);
  const Index n = 80, d = 12, k = 3;
  const PartialMatrix pm(oracle::gaussian(n, d, g), bernoulli_mask(n, d, 0.6, g));
  const Frame v(oracle::random_frame(d, k, g));
  const auto s = estimate_scores(v, pm, k);
  std::size_t r = 0;
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> cols;
    for (Index j = 0; j < d; ++j)
      if (pm.observed(i, j)) cols.push_back(j);
    if (static_cast<Index>(cols.size()) <= k) continue;
    ASSERT_LT(r, s.rows.size());
    EXPECT_EQ(s.rows[r], i);
    Matrix a(static_cast<Index>(cols.size()), k);
    Vector b(static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      a.row(static_cast<Index>(c)) = v.matrix().row(cols[c]);
      b(static_cast<Index>(c)) = pm.values()(i, cols[c]);
    }
    const Vector u = oracle::normal_equations(a, b);
    EXPECT_LE((s.scores.row(static_cast<Index>(r)).transpose() - u).cwiseAbs().maxCoeff(), 1e-9);
    ++r;
  }
  EXPECT_EQ(r, s.rows.size());
}

TEST(Covariance, OuterProductAndZero) {
  Vector v(2);
  v << 1.0, 2.0;
  const double len = v.norm();
  data::ScoreMatrix s;
  s.scores = Matrix::Constant(1, 1, len);
  s.rows = {0};
  const auto c = reconstruct_covariance(Frame(v / len), s, 3);
  Matrix expect(2, 2);
  expect << 1, 2, 2, 4;
  EXPECT_LE((c.sigma - expect / 3.0).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(c.eigenvalues(0), 5.0 / 3.0, 1e-14);

  data::ScoreMatrix z;
  z.scores = Matrix::Zero(4, 2);
  z.rows = {0, 1, 2, 3};
  const auto zc = reconstruct_covariance(Frame(Matrix::Identity(5, 2)), z, 4);
  EXPECT_EQ(zc.sigma, Matrix::Zero(5, 5));
}

TEST(Covariance, SpectrumMatchesReconstructedRows) {
  std::mt19937_64 g(17);
  const Index n = 30, d = 8, k = 3;
  const Frame v(oracle::random_frame(d, k, g));
  data::ScoreMatrix s;
  s.scores = oracle::gaussian(n, k, g);
  s.rows.resize(n);
  std::iota(s.rows.begin(), s.rows.end(), 0);
  const auto c = reconstruct_covariance(v, s, n);
  const Matrix yhat = s.scores * v.matrix().transpose() / std::sqrt(static_cast<double>(n));
  const Vector sv = oracle::singular_values(yhat);
  for (Index j = 0; j < k; ++j) EXPECT_NEAR(c.eigenvalues(j), sv(j) * sv(j), 1e-10);
  EXPECT_LE((c.sigma - yhat.transpose() * yhat).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Incoherence, Examples) {
  const Index d = 16;
  Vector flat(d);
  for (Index j = 0; j < d; ++j) flat(j) = (j % 3 == 0 ? -1.0 : 1.0) / 4.0;
  EXPECT_NEAR(incoherence(Frame(flat)), 1.0, 1e-15);
  EXPECT_NEAR(incoherence(Frame(Matrix::Identity(d, 1))), 4.0, 1e-15);
}
