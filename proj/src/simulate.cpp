#include "primepca/simulate.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "primepca/error.hpp"

namespace primepca::sim {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

Rng rng_split(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

namespace {

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument(std::string("missingness: ") + what + " must lie in [0, 1], got " +
                          std::to_string(p));
  }
}

void check_range(double lo, double hi, const char* what) {
  check_prob(lo, what);
  check_prob(hi, what);
  if (lo > hi) throw InvalidArgument(std::string("missingness: empty range for ") + what);
}

template <class Rate>
Mask bernoulli_mask(Index n, Index d, Rng& rng, Rate rate) {
  Mask m(n, d);
  // Row-major draw order, so a prefix of rows does not depend on d's layout.
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = rng.bernoulli(rate(i, j)) ? 1 : 0;
  }
  return m;
}

}  // namespace

void validate(const MissingnessSpec& spec, Index n, Index d) {
  if (n < 1 || d < 1) throw InvalidArgument("missingness: n and d must be positive");
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Homogeneous>) {
          check_prob(s.p, "p");
        } else if constexpr (std::is_same_v<T, RowColProduct>) {
          check_range(s.row_lo, s.row_hi, "row rate");
          check_range(s.col_lo, s.col_hi, "column rate");
        } else if constexpr (std::is_same_v<T, CheckerColumns> || std::is_same_v<T, CheckerRows>) {
          check_prob(s.p_odd, "p_odd");
          check_prob(s.p_even, "p_even");
        } else if constexpr (std::is_same_v<T, TwoPattern>) {
          if (d < 2) throw InvalidArgument("missingness: two-pattern mechanism needs d >= 2");
        } else {
          if (s.probs.rows() != n || s.probs.cols() != d) {
            throw InvalidArgument("missingness: explicit probability matrix has wrong shape");
          }
          for (Index j = 0; j < d; ++j) {
            for (Index i = 0; i < n; ++i) check_prob(s.probs(i, j), "explicit probability");
          }
        }
      },
      spec);
}

Mask generate_mask(const MissingnessSpec& spec, Index n, Index d, std::uint64_t seed) {
  validate(spec, n, d);
  Rng rng(seed);
  return std::visit(
      [&](const auto& s) -> Mask {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Homogeneous>) {
          return bernoulli_mask(n, d, rng, [&](Index, Index) { return s.p; });
        } else if constexpr (std::is_same_v<T, RowColProduct>) {
          Vector p(n), q(d);
          for (Index i = 0; i < n; ++i) p(i) = rng.uniform(s.row_lo, s.row_hi);
          for (Index j = 0; j < d; ++j) q(j) = rng.uniform(s.col_lo, s.col_hi);
          return bernoulli_mask(n, d, rng, [&](Index i, Index j) { return p(i) * q(j); });
        } else if constexpr (std::is_same_v<T, CheckerColumns>) {
          // index j is 0-based, so even j is an odd column
          return bernoulli_mask(n, d, rng,
                                [&](Index, Index j) { return j % 2 == 0 ? s.p_odd : s.p_even; });
        } else if constexpr (std::is_same_v<T, CheckerRows>) {
          return bernoulli_mask(n, d, rng,
                                [&](Index i, Index) { return i % 2 == 0 ? s.p_odd : s.p_even; });
        } else if constexpr (std::is_same_v<T, TwoPattern>) {
          Mask m = Mask::Ones(n, d);
          for (Index i = 0; i < n; ++i) {
            if (rng.bernoulli(0.5)) {
              m(i, 1) = 0;
            } else {
              m(i, 0) = 0;
            }
          }
          return m;
        } else {
          return bernoulli_mask(n, d, rng, [&](Index i, Index j) { return s.probs(i, j); });
        }
      },
      spec);
}

void validate(const DataModelSpec& spec) {
  if (spec.n < 1 || spec.d < 1 || spec.K < 1) {
    throw InvalidArgument("data model: n, d and K must be positive");
  }
  if (spec.K > spec.d) throw InvalidArgument("data model: K exceeds d");
  if (spec.score_variances.size() != spec.K) {
    throw InvalidArgument("data model: need one score variance per component");
  }
  for (Index k = 0; k < spec.K; ++k) {
    if (!(spec.score_variances(k) >= 0.0) || !std::isfinite(spec.score_variances(k))) {
      throw InvalidArgument("data model: score variances must be finite and nonnegative");
    }
  }
  if (std::holds_alternative<BlockSign>(spec.frame) && (spec.K != 2 || spec.d % 2 != 0)) {
    throw InvalidArgument("data model: block-sign frame requires K = 2 and even d");
  }
  if (const auto* e = std::get_if<ExplicitFrame>(&spec.frame)) {
    if (e->frame.dim() != spec.d || e->frame.rank() != spec.K) {
      throw InvalidArgument("data model: explicit frame shape does not match d x K");
    }
  }
}

linalg::Frame block_sign_frame(Index d) {
  if (d < 2 || d % 2 != 0) throw InvalidArgument("block_sign_frame: d must be even");
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix v(d, 2);
  v.col(0).setConstant(s);
  v.col(1).head(d / 2).setConstant(s);
  v.col(1).tail(d / 2).setConstant(-s);
  return linalg::Frame(std::move(v));
}

namespace {

linalg::Frame gaussian_eigvecs(Index samples, Index d, Index K, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(samples, d);
  for (Index i = 0; i < samples; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  Matrix cov = Matrix::Zero(d, d);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(samples));
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return linalg::top_k_eigenvectors(cov, K).vectors;
}

}  // namespace

linalg::Frame seeded_gaussian_frame(const SeededGaussianEigvecs& src, Index d, Index K) {
  if (src.samples < 1 || K < 1 || K > d) {
    throw InvalidArgument("seeded_gaussian_frame: invalid shape");
  }
  using Key = std::tuple<Index, std::uint64_t, double, Index, Index>;
  static std::mutex mu;
  static std::map<Key, linalg::Frame> cache;
  const Key key{src.samples, src.seed, src.max_incoherence, d, K};
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  constexpr int kMaxScan = 10000;
  for (int attempt = 0; attempt < kMaxScan; ++attempt) {
    linalg::Frame f = gaussian_eigvecs(src.samples, d, K, src.seed + static_cast<std::uint64_t>(attempt));
    const double mu_hat = std::sqrt(static_cast<double>(d)) * f.matrix().cwiseAbs().maxCoeff();
    if (src.max_incoherence <= 0.0 || mu_hat < src.max_incoherence) {
      return cache.emplace(key, std::move(f)).first->second;
    }
  }
  throw InvalidArgument("seeded_gaussian_frame: no seed met the incoherence bound");
}

linalg::Frame resolve_frame(const DataModelSpec& spec) {
  return std::visit(
      [&](const auto& s) -> linalg::Frame {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BlockSign>) {
          return block_sign_frame(spec.d);
        } else if constexpr (std::is_same_v<T, SeededGaussianEigvecs>) {
          return seeded_gaussian_frame(s, spec.d, spec.K);
        } else {
          return s.frame;
        }
      },
      spec.frame);
}

SimulatedData generate_data(const DataModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  linalg::Frame truth = resolve_frame(spec);
  Rng rng(seed);
  const Index n = spec.n, d = spec.d, K = spec.K;
  Matrix u(n, K);
  const Vector sd = spec.score_variances.cwiseSqrt();
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < K; ++k) u(i, k) = sd(k) * rng.normal();
  }
  Matrix y = u * truth.matrix().transpose();
  if (spec.noise) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) y(i, j) += rng.normal();
    }
  }
  return SimulatedData{std::move(y), std::move(truth), std::move(u)};
}

}  // namespace primepca::sim
