#pragma once
// Seeded generators for observation masks and low-rank-plus-noise data.
//
// All generators are pure functions of (spec, seed). Gaussians come from the
// Marsaglia polar transform of a 53-bit uniform stream drawn from
// std::mt19937_64, so a seed reproduces the same bits on every platform.

#include <cstdint>
#include <random>
#include <variant>

#include "primepca/linalg.hpp"

namespace primepca::sim {

// SplitMix64 mix of (seed, stream); distinct streams give unrelated seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }
  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Rng rng_split(std::uint64_t seed, std::uint64_t stream);

// ---- observation mechanisms ----

struct Homogeneous {
  double p = 0.05;
};
// P_i ~ U[row_lo, row_hi], Q_j ~ U[col_lo, col_hi], omega_ij ~ Bernoulli(P_i Q_j).
struct RowColProduct {
  double row_lo = 0.0, row_hi = 0.2;
  double col_lo = 0.05, col_hi = 0.95;
};
// Rate p_odd on odd columns (1-based), p_even on even columns.
struct CheckerColumns {
  double p_odd = 0.19, p_even = 0.01;
};
// Rate p_odd on odd rows (1-based), p_even on even rows.
struct CheckerRows {
  double p_odd = 0.18, p_even = 0.02;
};
// Each row observes all of columns 3..d and exactly one of columns 1, 2, each
// with probability 1/2.
struct TwoPattern {};
struct ExplicitProbs {
  Matrix probs;
};

using MissingnessSpec =
    std::variant<Homogeneous, RowColProduct, CheckerColumns, CheckerRows, TwoPattern, ExplicitProbs>;

// Throws InvalidArgument on probabilities outside [0, 1] or shape mismatch.
void validate(const MissingnessSpec& spec, Index n, Index d);

Mask generate_mask(const MissingnessSpec& spec, Index n, Index d, std::uint64_t seed);

// ---- data models ----

// d/2 rows of (1, 1)/sqrt(d) over d/2 rows of (1, -1)/sqrt(d). Needs even d.
struct BlockSign {};
// Top-K eigenvectors of the sample covariance of `samples` N(0, I_d) draws.
// Internal seeds are scanned upward from `seed` until sqrt(d) ||V||_max falls
// below `max_incoherence` (no scan when it is <= 0).
struct SeededGaussianEigvecs {
  Index samples = 2000;
  std::uint64_t seed = 2019;
  double max_incoherence = 3.63;
};
struct ExplicitFrame {
  linalg::Frame frame;
};

using FrameSource = std::variant<BlockSign, SeededGaussianEigvecs, ExplicitFrame>;

struct DataModelSpec {
  Index n = 2000;
  Index d = 500;
  Index K = 2;
  Vector score_variances;   // diagonal of Sigma_u, length K
  bool noise = false;       // add i.i.d. N(0, 1) entries
  FrameSource frame = BlockSign{};
};

void validate(const DataModelSpec& spec);

linalg::Frame block_sign_frame(Index d);

// Memoised per process; safe to call concurrently.
linalg::Frame seeded_gaussian_frame(const SeededGaussianEigvecs& src, Index d, Index K);

linalg::Frame resolve_frame(const DataModelSpec& spec);

struct SimulatedData {
  Matrix y;              // n x d, U V^T + Z
  linalg::Frame truth;   // V_K
  Matrix scores;         // U, n x K
};

SimulatedData generate_data(const DataModelSpec& spec, std::uint64_t seed);

}  // namespace primepca::sim
