#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamina {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy mirrored by the CLI exit codes:
//   invalid_argument / ScenarioError -> 1 (bad input or precondition)
//   VerificationError               -> 2 (a semantic check failed)
//   NumericalError                  -> 3 (a numeric procedure gave up)
struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& m) : std::runtime_error(m) {}
};
struct VerificationError : std::runtime_error {
  explicit VerificationError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& m) : std::runtime_error(m) {}
};

// Tolerances and knobs shared across the toolkit. Defaults are documented
// here once and quoted in run reports.
struct Options {
  double tol_plaque = 1e-9;     // transverse-coordinate agreement
  double tol_inv = 1e-7;        // holonomy invariance of densities
  double tol_zero = 1e-10;      // |F| bound for accepted zero-set points
  double tol_rank = 1e-6;       // singular-value threshold for rank decisions
  double dedup_radius = 1e-3;   // Hausdorff radius identifying components
  double trace_step = 1e-3;     // continuation step
  int grid_per_axis = 64;       // seeding grid resolution
  double seed_factor = 0.5;     // seed threshold = factor * cell diag * Lipschitz
  double fd_step = 1e-4;        // central-difference step in chart coordinates
  double tol_invariance = 1e-5; // spread bound for homotopy-invariance suites
  std::uint64_t rng_seed = 1;
  double perturb_radius0 = 1e-2;
  int max_attempts = 20;
  int compat_samples = 256;
  bool sp_strict = true;        // plaque condition fails (vs warns) above tol_plaque
};

inline double wrap01(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r -= 1.0;
  if (r < 0.0) r += 1.0;
  return r;
}

inline Vec wrap01(const Vec& x) {
  Vec r(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) r[i] = wrap01(x[i]);
  return r;
}

// Signed representative of x-y in (-1/2, 1/2].
inline double circle_delta(double x, double y) {
  double d = wrap01(x - y);
  if (d > 0.5) d -= 1.0;
  return d;
}

inline double circle_dist(double x, double y) { return std::abs(circle_delta(x, y)); }

// Quintic smoothstep and its derivative; C^2 at both ends.
inline double smoothstep5(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}
inline double smoothstep5_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * u * u * (u - 1.0) * (u - 1.0);
}

// xoshiro256++ with splitmix64 seeding; used instead of <random> engines so
// that seeded runs are bit-identical across platforms.
class Rng {
  std::uint64_t s_[4] = {};

 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& w : s_) {
      z += 0x9e3779b97f4a7c15ull;
      std::uint64_t x = z;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
      w = x ^ (x >> 31);
    }
  }
  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }
  // Uniform draw from the closed euclidean ball of given radius.
  Vec ball(int dim, double radius) {
    Vec c(dim);
    for (int tries = 0; tries < 256; ++tries) {
      for (int i = 0; i < dim; ++i) c[i] = uniform(-1.0, 1.0);
      if (c.squaredNorm() <= 1.0) return radius * c;
    }
    return Vec::Zero(dim);
  }
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Central differences with one Richardson refinement. `converged` reports
// whether the two stencil widths agree to a loose bound.
inline Mat richardson_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x,
                               double h, bool* converged = nullptr) {
  const int n = static_cast<int>(x.size());
  Vec f0 = f(x);
  const int m = static_cast<int>(f0.size());
  Mat Jh(m, n), Jh2(m, n);
  for (int pass = 0; pass < 2; ++pass) {
    const double step = pass == 0 ? h : h / 2.0;
    Mat& J = pass == 0 ? Jh : Jh2;
    for (int j = 0; j < n; ++j) {
      Vec xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      J.col(j) = (f(xp) - f(xm)) / (2.0 * step);
    }
  }
  if (converged) {
    double scale = 1.0 + Jh2.cwiseAbs().maxCoeff();
    *converged = (Jh2 - Jh).cwiseAbs().maxCoeff() <= 0.15 * scale;
  }
  return (4.0 * Jh2 - Jh) / 3.0;
}

inline int rank_with_threshold(const Vec& singular_values, double tol) {
  int r = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i)
    if (singular_values[i] > tol) ++r;
  return r;
}

inline int sign_of(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

}  // namespace lamina
