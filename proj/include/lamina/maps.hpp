#pragma once

#include <lamina/geometry.hpp>

#include <memory>

namespace lamina {

struct MapClaims {
  bool leaf_preserving = false;
  // Declared leaf-space partner (a scenario map name); the actual check is
  // check_leaf_space_compatible, which pairs never skip.
  std::string leaf_space_compatible_with;
};

/// Numerically evaluable foliation map between foliated tori. Evaluators must
/// be pure and accept any coordinate representative; exact ambient Jacobians
/// are optional and finite differences are used when absent.
struct FoliationMap {
  const FoliatedAtlas* source = nullptr;
  const FoliatedAtlas* target = nullptr;
  std::string family;
  std::function<Vec(const Vec&)> eval_fn;
  std::function<Mat(const Vec&)> jac_fn;
  MapClaims claims;

  AmbientPoint operator()(const AmbientPoint& x) const { return AmbientPoint(eval_fn(x.x)); }
  bool has_exact_jacobian() const { return static_cast<bool>(jac_fn); }
  // n x n derivative in ambient coordinates, exact or Richardson-refined
  // central differences. Throws "not differentiable at x" if differences
  // fail to settle.
  Mat ambient_jacobian(const Vec& x) const;
};

struct FourierSeries {
  double a0 = 0.0;
  std::vector<FourierTerm> terms;
  double eval(double u) const;
  double deriv(double u) const;
  bool empty() const { return a0 == 0.0 && terms.empty(); }
};

FoliationMap identity_map(const FoliatedAtlas& atlas);
FoliationMap translation_map(const FoliatedAtlas& atlas, const Vec& shift);
// Linear-torus family (q = 1): keeps the transverse coordinate, sends leaf
// coordinates v to A v + offset(x_T) (+ fourier(v) when p = 1). A must be an
// integer matrix so the map descends to the torus.
FoliationMap leaf_map(const FoliatedAtlas& atlas, const Mat& A,
                      const std::vector<FourierSeries>& transverse_offset,
                      const FourierSeries& leaf_fourier = {});
FoliationMap compose(const FoliationMap& outer, const FoliationMap& inner);
FoliationMap inverse_map(const FoliationMap& f);
// Shift of chart leaf coordinates by bump(x) * c inside the bump support,
// identity elsewhere; the building block of transversality perturbations.
FoliationMap bump_shift_map(const FoliatedAtlas& atlas, int chart_id,
                            const BoxBump& bump, const Vec& c);

AmbientPoint evaluate(const FoliationMap& map, const AmbientPoint& x);

// Chart-coordinate Jacobian D(theta' o map o theta^{-1}), rows and columns
// ordered (transverse block, leaf block). Charts default to the max-margin
// charts at x and map(x).
Mat full_jacobian(const FoliationMap& map, const AmbientPoint& x, int src_chart = -1,
                  int tgt_chart = -1, const Options& opts = {});
Mat full_jacobian_in(const FoliationMap& map, const AmbientPoint& x, const Chart& src,
                     const Chart& tgt, const Options& opts = {});

// Leaf block of full_jacobian in the oriented leaf frames of the two charts.
// Throws "map not plaque-local at x" when the transverse rows depend on the
// leaf coordinates beyond tolerance.
Mat leafwise_jacobian(const FoliationMap& map, const AmbientPoint& x, int src_chart = -1,
                      int tgt_chart = -1, const Options& opts = {});

struct CompatViolation {
  Vec at;
  std::string what;
  double deviation = 0.0;
};
struct CompatReport {
  bool compatible = true;
  int checked = 0;
  double max_transverse_dev = 0.0;
  std::vector<CompatViolation> violations;
};
// Checks that two maps induce the same map on the leaf space: images always
// share a leaf (model-exact predicate), and near-coincident images share a
// plaque of a common chart up to tol_plaque.
CompatReport check_leaf_space_compatible(const FoliationMap& a, const FoliationMap& b,
                                         int samples, std::uint64_t seed,
                                         const Options& opts = {});

bool verify_leaf_preserving(const FoliationMap& map, int samples, std::uint64_t seed);

// Samples nearby point pairs and rejects evaluators that jump beyond a
// Lipschitz bound estimated from the same samples.
void validate_map_continuity(const FoliationMap& map, int samples, std::uint64_t seed);

/// One compact K_i with its source chart, assigned target chart, bound
/// eps_i, and the bump used by homotopies supported around K_i. The target
/// chart is synthesized around the image box through the atlas chart
/// factory, since the finite cover's boxes need not absorb arbitrary images.
struct SpPatch {
  Box K;
  int source_chart = -1;
  Chart target;
  double eps = 0.1;
  BoxBump bump;
};

/// Strong-plaquewise neighborhood data N^r(base, Theta, Theta', K, E): the
/// K_i cover the torus, K_i lies in its source chart, and base(K_i) lies in
/// the assigned target chart.
struct SpNeighborhood {
  FoliationMap base;
  int order = 0;  // r in {0,1}
  double leaf_slack = 0.0;
  std::vector<SpPatch> patches;
};

// Builds an sp-neighborhood of `base` whose target charts absorb images of
// the K_i fattened by `leaf_slack` along leaf directions. Throws when no
// subdivision gives every K_i a single target chart.
SpNeighborhood derive_sp_neighborhood(const FoliationMap& base, int order,
                                      double leaf_slack, double eps,
                                      const Options& opts = {});

struct SpReport {
  bool contains = false;
  double max_c0 = 0.0;        // chart-coordinate C^0 deviation
  double max_c1 = 0.0;        // chart-coordinate Jacobian deviation (order 1)
  double max_plaque_dev = 0.0;
  int failed_patch = -1;
  std::vector<std::string> notes;
};
// The three membership conditions on a verification grid over each K_i:
// psi(K_i) in the target chart, equal local projections, and C^k chart
// deviations below eps_i for k <= order.
SpReport sp_contains(const SpNeighborhood& nbhd, const FoliationMap& psi,
                     const Options& opts = {});

}  // namespace lamina
