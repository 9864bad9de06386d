#pragma once

#include <lamina/coincidence.hpp>

namespace lamina {

/// Chained chart-wise convex-combination homotopy between plaquewise-close
/// foliation maps. Each segment blends the running map toward the target in
/// one chart's coordinates through a bump that is 1 on the segment's compact
/// core, so H(.,1) equals the target everywhere and every track stays inside
/// a single leaf.
class IntegrableHomotopy {
 public:
  IntegrableHomotopy(const FoliationMap& from, const FoliationMap& to,
                     std::vector<SpPatch> segments);

  const FoliationMap& from() const { return from_; }
  const FoliationMap& to() const { return to_; }
  size_t segment_count() const { return segs_.size(); }

  AmbientPoint eval(const AmbientPoint& x, double t) const;

 private:
  AmbientPoint blend(const AmbientPoint& x, const AmbientPoint& current, size_t seg,
                     double tau) const;
  FoliationMap from_, to_;
  std::vector<SpPatch> segs_;
};

// The convex-combination construction over the patches of `nbhd`; requires
// sp_contains(nbhd, psi) at order 0 and throws "maps not plaquewise close"
// otherwise.
IntegrableHomotopy straight_line_homotopy(const FoliationMap& phi, const FoliationMap& psi,
                                          const SpNeighborhood& nbhd,
                                          const Options& opts = {});

/// Generic evaluable homotopy, for hand-built examples and for the
/// concatenation / reversal closures.
struct HomotopyFn {
  const FoliatedAtlas* target = nullptr;
  std::function<Vec(const Vec&, double)> f;
};
HomotopyFn as_homotopy_fn(const IntegrableHomotopy& H);
HomotopyFn concatenate(const HomotopyFn& first, const HomotopyFn& second);
HomotopyFn time_reversed(const HomotopyFn& H);

struct TrackReport {
  bool pass = false;
  double max_violation = 0.0;
  int samples = 0;
};
// Max variation of the transverse chart coordinate along t-tracks.
TrackReport leaf_track_check(const HomotopyFn& H, int samples, int t_steps,
                             std::uint64_t seed, double tol_plaque = 1e-9);
TrackReport leaf_track_check(const IntegrableHomotopy& H, int samples, int t_steps,
                             std::uint64_t seed, double tol_plaque = 1e-9);

struct PerturbationSchedule {
  double radius0 = 1e-2;  // first draw radius, halved per retry
  int max_attempts = 20;
  // When set, a draw is accepted only if every traced point is leafwise
  // simple and each component carries one sign; otherwise ls-transversality
  // at traced points suffices.
  bool require_simple = false;
  double nbhd_eps = 0.0;  // 0: derived from the schedule
};

struct ComponentSummary {
  int components = 0;
  int degenerate = 0;
  int non_simple_points = 0;
  bool region_degenerate = false;
};

struct PerturbationCertificate {
  int attempts = 0;
  bool input_already_transverse = false;
  bool verified = false;
  std::vector<double> draw_radii;
  std::vector<double> draw_norms;
  ComponentSummary summary;
  SpReport sp_report;
  TrackReport homotopy_track;
  std::string failure;
};

struct PerturbResult {
  FoliationMap xi;    // perturbed first map
  FoliationMap zeta;  // second map, returned unchanged
  PerturbationCertificate cert;
  FindReport components;  // of the pair (xi, zeta)
};

struct PerturbationExhausted : NumericalError {
  PerturbationCertificate best;
  explicit PerturbationExhausted(PerturbationCertificate cert)
      : NumericalError("transversality not achieved"), best(std::move(cert)) {}
};

// Randomized leafwise perturbation of phi until every located coincidence
// component of (xi, psi) is ls-transverse at the traced points. One leaf
// shift is drawn per attempt and applied through per-chart bumps, so the
// draw acts like a leafwise translation wherever some bump saturates.
// Throws "transversality not achieved" (carrying the best certificate in
// the message) after max_attempts.
PerturbResult perturb_to_ls_transversality(const FoliationMap& phi, const FoliationMap& psi,
                                           std::uint64_t rng_seed,
                                           const PerturbationSchedule& schedule = {},
                                           const Options& opts = {});

}  // namespace lamina
