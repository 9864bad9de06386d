#pragma once

#include <lamina/maps.hpp>

namespace lamina {

/// Transverse invariant measure given by per-chart continuous densities on
/// the local transversals. Holonomy invariance is a checkable property, not
/// a construction guarantee.
struct TransverseDensity {
  const FoliatedAtlas* atlas = nullptr;
  std::string family;
  std::string support_tag = "full";
  std::function<double(int chart, const Vec& t)> h;

  double density(int chart, const Vec& t) const { return h(chart, t); }
  TransverseDensity scaled(double c) const;
};

TransverseDensity constant_density(const FoliatedAtlas& atlas, double value);
// q = 1 density from a periodic profile of the transverse coordinate.
TransverseDensity fourier_density(const FoliatedAtlas& atlas, const FourierSeries& profile);

struct InvarianceWorst {
  int source = -1, target = -1;
  Vec t;
  double violation = 0.0;
};
struct InvarianceReport {
  bool pass = false;
  double max_violation = 0.0;
  int transitions_checked = 0;
  InvarianceWorst worst;
};

// Max violation of h_j(h_ij(t)) |det Dh_ij(t)| = h_i(t) over transition
// overlap samples; passes iff it stays within tol_inv.
InvarianceReport check_holonomy_invariance(const TransverseDensity& density,
                                           int samples_per_transition = 33,
                                           double tol_inv = 1e-7);

// Lambda-measure of a q=1 closed (or open) polyline transverse to the
// leaves: composite trapezoid of the density against the transverse
// coordinate, chart-switched through a smoothstep partition of unity.
// `chart_choice_bias` selects the k-th admissible chart per segment and
// disables the blend; used to test chart independence.
double integrate_over_transversal(const TransverseDensity& density, const Polyline& line,
                                  const Options& opts = {}, int chart_choice_bias = -1);

// Signed line integral of the density against the transverse coordinate in
// transversely oriented charts (the basic-form viewpoint of the density).
// Increments telescope, so back-and-forth wiggles finer than the polyline
// resolution cancel exactly; for a monotone traversal this is +/- the
// Lambda-measure.
double transversal_form_integral(const TransverseDensity& density, const Polyline& line,
                                 const Options& opts = {});

// q = 0 variant: weighted sum of density values at isolated points.
double integrate_over_transversal(const TransverseDensity& density,
                                  const std::vector<std::pair<AmbientPoint, double>>& pts);

}  // namespace lamina
