#pragma once

#include <lamina/homotopy.hpp>
#include <lamina/measure.hpp>

namespace lamina {

struct ComponentContribution {
  CoincidenceComponent component;
  int sign = 0;
  double measure = 0.0;       // Lambda-mass of the traced transversal
  double contribution = 0.0;  // sign * measure
};

struct LefschetzReport {
  double value = 0.0;
  std::string mode;  // "coincidence" or "fixed-point"
  std::vector<ComponentContribution> parts;
  std::optional<PerturbationCertificate> certificate;
  Options tolerances;
  std::uint64_t rng_seed = 0;
  std::vector<std::string> warnings;
  bool perturbed = false;
};

// Sign of det(phi_* - psi_*) on the leaf tangent at a leafwise simple
// coincidence point, in the oriented leaf frames of the charts at x and at
// the common image. Throws "degenerate, no sign" below the rank threshold.
int epsilon_at(const FoliationMap& phi, const FoliationMap& psi, const AmbientPoint& x,
               const Options& opts = {});

// The Lambda-coincidence of (phi, psi): locates the coincidence set, applies
// the randomized leafwise perturbation when any component fails to be
// leafwise simple with one sign, and integrates the epsilon sign against the
// density over every component.
LefschetzReport lambda_coincidence(const FoliationMap& phi, const FoliationMap& psi,
                                   const TransverseDensity& density,
                                   const Options& opts = {});

// Lambda-Lefschetz number: the Lambda-coincidence of (id, phi) with
// graph-mode perturbation (phi perturbed leafwise, the identity untouched).
LefschetzReport lambda_lefschetz(const FoliationMap& phi, const TransverseDensity& density,
                                 const Options& opts = {});

struct InvarianceSuiteReport {
  std::vector<double> values;  // base first, then the family members
  double spread = 0.0;
  bool pass = false;
  std::vector<TrackReport> witnesses;
  std::vector<bool> sp_ok;
};

// Lambda-coincidence of (base_a, m) for every member m of the family, with a
// straight-line homotopy witness from base_b to each member. Passes iff the
// value spread stays within tol_invariance.
InvarianceSuiteReport verify_homotopy_invariance(const FoliationMap& base_a,
                                                 const FoliationMap& base_b,
                                                 const std::vector<FoliationMap>& family,
                                                 const TransverseDensity& density,
                                                 const Options& opts = {});

// Direct integral over the located fixed set, without perturbation; valid
// only when every traced point is leafwise simple. Throws
// "hypothesis violated: Fix not a transversal" otherwise.
double trace_formula_rhs(const FoliationMap& phi, const TransverseDensity& density,
                         const Options& opts = {});

struct CompositeIdentityReport {
  double coincidence_value = 0.0;
  double lefschetz_value = 0.0;
  double difference = 0.0;
  bool pass = false;
};

// Coin_Lambda(phi, psi) against L_Lambda(psi o phi^{-1}) for an invertible
// phi that preserves the density.
CompositeIdentityReport composite_identity_check(const FoliationMap& phi,
                                                 const FoliationMap& psi,
                                                 const TransverseDensity& density,
                                                 const Options& opts = {});

}  // namespace lamina
