#include <lamina/lefschetz.hpp>

#include <algorithm>

namespace lamina {

int epsilon_at(const FoliationMap& phi, const FoliationMap& psi, const AmbientPoint& x,
               const Options& opts) {
  AmbientPoint ya = phi(x), yb = psi(x);
  auto common = phi.target->in_good_saturation(ya, yb, opts.tol_plaque * 10.0);
  if (!common) throw std::invalid_argument("not a coincidence point");
  int src = phi.source->charts_containing(x)[0];
  Mat Ja = leafwise_jacobian(phi, x, src, *common, opts);
  Mat Jb = leafwise_jacobian(psi, x, src, *common, opts);
  double det = (Ja - Jb).determinant();
  const int p = phi.source->p;
  if (std::abs(det) < std::pow(opts.tol_rank, p)) throw NumericalError("degenerate, no sign");
  return sign_of(det);
}

namespace {

// Lambda-mass of a traced component through the signed form integral, which
// is exact under sub-resolution wiggles of the traced curve (increments
// telescope to the winding). The traversal starts with positive transverse
// speed, so the signed integral of a verified component is nonnegative.
double component_measure(const TransverseDensity& density, const CoincidenceComponent& comp,
                         const Options& opts) {
  return std::abs(transversal_form_integral(density, comp.line, opts));
}

LefschetzReport run_pair(const FoliationMap& a, const FoliationMap& b,
                         const TransverseDensity& density, const Options& opts,
                         bool graph_mode) {
  LefschetzReport rep;
  rep.mode = graph_mode ? "fixed-point" : "coincidence";
  rep.tolerances = opts;
  rep.rng_seed = opts.rng_seed;

  {
    CompatReport compat = check_leaf_space_compatible(
        a, b, opts.compat_samples, mix_seed(opts.rng_seed, 0x636f6d70ULL), opts);
    if (!compat.compatible)
      throw VerificationError("maps do not induce the same leaf-space map");
  }
  {
    InvarianceReport inv = check_holonomy_invariance(density, 33, opts.tol_inv);
    if (!inv.pass) throw VerificationError("measure not invariant");
  }

  DefectField defect(a, b, opts);
  FindReport find = find_components(defect, opts.grid_per_axis, opts);

  // The pair is used directly only when every component is already leafwise
  // simple with a constant sign; otherwise a verified perturbation replaces
  // it (the value is unchanged by integrable-homotopy invariance).
  if (!find.all_simple_constant_sign()) {
    PerturbationSchedule schedule;
    schedule.radius0 = opts.perturb_radius0;
    schedule.max_attempts = opts.max_attempts;
    schedule.require_simple = true;
    if (graph_mode) {
      PerturbResult res = perturb_to_ls_transversality(b, a, opts.rng_seed, schedule, opts);
      rep.certificate = res.cert;
      // Components were found for the pair (xi, id); the epsilon order is
      // (id, xi), which flips the leaf-block determinant sign for odd p.
      find = std::move(res.components);
      find.flip_signs(a.source->p);
    } else {
      PerturbResult res = perturb_to_ls_transversality(a, b, opts.rng_seed, schedule, opts);
      rep.certificate = res.cert;
      find = std::move(res.components);
    }
    rep.perturbed = !rep.certificate->input_already_transverse;
  }

  for (const std::string& w : find.warnings) rep.warnings.push_back(w);

  double value = 0.0;
  for (auto& comp : find.components) {
    ComponentContribution part;
    part.sign = comp.sign;
    part.measure = component_measure(density, comp, opts);
    part.contribution = part.sign * part.measure;
    value += part.contribution;
    part.component = std::move(comp);
    rep.parts.push_back(std::move(part));
  }
  rep.value = value;
  return rep;
}

}  // namespace

LefschetzReport lambda_coincidence(const FoliationMap& phi, const FoliationMap& psi,
                                   const TransverseDensity& density, const Options& opts) {
  return run_pair(phi, psi, density, opts, false);
}

LefschetzReport lambda_lefschetz(const FoliationMap& phi, const TransverseDensity& density,
                                 const Options& opts) {
  if (!phi.claims.leaf_preserving ||
      !verify_leaf_preserving(phi, opts.compat_samples, mix_seed(opts.rng_seed, 0x6c70ULL)))
    throw VerificationError("map is not leaf preserving");
  FoliationMap id = identity_map(*phi.source);
  return run_pair(id, phi, density, opts, true);
}

InvarianceSuiteReport verify_homotopy_invariance(const FoliationMap& base_a,
                                                 const FoliationMap& base_b,
                                                 const std::vector<FoliationMap>& family,
                                                 const TransverseDensity& density,
                                                 const Options& opts) {
  InvarianceSuiteReport rep;
  rep.values.push_back(lambda_coincidence(base_a, base_b, density, opts).value);

  // One neighborhood of the base absorbs every member.
  double dev = 0.0;
  {
    Rng rng(mix_seed(opts.rng_seed, 0x646576ULL));
    for (int s = 0; s < 128; ++s) {
      Vec x(base_b.source->n);
      for (int i = 0; i < base_b.source->n; ++i) x[i] = rng.uniform01();
      AmbientPoint pt{x};
      AmbientPoint yb = base_b(pt);
      for (const FoliationMap& m : family)
        dev = std::max(dev, torus_distance(m(pt), yb));
    }
  }
  SpNeighborhood nbhd =
      derive_sp_neighborhood(base_b, 0, dev + 0.03, std::max(0.05, 1.5 * dev), opts);

  for (const FoliationMap& m : family) {
    SpReport sp = sp_contains(nbhd, m, opts);
    rep.sp_ok.push_back(sp.contains);
    if (!sp.contains) {
      rep.witnesses.push_back({});
      rep.values.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    IntegrableHomotopy H = straight_line_homotopy(base_b, m, nbhd, opts);
    rep.witnesses.push_back(
        leaf_track_check(H, 60, 16, mix_seed(opts.rng_seed, 0x776974ULL), opts.tol_plaque));
    rep.values.push_back(lambda_coincidence(base_a, m, density, opts).value);
  }

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  bool ok = true;
  for (double v : rep.values) {
    if (std::isnan(v)) {
      ok = false;
      continue;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (const TrackReport& t : rep.witnesses) ok = ok && t.pass;
  rep.spread = hi - lo;
  rep.pass = ok && rep.spread < opts.tol_invariance;
  return rep;
}

double trace_formula_rhs(const FoliationMap& phi, const TransverseDensity& density,
                         const Options& opts) {
  {
    InvarianceReport inv = check_holonomy_invariance(density, 33, opts.tol_inv);
    if (!inv.pass) throw VerificationError("measure not invariant");
  }
  FoliationMap id = identity_map(*phi.source);
  DefectField defect(id, phi, opts);
  FindReport find = find_components(defect, opts.grid_per_axis, opts);
  if (find.region_degenerate || !find.all_simple_constant_sign())
    throw VerificationError("hypothesis violated: Fix not a transversal");
  double value = 0.0;
  for (const auto& comp : find.components)
    value += comp.sign * component_measure(density, comp, opts);
  return value;
}

namespace {

// A density is phi-invariant when the transverse action induced by phi
// preserves it; verified through finite differences of the transverse
// coordinate of the image along a short transverse arc.
void check_density_invariance_under(const FoliationMap& phi,
                                    const TransverseDensity& density, const Options& opts) {
  const FoliatedAtlas& atlas = *phi.source;
  if (atlas.q != 1) return;
  Rng rng(mix_seed(opts.rng_seed, 0x696e76ULL));
  const double h = 1e-5;
  for (int s = 0; s < 64; ++s) {
    Vec x(atlas.n);
    for (int i = 0; i < atlas.n; ++i) x[i] = rng.uniform01();
    AmbientPoint pt{x};
    int src = atlas.charts_containing(pt)[0];
    const Chart& sc = atlas.chart(src);
    auto [t0, b0] = sc.to_coords(pt);
    AmbientPoint shifted = sc.from_coords(Vec(t0.array() + h), b0);
    AmbientPoint y0 = phi(pt), y1 = phi(shifted);
    int tgt = atlas.charts_containing(y0)[0];
    const Chart& tc = atlas.chart(tgt);
    if (!tc.box.contains(y1)) continue;
    double tau0 = tc.to_coords(y0).first[0];
    double tau1 = tc.to_coords(y1).first[0];
    double deriv = (tau1 - tau0) / h;
    double lhs = density.density(tgt, tc.to_coords(y0).first) * std::abs(deriv);
    double rhs = density.density(src, t0);
    if (std::abs(lhs - rhs) > 1e-5 * (1.0 + std::abs(rhs)))
      throw VerificationError("measure not invariant");
  }
}

}  // namespace

CompositeIdentityReport composite_identity_check(const FoliationMap& phi,
                                                 const FoliationMap& psi,
                                                 const TransverseDensity& density,
                                                 const Options& opts) {
  FoliationMap phi_inv = inverse_map(phi);
  {
    Rng rng(mix_seed(opts.rng_seed, 0x696e7665ULL));
    for (int s = 0; s < 64; ++s) {
      Vec x(phi.source->n);
      for (int i = 0; i < phi.source->n; ++i) x[i] = rng.uniform01();
      AmbientPoint pt{x};
      if (torus_distance(phi(AmbientPoint(phi_inv(pt).x)), pt) > 1e-9)
        throw NumericalError("map not invertible on samples");
    }
  }
  check_density_invariance_under(phi, density, opts);

  CompositeIdentityReport rep;
  rep.coincidence_value = lambda_coincidence(phi, psi, density, opts).value;
  FoliationMap g = compose(psi, phi_inv);
  rep.lefschetz_value = lambda_lefschetz(g, density, opts).value;
  rep.difference = std::abs(rep.coincidence_value - rep.lefschetz_value);
  rep.pass = rep.difference < 1e-5;
  return rep;
}

}  // namespace lamina
