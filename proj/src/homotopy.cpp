#include <lamina/homotopy.hpp>

#include <algorithm>

namespace lamina {

IntegrableHomotopy::IntegrableHomotopy(const FoliationMap& from, const FoliationMap& to,
                                       std::vector<SpPatch> segments)
    : from_(from), to_(to), segs_(std::move(segments)) {}

AmbientPoint IntegrableHomotopy::blend(const AmbientPoint& x, const AmbientPoint& current,
                                       size_t seg, double tau) const {
  const SpPatch& patch = segs_[seg];
  double lam = patch.bump.value(x.x);
  if (lam == 0.0 || tau == 0.0) return current;
  const Chart& c = patch.target;
  auto [tc, bc] = c.to_coords(current);
  auto [tp, bp] = c.to_coords(to_(x));
  double s = tau * lam;
  // a + s(b-a): exact at s=0, and exact at s=1 up to one rounding of (b-a).
  Vec tb = tc + s * (tp - tc);
  Vec bb = bc + s * (bp - bc);
  return c.from_coords(tb, bb);
}

AmbientPoint IntegrableHomotopy::eval(const AmbientPoint& x, double t) const {
  if (t <= 0.0) return from_(x);
  if (t >= 1.0) return to_(x);
  const size_t m = segs_.size();
  double scaled = t * static_cast<double>(m);
  size_t active = std::min(m - 1, static_cast<size_t>(scaled));
  double tau = scaled - static_cast<double>(active);
  AmbientPoint cur = from_(x);
  for (size_t i = 0; i < active; ++i) cur = blend(x, cur, i, 1.0);
  return blend(x, cur, active, tau);
}

IntegrableHomotopy straight_line_homotopy(const FoliationMap& phi, const FoliationMap& psi,
                                          const SpNeighborhood& nbhd, const Options& opts) {
  SpReport rep = sp_contains(nbhd, psi, opts);
  if (!rep.contains) throw VerificationError("maps not plaquewise close");
  return IntegrableHomotopy(phi, psi, nbhd.patches);
}

HomotopyFn as_homotopy_fn(const IntegrableHomotopy& H) {
  HomotopyFn fn;
  fn.target = H.to().target;
  IntegrableHomotopy copy = H;
  fn.f = [copy](const Vec& x, double t) { return copy.eval(AmbientPoint{x}, t).x; };
  return fn;
}

HomotopyFn concatenate(const HomotopyFn& first, const HomotopyFn& second) {
  HomotopyFn fn;
  fn.target = first.target;
  auto f1 = first.f, f2 = second.f;
  fn.f = [f1, f2](const Vec& x, double t) {
    return t <= 0.5 ? f1(x, 2.0 * t) : f2(x, 2.0 * t - 1.0);
  };
  return fn;
}

HomotopyFn time_reversed(const HomotopyFn& H) {
  HomotopyFn fn;
  fn.target = H.target;
  auto f = H.f;
  fn.f = [f](const Vec& x, double t) { return f(x, 1.0 - t); };
  return fn;
}

TrackReport leaf_track_check(const HomotopyFn& H, int samples, int t_steps,
                             std::uint64_t seed, double tol_plaque) {
  TrackReport rep;
  rep.samples = samples;
  Rng rng(seed);
  const FoliatedAtlas& atlas = *H.target;
  for (int s = 0; s < samples; ++s) {
    Vec x(atlas.n);
    for (int i = 0; i < atlas.n; ++i) x[i] = rng.uniform01();
    AmbientPoint prev{H.f(x, 0.0)};
    for (int k = 1; k <= t_steps; ++k) {
      AmbientPoint cur{H.f(x, static_cast<double>(k) / t_steps)};
      // Compare transverse coordinates in the best common chart.
      double best = std::numeric_limits<double>::infinity();
      for (const Chart& c : atlas.charts) {
        if (!c.box.contains(prev) || !c.box.contains(cur)) continue;
        double dev =
            (c.to_coords(prev).first - c.to_coords(cur).first).cwiseAbs().maxCoeff();
        best = std::min(best, dev);
      }
      if (std::isinf(best)) best = torus_delta(cur, prev).cwiseAbs().maxCoeff();
      rep.max_violation = std::max(rep.max_violation, best);
      prev = cur;
    }
  }
  rep.pass = rep.max_violation < tol_plaque;
  return rep;
}

TrackReport leaf_track_check(const IntegrableHomotopy& H, int samples, int t_steps,
                             std::uint64_t seed, double tol_plaque) {
  return leaf_track_check(as_homotopy_fn(H), samples, t_steps, seed, tol_plaque);
}

namespace {

// Per-chart bumps of the perturbation: chart boxes shrunk far enough that
// the cores still cover the torus.
std::vector<std::pair<int, BoxBump>> perturbation_bumps(const FoliatedAtlas& atlas) {
  std::vector<std::pair<int, BoxBump>> bumps;
  for (const Chart& c : atlas.charts) {
    double shrink = 0.02 * c.box.len.minCoeff();
    double pad = 0.08 * c.box.len.minCoeff();
    BoxBump b;
    b.support = c.box.shrunk(shrink);
    b.pad = pad;
    bumps.emplace_back(c.id, b);
  }
  return bumps;
}

FoliationMap apply_draw(const FoliationMap& phi,
                        const std::vector<std::pair<int, BoxBump>>& bumps, const Vec& c) {
  FoliationMap out = phi;
  for (const auto& [chart_id, bump] : bumps)
    out = compose(bump_shift_map(*phi.source, chart_id, bump, c), out);
  out.family = phi.family + "+draw";
  out.claims.leaf_preserving = phi.claims.leaf_preserving;
  return out;
}

ComponentSummary summarize(const FindReport& find) {
  ComponentSummary s;
  s.components = static_cast<int>(find.components.size());
  s.region_degenerate = find.region_degenerate;
  for (const auto& comp : find.components) {
    if (comp.degenerate_flag || comp.stalled) ++s.degenerate;
    for (const auto& k : comp.cls)
      if (k.kind != PointKind::leafwise_simple) ++s.non_simple_points;
  }
  return s;
}

bool draw_accepted(const FindReport& find, bool require_simple) {
  if (require_simple) return find.all_simple_constant_sign();
  return find.all_ls_transverse() && find.all_closed();
}

}  // namespace

PerturbResult perturb_to_ls_transversality(const FoliationMap& phi, const FoliationMap& psi,
                                           std::uint64_t rng_seed,
                                           const PerturbationSchedule& schedule,
                                           const Options& opts) {
  // Accept the input pair untouched when it already verifies.
  {
    DefectField defect(phi, psi, opts);
    FindReport find = find_components(defect, opts.grid_per_axis, opts);
    if (draw_accepted(find, schedule.require_simple)) {
      PerturbResult res{phi, psi, {}, std::move(find)};
      res.cert.input_already_transverse = true;
      res.cert.verified = true;
      res.cert.summary = summarize(res.components);
      return res;
    }
  }

  const FoliatedAtlas& atlas = *phi.source;
  int multiplicity = 1 << atlas.n;
  double slack = multiplicity * schedule.radius0 + 0.02;
  double eps = schedule.nbhd_eps > 0.0 ? schedule.nbhd_eps
                                       : std::max(0.05, 1.5 * multiplicity * schedule.radius0);
  SpNeighborhood nbhd = derive_sp_neighborhood(phi, 0, slack, eps, opts);
  auto bumps = perturbation_bumps(atlas);

  PerturbationCertificate best;
  best.failure = "no attempt verified";
  for (int attempt = 0; attempt < schedule.max_attempts; ++attempt) {
    double radius = schedule.radius0 * std::pow(0.5, attempt);
    Rng rng(mix_seed(rng_seed, static_cast<std::uint64_t>(attempt)));
    Vec c = rng.ball(atlas.p, radius);

    FoliationMap xi = apply_draw(phi, bumps, c);
    DefectField defect(xi, psi, opts);
    FindReport find = find_components(defect, opts.grid_per_axis, opts);

    PerturbationCertificate cert = best;
    cert.attempts = attempt + 1;
    cert.draw_radii.push_back(radius);
    cert.draw_norms.push_back(c.norm());
    cert.summary = summarize(find);
    if (!draw_accepted(find, schedule.require_simple)) {
      cert.failure = "draw rejected by component verification";
      best = cert;
      continue;
    }
    cert.sp_report = sp_contains(nbhd, xi, opts);
    if (!cert.sp_report.contains) {
      cert.failure = "perturbation left the declared neighborhood";
      best = cert;
      continue;
    }
    IntegrableHomotopy H = straight_line_homotopy(phi, xi, nbhd, opts);
    cert.homotopy_track =
        leaf_track_check(H, 60, 16, mix_seed(rng_seed, 0x747261636bULL), opts.tol_plaque);
    cert.verified = true;
    cert.failure.clear();
    return PerturbResult{std::move(xi), psi, std::move(cert), std::move(find)};
  }
  throw PerturbationExhausted(std::move(best));
}

}  // namespace lamina
