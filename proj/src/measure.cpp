#include <lamina/measure.hpp>

#include <algorithm>

namespace lamina {

TransverseDensity TransverseDensity::scaled(double c) const {
  TransverseDensity d = *this;
  auto base = h;
  d.h = [base, c](int chart, const Vec& t) { return c * base(chart, t); };
  d.family = family + "*scale";
  return d;
}

TransverseDensity constant_density(const FoliatedAtlas& atlas, double value) {
  if (value < 0.0) throw std::invalid_argument("density must be nonnegative");
  TransverseDensity d;
  d.atlas = &atlas;
  d.family = "constant";
  d.h = [value](int, const Vec&) { return value; };
  return d;
}

TransverseDensity fourier_density(const FoliatedAtlas& atlas, const FourierSeries& profile) {
  if (atlas.q != 1) throw std::invalid_argument("fourier density requires codimension 1");
  for (int i = 0; i < 257; ++i)
    if (profile.eval(i / 257.0) < 0.0)
      throw std::invalid_argument("density must be nonnegative");
  TransverseDensity d;
  d.atlas = &atlas;
  d.family = "fourier";
  FourierSeries prof = profile;
  d.h = [prof](int, const Vec& t) { return prof.eval(wrap01(t[0])); };
  return d;
}

InvarianceReport check_holonomy_invariance(const TransverseDensity& density,
                                           int samples_per_transition, double tol_inv) {
  const FoliatedAtlas& atlas = *density.atlas;
  const int q = atlas.q;
  InvarianceReport rep;
  Rng rng(0x686f6c6fULL);
  for (const Transition& tr : atlas.transitions) {
    ++rep.transitions_checked;
    const Chart& src = atlas.chart(tr.source);
    const Chart& dst = atlas.chart(tr.target);
    for (int s = 0; s < samples_per_transition; ++s) {
      // Points of the overlap: diagonal sweep plus seeded fill-in.
      Vec x(atlas.n);
      if (s * 2 < samples_per_transition) {
        double f = static_cast<double>(s * 2) / samples_per_transition;
        x = tr.overlap.lo + Vec(tr.overlap.len * (0.02 + 0.96 * f));
      } else {
        for (int i = 0; i < atlas.n; ++i)
          x[i] = tr.overlap.lo[i] + tr.overlap.len[i] * rng.uniform(0.02, 0.98);
      }
      AmbientPoint pt{x};
      Vec ti = src.to_coords(pt).first;
      Vec tj = dst.to_coords(pt).first;
      // d t_j / d t_i along the transversal, by chain rule at the point.
      Mat D = (dst.coords_jacobian(pt) * src.frame(pt)).topLeftCorner(q, q);
      double jac = std::abs(D.determinant());
      double lhs = density.density(tr.target, tj) * jac;
      double rhs = density.density(tr.source, ti);
      double v = std::abs(lhs - rhs);
      if (v > rep.max_violation) {
        rep.max_violation = v;
        rep.worst = {tr.source, tr.target, ti, v};
      }
    }
  }
  rep.pass = rep.max_violation <= tol_inv;
  return rep;
}

namespace {

// Smoothstep weight of a chart at a point, from the box-boundary margin.
double chart_weight(const Chart& c, const AmbientPoint& x) {
  double scale = 0.25 * c.box.len.minCoeff();
  return smoothstep5(std::min(1.0, c.box.margin(x.x) / scale));
}

}  // namespace

namespace {

double polyline_integral(const TransverseDensity& density, const Polyline& line,
                         int chart_choice_bias, bool signed_increments) {
  const FoliatedAtlas& atlas = *density.atlas;
  if (atlas.q != 1)
    throw std::invalid_argument("polyline integration requires codimension 1");
  if (line.pts.size() < 2) return 0.0;

  double total = 0.0;
  size_t tangent_segments = 0, live_segments = 0;
  const size_t nseg = line.segment_count();
  for (size_t k = 0; k < nseg; ++k) {
    const AmbientPoint& a = line.pts[k];
    const AmbientPoint& b = line.pts[(k + 1) % line.pts.size()];
    double seg_len = torus_distance(b, a);
    if (seg_len < 1e-15) continue;
    ++live_segments;

    std::vector<int> common;
    for (const Chart& c : atlas.charts)
      if (c.box.contains(a) && c.box.contains(b)) common.push_back(c.id);
    if (common.empty()) throw std::invalid_argument("not in chart");
    std::sort(common.begin(), common.end(), [&](int i, int j) {
      double mi = std::min(atlas.chart(i).box.margin(a.x), atlas.chart(i).box.margin(b.x));
      double mj = std::min(atlas.chart(j).box.margin(a.x), atlas.chart(j).box.margin(b.x));
      if (mi != mj) return mi > mj;
      return i < j;
    });
    if (chart_choice_bias >= 0)
      common = {common[std::min<size_t>(static_cast<size_t>(chart_choice_bias),
                                        common.size() - 1)]};

    double wsum = 0.0, contrib = 0.0, speed = 0.0;
    for (int id : common) {
      const Chart& c = atlas.chart(id);
      Vec ta = c.to_coords(a).first;
      Vec tb = c.to_coords(b).first;
      double dt = (tb[0] - ta[0]) * c.transverse_orientation;
      if (!signed_increments) dt = std::abs(dt);
      double w = chart_choice_bias >= 0 ? 1.0
                                        : 0.5 * (chart_weight(c, a) + chart_weight(c, b));
      if (w <= 0.0) w = 1e-12;
      double ha = density.density(id, ta);
      double hb = density.density(id, tb);
      contrib += w * 0.5 * (ha + hb) * dt;
      speed += w * std::abs(dt);
      wsum += w;
    }
    total += contrib / wsum;
    if (speed / wsum < 1e-3 * seg_len) ++tangent_segments;
  }
  // A transversal may graze the leaf direction on isolated segments, but a
  // polyline that mostly runs inside leaves is not one.
  if (live_segments > 0 && tangent_segments * 4 > live_segments)
    throw NumericalError("not transverse");
  return total;
}

}  // namespace

double integrate_over_transversal(const TransverseDensity& density, const Polyline& line,
                                  const Options& opts, int chart_choice_bias) {
  (void)opts;
  return polyline_integral(density, line, chart_choice_bias, false);
}

double transversal_form_integral(const TransverseDensity& density, const Polyline& line,
                                 const Options& opts) {
  (void)opts;
  return polyline_integral(density, line, -1, true);
}

double integrate_over_transversal(const TransverseDensity& density,
                                  const std::vector<std::pair<AmbientPoint, double>>& pts) {
  const FoliatedAtlas& atlas = *density.atlas;
  double total = 0.0;
  for (const auto& [pt, w] : pts) {
    int id = atlas.charts_containing(pt)[0];
    total += w * density.density(id, atlas.chart(id).to_coords(pt).first);
  }
  return total;
}

}  // namespace lamina
