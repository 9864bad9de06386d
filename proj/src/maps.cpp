#include <lamina/maps.hpp>

#include <algorithm>

namespace lamina {

Mat FoliationMap::ambient_jacobian(const Vec& x) const {
  if (jac_fn) return jac_fn(x);
  bool ok = true;
  Mat J = richardson_jacobian(
      [this](const Vec& v) {
        Vec y = eval_fn(v);
        return y;
      },
      x, 1e-4, &ok);
  if (!ok) throw NumericalError("not differentiable at x");
  return J;
}

double FourierSeries::eval(double u) const {
  double v = a0;
  for (const FourierTerm& t : terms)
    v += t.sin_coef * std::sin(2.0 * M_PI * t.k * u) +
         t.cos_coef * std::cos(2.0 * M_PI * t.k * u);
  return v;
}

double FourierSeries::deriv(double u) const {
  double v = 0.0;
  for (const FourierTerm& t : terms)
    v += 2.0 * M_PI * t.k *
         (t.sin_coef * std::cos(2.0 * M_PI * t.k * u) -
          t.cos_coef * std::sin(2.0 * M_PI * t.k * u));
  return v;
}

FoliationMap identity_map(const FoliatedAtlas& atlas) {
  FoliationMap m;
  m.source = m.target = &atlas;
  m.family = "identity";
  m.eval_fn = [](const Vec& x) { return x; };
  const int n = atlas.n;
  m.jac_fn = [n](const Vec&) { return Mat::Identity(n, n); };
  m.claims.leaf_preserving = true;
  return m;
}

FoliationMap translation_map(const FoliatedAtlas& atlas, const Vec& shift) {
  if (shift.size() != atlas.n) throw std::invalid_argument("translation dimension mismatch");
  FoliationMap m;
  m.source = m.target = &atlas;
  m.family = "translation";
  Vec s = shift;
  m.eval_fn = [s](const Vec& x) { return Vec(x + s); };
  const int n = atlas.n;
  m.jac_fn = [n](const Vec&) { return Mat::Identity(n, n); };
  bool leafwise = atlas.model_tag == "linear-torus";
  if (leafwise) {
    for (const Chart& c : atlas.charts) {
      for (int ax : c.trans_axes)
        if (std::abs(s[ax]) > 1e-15) leafwise = false;
      break;
    }
  } else {
    leafwise = s.cwiseAbs().maxCoeff() < 1e-15;
  }
  m.claims.leaf_preserving = leafwise;
  return m;
}

FoliationMap leaf_map(const FoliatedAtlas& atlas, const Mat& A,
                      const std::vector<FourierSeries>& transverse_offset,
                      const FourierSeries& leaf_fourier) {
  if (atlas.model_tag != "linear-torus")
    throw std::invalid_argument("leaf_map requires a linear torus foliation");
  if (atlas.q != 1) throw std::invalid_argument("leaf_map requires codimension 1");
  const int p = atlas.p;
  if (A.rows() != p || A.cols() != p) throw std::invalid_argument("leaf matrix size mismatch");
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (std::abs(A(i, j) - std::round(A(i, j))) > 1e-12)
        throw std::invalid_argument("leaf matrix must have integer entries");
  if (!transverse_offset.empty() && static_cast<int>(transverse_offset.size()) != p)
    throw std::invalid_argument("offset count must match leaf dimension");
  if (!leaf_fourier.empty() && p != 1)
    throw std::invalid_argument("leaf fourier term needs leaf dimension 1");

  const Chart& c0 = atlas.charts.front();
  const int trans_axis = c0.trans_axes[0];
  std::vector<int> leaf_axes = c0.leaf_axes;

  FoliationMap m;
  m.source = m.target = &atlas;
  m.family = "leaf_map";
  Mat Ac = A;
  auto offs = transverse_offset;
  FourierSeries lf = leaf_fourier;
  m.eval_fn = [Ac, offs, lf, trans_axis, leaf_axes, p](const Vec& x) {
    Vec v(p);
    for (int i = 0; i < p; ++i) v[i] = x[leaf_axes[static_cast<size_t>(i)]];
    Vec w = Ac * v;
    double xt = x[trans_axis];
    for (int i = 0; i < p && i < static_cast<int>(offs.size()); ++i)
      w[i] += offs[static_cast<size_t>(i)].eval(xt);
    if (!lf.empty()) w[0] += lf.eval(v[0]);
    Vec y = x;
    for (int i = 0; i < p; ++i) y[leaf_axes[static_cast<size_t>(i)]] = w[i];
    return y;
  };
  const int n = atlas.n;
  m.jac_fn = [Ac, offs, lf, trans_axis, leaf_axes, p, n](const Vec& x) {
    Mat J = Mat::Identity(n, n);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        J(leaf_axes[static_cast<size_t>(i)], leaf_axes[static_cast<size_t>(j)]) = Ac(i, j);
    double xt = x[trans_axis];
    for (int i = 0; i < p && i < static_cast<int>(offs.size()); ++i)
      J(leaf_axes[static_cast<size_t>(i)], trans_axis) = offs[static_cast<size_t>(i)].deriv(xt);
    if (!lf.empty())
      J(leaf_axes[0], leaf_axes[0]) += lf.deriv(x[leaf_axes[0]]);
    return J;
  };
  m.claims.leaf_preserving = true;
  return m;
}

FoliationMap compose(const FoliationMap& outer, const FoliationMap& inner) {
  if (outer.source != inner.target)
    throw std::invalid_argument("composition atlas mismatch");
  FoliationMap m;
  m.source = inner.source;
  m.target = outer.target;
  m.family = outer.family + "*" + inner.family;
  auto fe = outer.eval_fn;
  auto ge = inner.eval_fn;
  m.eval_fn = [fe, ge](const Vec& x) { return fe(ge(x)); };
  if (outer.has_exact_jacobian() && inner.has_exact_jacobian()) {
    auto fj = outer.jac_fn;
    auto gj = inner.jac_fn;
    m.jac_fn = [fe, ge, fj, gj](const Vec& x) { return Mat(fj(ge(x)) * gj(x)); };
  }
  m.claims.leaf_preserving = outer.claims.leaf_preserving && inner.claims.leaf_preserving;
  return m;
}

FoliationMap inverse_map(const FoliationMap& f) {
  FoliationMap m;
  m.source = f.target;
  m.target = f.source;
  m.family = "inverse(" + f.family + ")";
  m.claims = f.claims;
  if (f.family == "translation") {
    Vec ms = -(f.eval_fn(Vec::Zero(f.source->n)));
    m.eval_fn = [ms](const Vec& x) { return Vec(x + ms); };
    const int n = f.source->n;
    m.jac_fn = [n](const Vec&) { return Mat::Identity(n, n); };
    return m;
  }
  FoliationMap fc = f;  // captured by value; evaluators are pure
  m.eval_fn = [fc](const Vec& x) {
    AmbientPoint target{x};
    Vec z = target.x;
    for (int it = 0; it < 64; ++it) {
      Vec r = torus_delta(AmbientPoint(fc.eval_fn(z)), target);
      if (r.cwiseAbs().maxCoeff() < 1e-13) return z;
      Mat J = fc.ambient_jacobian(z);
      z = wrap01(Vec(z - J.partialPivLu().solve(r)));
    }
    throw NumericalError("map not invertible on samples");
  };
  auto inv_eval = m.eval_fn;
  m.jac_fn = [fc, inv_eval](const Vec& x) {
    Vec z = inv_eval(x);
    return Mat(fc.ambient_jacobian(z).inverse());
  };
  return m;
}

FoliationMap bump_shift_map(const FoliatedAtlas& atlas, int chart_id, const BoxBump& bump,
                            const Vec& c) {
  const Chart* chart = &atlas.chart(chart_id);
  if (c.size() != atlas.p) throw std::invalid_argument("shift dimension mismatch");
  FoliationMap m;
  m.source = m.target = &atlas;
  m.family = "bump_shift";
  BoxBump bb = bump;
  Vec cc = c;
  m.eval_fn = [chart, bb, cc](const Vec& x) {
    AmbientPoint pt{x};
    double lam = bb.value(pt.x);
    if (lam == 0.0) return pt.x;
    auto [t, b] = chart->to_coords(pt);
    return chart->from_coords(t, Vec(b + lam * cc)).x;
  };
  const int n = atlas.n;
  const int q = atlas.q;
  m.jac_fn = [chart, bb, cc, n, q](const Vec& x) {
    AmbientPoint pt{x};
    double lam = bb.value(pt.x);
    if (lam == 0.0) return Mat(Mat::Identity(n, n));
    auto [t, b] = chart->to_coords(pt);
    Vec grad = bb.gradient(pt.x);
    Mat Jc = chart->coords_jacobian(pt);           // d(t,b)/dx at x
    Mat D = Jc;                                    // d(t, b + lam c)/dx
    for (int i = 0; i < cc.size(); ++i) D.row(q + i) += cc[i] * grad.transpose();
    AmbientPoint img = chart->from_coords(t, Vec(b + lam * cc));
    return Mat(chart->frame(img) * D);
  };
  m.claims.leaf_preserving = true;
  return m;
}

AmbientPoint evaluate(const FoliationMap& map, const AmbientPoint& x) { return map(x); }

namespace {

int pick_chart(const FoliatedAtlas& atlas, const AmbientPoint& x, int requested) {
  if (requested >= 0) return requested;
  return atlas.charts_containing(x)[0];
}

}  // namespace

Mat full_jacobian(const FoliationMap& map, const AmbientPoint& x, int src_chart,
                  int tgt_chart, const Options& opts) {
  const Chart& src = map.source->chart(pick_chart(*map.source, x, src_chart));
  AmbientPoint y = map(x);
  const Chart& tgt = map.target->chart(pick_chart(*map.target, y, tgt_chart));
  return full_jacobian_in(map, x, src, tgt, opts);
}

Mat full_jacobian_in(const FoliationMap& map, const AmbientPoint& x, const Chart& src,
                     const Chart& tgt, const Options& opts) {
  AmbientPoint y = map(x);
  if (map.has_exact_jacobian()) {
    Mat Jamb = map.ambient_jacobian(x.x);
    return tgt.coords_jacobian(y) * Jamb * src.frame(x);
  }
  auto [t0, b0] = src.to_coords(x);
  Vec u0(src.n());
  u0 << t0, b0;
  auto chart_rep = [&](const Vec& u) {
    Vec t = u.head(src.q()), b = u.tail(src.p());
    AmbientPoint img = map(src.from_coords(t, b));
    auto [tt, bb] = tgt.to_coords(img);
    Vec out(tgt.n());
    out << tt, bb;
    return out;
  };
  bool ok = true;
  Mat J = richardson_jacobian(chart_rep, u0, opts.fd_step, &ok);
  if (!ok) throw NumericalError("not differentiable at x");
  return J;
}

Mat leafwise_jacobian(const FoliationMap& map, const AmbientPoint& x, int src_chart,
                      int tgt_chart, const Options& opts) {
  int si = pick_chart(*map.source, x, src_chart);
  AmbientPoint y = map(x);
  int ti = pick_chart(*map.target, y, tgt_chart);
  Mat J = full_jacobian(map, x, si, ti, opts);
  const int q = map.source->q;
  const int p = map.source->p;
  if (J.block(0, q, map.target->q, p).cwiseAbs().maxCoeff() > 1e-6)
    throw NumericalError("map not plaque-local at x");
  Mat L = J.block(map.target->q, q, map.target->p, p);
  if (map.source->chart(si).leaf_orientation < 0) L.col(0) = -L.col(0);
  if (map.target->chart(ti).leaf_orientation < 0) L.row(0) = -L.row(0);
  return L;
}

CompatReport check_leaf_space_compatible(const FoliationMap& a, const FoliationMap& b,
                                         int samples, std::uint64_t seed,
                                         const Options& opts) {
  if (a.source != b.source || a.target != b.target)
    throw std::invalid_argument("maps must share source and target atlases");
  CompatReport rep;
  Rng rng(seed);
  const int n = a.source->n;
  for (int s = 0; s < samples; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform01();
    AmbientPoint pt{x};
    AmbientPoint ya = a(pt), yb = b(pt);
    ++rep.checked;
    if (!a.target->same_leaf(ya, yb)) {
      rep.compatible = false;
      rep.violations.push_back({pt.x, "images on different leaves", torus_distance(ya, yb)});
      continue;
    }
    if (torus_distance(ya, yb) < 0.1) {
      // Near-coincidence: the images must share a plaque of a common chart.
      auto sat = a.target->in_good_saturation(ya, yb, opts.tol_plaque);
      if (!sat) {
        double best = 1.0;
        for (const Chart& c : a.target->charts)
          if (c.box.contains(ya) && c.box.contains(yb))
            best = std::min(best,
                            (c.to_coords(ya).first - c.to_coords(yb).first).cwiseAbs().maxCoeff());
        rep.compatible = false;
        rep.violations.push_back({pt.x, "images not plaque-compatible", best});
        rep.max_transverse_dev = std::max(rep.max_transverse_dev, best);
      }
    }
  }
  return rep;
}

bool verify_leaf_preserving(const FoliationMap& map, int samples, std::uint64_t seed) {
  Rng rng(seed);
  const int n = map.source->n;
  for (int s = 0; s < samples; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform01();
    AmbientPoint pt{x};
    if (!map.source->same_leaf(pt, map(pt))) return false;
  }
  return true;
}

void validate_map_continuity(const FoliationMap& map, int samples, std::uint64_t seed) {
  Rng rng(seed);
  const int n = map.source->n;
  const double h = 1e-3;
  // First pass estimates the local scale, second rejects outliers far above it.
  std::vector<double> rates;
  rates.reserve(static_cast<size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform01();
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = rng.uniform(-1.0, 1.0);
    d *= h / std::max(1e-12, d.norm());
    AmbientPoint a{x}, b{Vec(x + d)};
    rates.push_back(torus_distance(map(a), map(b)) / h);
  }
  double scale = 1.0;
  for (double r : rates) scale = std::max(scale, r);
  double sum = 0.0;
  for (double r : rates) sum += r;
  double mean = sum / std::max<size_t>(1, rates.size());
  if (scale > 50.0 * (1.0 + mean))
    throw std::invalid_argument("map evaluator jumps: not continuous on samples");
}

namespace {

// Grid of closed boxes of side 1/m, offset by half a cell so no box touches
// a chart boundary of the standard atlases.
std::vector<Box> k_family_boxes(int n, int m) {
  std::vector<Box> out;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  const double h = 0.5 / m;
  while (true) {
    Box b;
    b.lo = Vec(n);
    b.len = Vec::Constant(n, 1.0 / m);
    for (int i = 0; i < n; ++i)
      b.lo[i] = wrap01(h + static_cast<double>(idx[static_cast<size_t>(i)]) / m);
    out.push_back(b);
    int k = 0;
    while (k < n && ++idx[static_cast<size_t>(k)] == m) idx[static_cast<size_t>(k++)] = 0;
    if (k == n) break;
  }
  return out;
}

std::vector<Vec> box_sample_points(const Box& b, int per_axis) {
  const int n = b.dim();
  std::vector<Vec> pts;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  while (true) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      double f = per_axis == 1 ? 0.5
                               : 0.02 + 0.96 * idx[static_cast<size_t>(i)] / (per_axis - 1.0);
      x[i] = wrap01(b.lo[i] + f * b.len[i]);
    }
    pts.push_back(std::move(x));
    int k = 0;
    while (k < n && ++idx[static_cast<size_t>(k)] == per_axis) idx[static_cast<size_t>(k++)] = 0;
    if (k == n) break;
  }
  return pts;
}

}  // namespace

SpNeighborhood derive_sp_neighborhood(const FoliationMap& base, int order, double leaf_slack,
                                      double eps, const Options&) {
  if (order < 0 || order > 1)
    throw std::invalid_argument("sp-neighborhood order must be 0 or 1");
  const FoliatedAtlas& src = *base.source;
  const FoliatedAtlas& tgt = *base.target;
  const int n = src.n;

  std::vector<bool> is_leaf_axis(static_cast<size_t>(n), false);
  for (int ax : src.charts.front().leaf_axes) is_leaf_axis[static_cast<size_t>(ax)] = true;

  for (int m : {9, 12, 15, 18, 24, 30, 36, 48, 60}) {
    SpNeighborhood nb;
    nb.base = base;
    nb.order = order;
    nb.leaf_slack = leaf_slack;
    bool feasible = true;
    for (const Box& K : k_family_boxes(n, m)) {
      SpPatch patch;
      patch.K = K;
      patch.eps = eps;
      // Source chart strictly containing K, farthest boundary first.
      double best_margin = -1.0;
      for (const Chart& c : src.charts) {
        if (!c.box.contains_box(K)) continue;
        double margin = 1.0;
        for (int i = 0; i < n; ++i) {
          double w = wrap01(K.lo[i] - c.box.lo[i]);
          margin = std::min(margin, std::min(w, c.box.len[i] - w - K.len[i]));
        }
        if (margin > best_margin) {
          best_margin = margin;
          patch.source_chart = c.id;
        }
      }
      if (patch.source_chart < 0) {
        feasible = false;
        break;
      }
      double pad = std::min(0.4 / m, 0.45 * best_margin);
      patch.bump.support = K.padded(pad);
      patch.bump.pad = pad;

      // Image bounding box of the bump support, de-wrapped around the center
      // image, fattened by the slack along leaf axes. The de-wrap is only
      // trustworthy while the image spread stays well below a half-period.
      AmbientPoint center{Vec(K.lo + 0.5 * K.len)};
      AmbientPoint yc = base(center);
      Vec dmin = Vec::Zero(n), dmax = Vec::Zero(n);
      for (const Vec& s : box_sample_points(patch.bump.support, 3)) {
        Vec d = torus_delta(base(AmbientPoint{s}), yc);
        dmin = dmin.cwiseMin(d);
        dmax = dmax.cwiseMax(d);
      }
      Box bbox;
      bbox.lo = Vec(n);
      bbox.len = Vec(n);
      bool box_ok = true;
      for (int i = 0; i < n; ++i) {
        if (dmax[i] - dmin[i] > 0.42) box_ok = false;
        double slack_i = (is_leaf_axis[static_cast<size_t>(i)] ? leaf_slack : 0.0) + 0.01;
        bbox.lo[i] = wrap01(yc.x[i] + dmin[i] - slack_i);
        bbox.len[i] = dmax[i] - dmin[i] + 2.0 * slack_i;
        if (bbox.len[i] >= 0.95) box_ok = false;
      }
      if (!box_ok) {
        feasible = false;
        break;
      }
      patch.target = tgt.chart_factory(bbox.padded(0.02));
      nb.patches.push_back(std::move(patch));
    }
    if (feasible) return nb;
  }
  throw std::invalid_argument("cannot build sp-neighborhood: base map images too large");
}

SpReport sp_contains(const SpNeighborhood& nbhd, const FoliationMap& psi,
                     const Options& opts) {
  SpReport rep;
  rep.contains = true;
  const FoliationMap& base = nbhd.base;
  const int per_axis = nbhd.order >= 1 ? 3 : 2;
  for (size_t pi = 0; pi < nbhd.patches.size(); ++pi) {
    const SpPatch& patch = nbhd.patches[pi];
    const Chart& tc = patch.target;
    for (const Vec& x : box_sample_points(patch.K, per_axis)) {
      AmbientPoint pt{x};
      AmbientPoint yb = base(pt);
      AmbientPoint yp = psi(pt);
      if (!tc.box.contains(yp)) {
        rep.contains = false;
        rep.failed_patch = static_cast<int>(pi);
        rep.notes.push_back("image left target chart");
        return rep;
      }
      auto [tb, bb] = tc.to_coords(yb);
      auto [tp, bp] = tc.to_coords(yp);
      double plaque_dev = (tb - tp).cwiseAbs().maxCoeff();
      rep.max_plaque_dev = std::max(rep.max_plaque_dev, plaque_dev);
      if (plaque_dev > opts.tol_plaque) {
        bool hard = opts.sp_strict || plaque_dev > 1e-7;
        if (hard) {
          rep.contains = false;
          rep.failed_patch = static_cast<int>(pi);
          rep.notes.push_back("local projections disagree");
          return rep;
        }
        rep.notes.push_back("plaque deviation above tolerance, below strict bound");
      }
      double c0 = std::max(plaque_dev, (bb - bp).cwiseAbs().maxCoeff());
      rep.max_c0 = std::max(rep.max_c0, c0);
      if (c0 >= patch.eps) {
        rep.contains = false;
        rep.failed_patch = static_cast<int>(pi);
        rep.notes.push_back("C0 deviation above eps");
        return rep;
      }
      if (nbhd.order >= 1) {
        const Chart& sc = base.source->chart(patch.source_chart);
        Mat Jb = full_jacobian_in(base, pt, sc, tc, opts);
        Mat Jp = full_jacobian_in(psi, pt, sc, tc, opts);
        double c1 = (Jb - Jp).cwiseAbs().maxCoeff();
        rep.max_c1 = std::max(rep.max_c1, c1);
        if (c1 >= patch.eps) {
          rep.contains = false;
          rep.failed_patch = static_cast<int>(pi);
          rep.notes.push_back("C1 deviation above eps");
          return rep;
        }
      }
    }
  }
  return rep;
}

}  // namespace lamina
