#include <lamina/geometry.hpp>

#include <algorithm>
#include <memory>
#include <set>

namespace lamina {

AmbientPoint make_point(std::initializer_list<double> coords) {
  Vec v(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) v[i++] = c;
  return AmbientPoint(std::move(v));
}

double torus_distance(const AmbientPoint& a, const AmbientPoint& b) {
  return torus_delta(a, b).norm();
}

Vec torus_delta(const AmbientPoint& a, const AmbientPoint& b) {
  Vec d(a.x.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = circle_delta(a.x[i], b.x[i]);
  return d;
}

bool Box::contains(const Vec& x) const {
  for (int i = 0; i < dim(); ++i) {
    double w = wrap01(x[i] - lo[i]);
    if (!(w > 0.0 && w < len[i])) return false;
  }
  return true;
}

double Box::margin(const Vec& x) const {
  double m = 1.0;
  for (int i = 0; i < dim(); ++i) {
    double w = wrap01(x[i] - lo[i]);
    m = std::min(m, std::min(w, len[i] - w));
  }
  return m;
}

Vec Box::lift(const Vec& x) const {
  Vec u(dim());
  for (int i = 0; i < dim(); ++i) u[i] = lo[i] + wrap01(x[i] - lo[i]);
  return u;
}

Box Box::shrunk(double d) const {
  Box b{lo, len};
  for (int i = 0; i < dim(); ++i) {
    b.lo[i] = wrap01(lo[i] + d);
    b.len[i] = len[i] - 2.0 * d;
  }
  return b;
}

Box Box::padded(double d) const { return shrunk(-d); }

bool Box::contains_box(const Box& other) const {
  for (int i = 0; i < dim(); ++i) {
    double w = wrap01(other.lo[i] - lo[i]);
    if (w >= len[i]) return false;
    if (w + other.len[i] > len[i]) return false;
  }
  return true;
}

std::optional<Box> Box::intersect(const Box& a, const Box& b) {
  // Single-arc overlaps only. Two-arc intersections would need
  // len_a + offset > 1 with len_b > offset, which the regular-atlas span
  // bound (len + reach/m < 1) rules out for constructible atlases.
  Box r{a.lo, a.len};
  for (int i = 0; i < a.dim(); ++i) {
    double shift = wrap01(b.lo[i] - a.lo[i]);
    double lo_rel, hi_rel;
    if (shift < a.len[i]) {
      lo_rel = shift;
      hi_rel = std::min(a.len[i], shift + b.len[i]);
    } else {
      // b starts outside a; it can still reach a through the wrap.
      double wrapped_end = shift + b.len[i] - 1.0;
      if (wrapped_end <= 0.0) return std::nullopt;
      lo_rel = 0.0;
      hi_rel = std::min(a.len[i], wrapped_end);
    }
    if (hi_rel - lo_rel <= 0.0) return std::nullopt;
    r.lo[i] = wrap01(a.lo[i] + lo_rel);
    r.len[i] = hi_rel - lo_rel;
  }
  return r;
}

Box Box::hull(const Box& a, const Box& b) {
  Box r{a.lo, a.len};
  for (int i = 0; i < a.dim(); ++i) {
    double shift = wrap01(b.lo[i] - a.lo[i]);
    double start, end;
    if (shift <= a.len[i]) {  // b starts inside a (or at its end)
      start = 0.0;
      end = std::max(a.len[i], shift + b.len[i]);
    } else if (shift + b.len[i] >= 1.0) {  // b wraps around into a
      start = shift - 1.0;
      end = std::max(a.len[i], shift + b.len[i] - 1.0);
    } else {  // disjoint; return the gap-free cover anyway
      start = 0.0;
      end = shift + b.len[i];
    }
    r.lo[i] = wrap01(a.lo[i] + start);
    r.len[i] = end - start;
  }
  return r;
}

std::pair<Vec, Vec> Chart::to_coords(const AmbientPoint& pt) const {
  if (!box.contains(pt.x)) throw std::invalid_argument("not in chart");
  Vec u = box.lift(pt.x);
  Vec t(q()), b(p());
  if (fwd) {
    fwd(u, t, b);
  } else {
    for (int i = 0; i < q(); ++i) t[i] = u[trans_axes[static_cast<size_t>(i)]];
    for (int i = 0; i < p(); ++i) b[i] = u[leaf_axes[static_cast<size_t>(i)]];
  }
  return {t, b};
}

AmbientPoint Chart::from_coords(const Vec& t, const Vec& b) const {
  if (inv) return AmbientPoint(inv(t, b));
  Vec x(n());
  for (int i = 0; i < q(); ++i) x[trans_axes[static_cast<size_t>(i)]] = t[i];
  for (int i = 0; i < p(); ++i) x[leaf_axes[static_cast<size_t>(i)]] = b[i];
  return AmbientPoint(std::move(x));
}

Mat Chart::coords_jacobian(const AmbientPoint& pt) const {
  Vec u = box.lift(pt.x);
  if (fwd_jac) return fwd_jac(u);
  Mat J = Mat::Zero(n(), n());
  for (int i = 0; i < q(); ++i) J(i, trans_axes[static_cast<size_t>(i)]) = 1.0;
  for (int i = 0; i < p(); ++i) J(q() + i, leaf_axes[static_cast<size_t>(i)]) = 1.0;
  return J;
}

Mat Chart::frame(const AmbientPoint& pt) const {
  return coords_jacobian(pt).inverse();
}

Mat Transition::dh(const Vec& t) const {
  bool ok = true;
  Mat J = richardson_jacobian([this](const Vec& tt) { return h(tt); }, t, 1e-5, &ok);
  return J;
}

std::vector<int> FoliatedAtlas::charts_containing(const AmbientPoint& x) const {
  std::vector<std::pair<double, int>> hits;
  for (const Chart& c : charts)
    if (c.box.contains(x)) hits.emplace_back(-c.box.margin(x.x), c.id);
  std::sort(hits.begin(), hits.end());
  std::vector<int> ids;
  ids.reserve(hits.size());
  for (auto& h : hits) ids.push_back(h.second);
  if (ids.empty()) throw std::logic_error("covering violated");
  return ids;
}

bool FoliatedAtlas::same_plaque(int chart_id, const AmbientPoint& a, const AmbientPoint& b,
                                double tol) const {
  const Chart& c = chart(chart_id);
  Vec ta = c.to_coords(a).first;
  Vec tb = c.to_coords(b).first;
  return (ta - tb).cwiseAbs().maxCoeff() <= tol;
}

std::optional<int> FoliatedAtlas::in_good_saturation(const AmbientPoint& x,
                                                     const AmbientPoint& y,
                                                     double tol) const {
  std::vector<std::pair<double, int>> hits;
  for (const Chart& c : charts)
    if (c.box.contains(x) && c.box.contains(y))
      hits.emplace_back(-std::min(c.box.margin(x.x), c.box.margin(y.x)), c.id);
  std::sort(hits.begin(), hits.end());
  for (auto& h : hits)
    if (same_plaque(h.second, x, y, tol)) return h.second;
  return std::nullopt;
}

const Transition* FoliatedAtlas::find_transition(int i, int j) const {
  for (const Transition& t : transitions)
    if (t.source == i && t.target == j) return &t;
  return nullptr;
}

std::pair<Vec, Vec> FoliatedAtlas::apply_transition(int i, int j, const Vec& t,
                                                    const Vec& b) const {
  if (i == j) return {t, b};
  const Transition* tr = find_transition(i, j);
  if (!tr) throw std::invalid_argument("not in overlap");
  AmbientPoint pt = chart(i).from_coords(t, b);
  if (!tr->overlap.contains(pt)) throw std::invalid_argument("not in overlap");
  return chart(j).to_coords(pt);
}

FoliatedAtlas FoliatedAtlas::with_reversed_leaf_orientation() const {
  FoliatedAtlas a = *this;
  for (Chart& c : a.charts) c.leaf_orientation = -c.leaf_orientation;
  return a;
}

double BoxBump::value(const Vec& x) const {
  double v = 1.0;
  for (int i = 0; i < support.dim(); ++i) {
    double w = wrap01(x[i] - support.lo[i]);
    if (w <= 0.0 || w >= support.len[i]) return 0.0;
    double d = std::min(w, support.len[i] - w);
    if (d < pad) v *= smoothstep5(d / pad);
  }
  return v;
}

Vec BoxBump::gradient(const Vec& x) const {
  const int n = support.dim();
  Vec ramps(n), dramps(n);
  for (int i = 0; i < n; ++i) {
    double w = wrap01(x[i] - support.lo[i]);
    if (w <= 0.0 || w >= support.len[i]) return Vec::Zero(n);
    if (w < pad) {
      ramps[i] = smoothstep5(w / pad);
      dramps[i] = smoothstep5_d(w / pad) / pad;
    } else if (w > support.len[i] - pad) {
      double d = support.len[i] - w;
      ramps[i] = smoothstep5(d / pad);
      dramps[i] = -smoothstep5_d(d / pad) / pad;
    } else {
      ramps[i] = 1.0;
      dramps[i] = 0.0;
    }
  }
  Vec g(n);
  for (int i = 0; i < n; ++i) {
    double prod = dramps[i];
    for (int j = 0; j < n; ++j)
      if (j != i) prod *= ramps[j];
    g[i] = prod;
  }
  return g;
}

double CircleDiffeo::lift(double t) const {
  double y = t + rotation;
  for (const FourierTerm& f : fourier)
    y += f.sin_coef * std::sin(2.0 * M_PI * f.k * t) +
         f.cos_coef * std::cos(2.0 * M_PI * f.k * t);
  return y;
}

double CircleDiffeo::dlift(double t) const {
  double d = 1.0;
  for (const FourierTerm& f : fourier)
    d += 2.0 * M_PI * f.k *
         (f.sin_coef * std::cos(2.0 * M_PI * f.k * t) -
          f.cos_coef * std::sin(2.0 * M_PI * f.k * t));
  return d;
}

double CircleDiffeo::inverse_lift(double y) const {
  double t = y - rotation;
  for (int it = 0; it < 64; ++it) {
    double r = lift(t) - y;
    if (std::abs(r) < 1e-14) break;
    t -= r / dlift(t);
  }
  return t;
}

bool CircleDiffeo::is_diffeo(int samples) const {
  for (int i = 0; i < samples; ++i)
    if (dlift(static_cast<double>(i) / samples) <= 0.0) return false;
  return true;
}

namespace {

std::vector<Box> grid_boxes(int n, int per_axis, double box_len) {
  std::vector<Box> out;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  while (true) {
    Box b;
    b.lo = Vec(n);
    b.len = Vec::Constant(n, box_len);
    for (int i = 0; i < n; ++i)
      b.lo[i] = static_cast<double>(idx[static_cast<size_t>(i)]) / per_axis;
    out.push_back(b);
    int k = 0;
    while (k < n && ++idx[static_cast<size_t>(k)] == per_axis) idx[static_cast<size_t>(k++)] = 0;
    if (k == n) break;
  }
  return out;
}

void check_box_parameters(int per_axis, double box_len) {
  if (per_axis < 2) throw std::invalid_argument("need at least 2 boxes per axis");
  if (box_len <= 1.0 / per_axis) throw std::invalid_argument("boxes do not cover the torus");
  if (box_len >= 1.0) throw std::invalid_argument("chart box must be injective");
  // Regularity: any two meeting boxes must fit in a box of span < 1.
  int reach = static_cast<int>(std::floor(box_len * per_axis));
  double worst_span = box_len + static_cast<double>(reach) / per_axis;
  if (worst_span >= 1.0) throw std::invalid_argument("box parameters violate regularity");
}

void verify_covering(const FoliatedAtlas& atlas) {
  int per_axis = atlas.n >= 3 ? 64 : 64;  // 64^min(n,3) sample points
  int dims = std::min(atlas.n, 3);
  std::vector<int> idx(static_cast<size_t>(dims), 0);
  while (true) {
    Vec x = Vec::Zero(atlas.n);
    for (int i = 0; i < dims; ++i)
      x[i] = (idx[static_cast<size_t>(i)] + 0.5) / per_axis;
    AmbientPoint pt{x};
    bool covered = false;
    for (const Chart& c : atlas.charts)
      if (c.box.contains(pt)) {
        covered = true;
        break;
      }
    if (!covered) throw std::logic_error("covering violated");
    int k = 0;
    while (k < dims && ++idx[static_cast<size_t>(k)] == per_axis) idx[static_cast<size_t>(k++)] = 0;
    if (k == dims) break;
  }
}

void build_transitions_and_regularity(FoliatedAtlas& atlas) {
  for (const Chart& a : atlas.charts) {
    for (const Chart& b : atlas.charts) {
      if (a.id == b.id) continue;
      auto ov = Box::intersect(a.box, b.box);
      if (!ov) continue;
      Transition tr;
      tr.source = a.id;
      tr.target = b.id;
      tr.overlap = *ov;
      const Chart* src = &atlas.charts[static_cast<size_t>(a.id)];
      const Chart* dst = &atlas.charts[static_cast<size_t>(b.id)];
      Vec b_mid(src->p());
      {
        AmbientPoint center{ov->lo + 0.5 * ov->len};
        b_mid = src->to_coords(center).second;
      }
      tr.h = [src, dst, b_mid](const Vec& t) {
        return dst->to_coords(src->from_coords(t, b_mid)).first;
      };
      tr.g = [src, dst](const Vec& t, const Vec& bb) {
        return dst->to_coords(src->from_coords(t, bb)).second;
      };
      atlas.transitions.push_back(std::move(tr));
      if (a.id < b.id) {
        RegularityWitness w;
        w.chart_a = a.id;
        w.chart_b = b.id;
        w.envelope = Box::hull(a.box, b.box);
        for (int i = 0; i < atlas.n; ++i)
          if (w.envelope.len[i] >= 1.0) throw std::logic_error("regularity violated");
        atlas.regularity.push_back(std::move(w));
      }
    }
  }
  atlas.regular = true;
}

}  // namespace

FoliatedAtlas make_linear_torus_foliation(int n, const std::vector<int>& leaf_axes,
                                          int boxes_per_axis, double box_len) {
  std::set<int> leaf_set(leaf_axes.begin(), leaf_axes.end());
  if (leaf_set.size() != leaf_axes.size()) throw std::invalid_argument("bad split");
  for (int a : leaf_axes)
    if (a < 0 || a >= n) throw std::invalid_argument("bad split");
  int p = static_cast<int>(leaf_axes.size());
  if (p < 1 || p >= n) throw std::invalid_argument("bad split");
  check_box_parameters(boxes_per_axis, box_len);

  FoliatedAtlas atlas;
  atlas.n = n;
  atlas.p = p;
  atlas.q = n - p;
  atlas.model_tag = "linear-torus";

  std::vector<int> trans_axes;
  for (int i = 0; i < n; ++i)
    if (!leaf_set.count(i)) trans_axes.push_back(i);

  int id = 0;
  for (Box& b : grid_boxes(n, boxes_per_axis, box_len)) {
    Chart c;
    c.id = id++;
    c.box = b;
    c.trans_axes = trans_axes;
    c.leaf_axes = leaf_axes;
    atlas.charts.push_back(std::move(c));
  }
  build_transitions_and_regularity(atlas);
  verify_covering(atlas);

  atlas.same_leaf = [trans_axes](const AmbientPoint& a, const AmbientPoint& b) {
    for (int ax : trans_axes)
      if (circle_dist(a.x[ax], b.x[ax]) > 1e-9) return false;
    return true;
  };
  atlas.chart_factory = [trans_axes, leaf_axes](const Box& box) {
    Chart c;
    c.id = -1;
    c.box = box;
    c.trans_axes = trans_axes;
    c.leaf_axes = leaf_axes;
    return c;
  };
  return atlas;
}

namespace {

// Isotopy from the identity to the monodromy lift, extended over R by the
// suspension relation G_{s+1} = G_s o f.
struct SuspensionFlow {
  CircleDiffeo f;
  double iterate(double t, int k) const {
    while (k > 0) {
      t = f.lift(t);
      --k;
    }
    while (k < 0) {
      t = f.inverse_lift(t);
      ++k;
    }
    return t;
  }
  double blend(double s) const { return smoothstep5(s); }
  double blend_d(double s) const { return smoothstep5_d(s); }
  // G_s(t0) for s in [0,1): convex combination of t0 and f(t0) in the lift.
  double G(double s, double t0) const {
    int k = static_cast<int>(std::floor(s));
    double sr = s - k;
    double base = iterate(t0, k);
    return base + blend(sr) * (f.lift(base) - base);
  }
  double dG_dt(double s, double t0) const {
    int k = static_cast<int>(std::floor(s));
    double sr = s - k;
    double base = iterate(t0, k);
    double dbase = 1.0;
    {  // derivative of the k-fold iterate
      double t = t0;
      for (int i = 0; i < k; ++i) {
        dbase *= f.dlift(t);
        t = f.lift(t);
      }
      for (int i = 0; i > k; --i) {
        t = f.inverse_lift(t);
        dbase /= f.dlift(t);
      }
    }
    return dbase * (1.0 + blend(sr) * (f.dlift(base) - 1.0));
  }
  double dG_ds(double s, double t0) const {
    int k = static_cast<int>(std::floor(s));
    double sr = s - k;
    double base = iterate(t0, k);
    return blend_d(sr) * (f.lift(base) - base);
  }
  double G_inv(double s, double t) const {
    double t0 = t;  // G_s is a monotone circle-lift in t0
    for (int it = 0; it < 80; ++it) {
      double r = G(s, t0) - t;
      if (std::abs(r) < 1e-14) break;
      t0 -= r / dG_dt(s, t0);
    }
    return t0;
  }
};

}  // namespace

FoliatedAtlas make_suspension(const CircleDiffeo& monodromy, int boxes_per_axis,
                              double box_len) {
  if (!monodromy.is_diffeo()) throw std::invalid_argument("monodromy not invertible");
  check_box_parameters(boxes_per_axis, box_len);

  FoliatedAtlas atlas;
  atlas.n = 2;
  atlas.p = 1;
  atlas.q = 1;
  atlas.model_tag = "suspension";

  auto flow = std::make_shared<SuspensionFlow>(SuspensionFlow{monodromy});

  atlas.chart_factory = [flow](const Box& box) {
    Chart c;
    c.id = -1;
    c.box = box;
    c.trans_axes = {1};
    c.leaf_axes = {0};
    c.fwd = [flow](const Vec& u, Vec& t, Vec& b_out) {
      t = Vec(1);
      b_out = Vec(1);
      t[0] = flow->G_inv(u[0], u[1]);
      b_out[0] = u[0];
    };
    c.inv = [flow](const Vec& t, const Vec& b_in) {
      Vec x(2);
      x[0] = b_in[0];
      x[1] = flow->G(b_in[0], t[0]);
      return x;
    };
    c.fwd_jac = [flow](const Vec& u) {
      double t0 = flow->G_inv(u[0], u[1]);
      double gt = flow->dG_dt(u[0], t0);
      double gs = flow->dG_ds(u[0], t0);
      Mat J(2, 2);
      // row 0: dt0/(ds, dt); row 1: db/(ds, dt)
      J(0, 0) = -gs / gt;
      J(0, 1) = 1.0 / gt;
      J(1, 0) = 1.0;
      J(1, 1) = 0.0;
      return J;
    };
    return c;
  };

  int id = 0;
  for (Box& b : grid_boxes(2, boxes_per_axis, box_len)) {
    Chart c = atlas.chart_factory(b);
    c.id = id++;
    atlas.charts.push_back(std::move(c));
  }
  build_transitions_and_regularity(atlas);
  verify_covering(atlas);

  CircleDiffeo f = monodromy;
  atlas.same_leaf = [flow, f](const AmbientPoint& a, const AmbientPoint& b) {
    double la = flow->G_inv(a.x[0], a.x[1]);
    double lb = flow->G_inv(b.x[0], b.x[1]);
    double t = la;
    for (int k = 0; k <= 32; ++k) {
      if (circle_dist(t, lb) < 1e-8) return true;
      t = f.lift(t);
    }
    t = la;
    for (int k = 0; k < 32; ++k) {
      t = f.inverse_lift(t);
      if (circle_dist(t, lb) < 1e-8) return true;
    }
    return false;
  };
  return atlas;
}

}  // namespace lamina
