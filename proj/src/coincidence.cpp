#include <lamina/coincidence.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <limits>

namespace lamina {

const char* to_string(PointKind k) {
  switch (k) {
    case PointKind::leafwise_simple: return "leafwise_simple";
    case PointKind::ls_transverse_only: return "ls_transverse_only";
    case PointKind::degenerate: return "degenerate";
  }
  return "?";
}

bool CoincidenceComponent::simple_throughout() const {
  for (const auto& c : cls)
    if (c.kind != PointKind::leafwise_simple) return false;
  return !cls.empty();
}

bool CoincidenceComponent::sign_constant() const {
  if (cls.empty()) return false;
  int s = cls.front().sign;
  if (s == 0) return false;
  for (const auto& c : cls)
    if (c.sign != s) return false;
  return true;
}

double CoincidenceComponent::min_sv_leaf() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : cls) m = std::min(m, c.sv_leaf);
  return m;
}

double CoincidenceComponent::min_sv_full() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : cls) m = std::min(m, c.sv_full);
  return m;
}

DefectField::DefectField(const FoliationMap& a, const FoliationMap& b, const Options& opts)
    : a_(a), b_(b), opts_(opts) {
  CompatReport rep = check_leaf_space_compatible(a, b, opts.compat_samples,
                                                 mix_seed(opts.rng_seed, 0x6c6561fULL), opts);
  if (!rep.compatible)
    throw VerificationError("maps do not induce the same leaf-space map");
  exact_ = a.has_exact_jacobian() && b.has_exact_jacobian();
}

std::optional<int> DefectField::saturation_chart(const AmbientPoint& x) const {
  AmbientPoint ya = a_(x), yb = b_(x);
  // Saturation keys on plaque membership of the two images; the tolerance is
  // transverse-only, the leaf coordinates may differ across the whole plaque.
  return target().in_good_saturation(ya, yb, opts_.tol_plaque * 10.0);
}

std::optional<Vec> DefectField::eval(const AmbientPoint& x) const {
  auto chart = saturation_chart(x);
  if (!chart) return std::nullopt;
  return eval_in(x, *chart);
}

Vec DefectField::eval_in(const AmbientPoint& x, int tgt_chart) const {
  const Chart& c = target().chart(tgt_chart);
  AmbientPoint ya = a_(x), yb = b_(x);
  return c.to_coords(ya).second - c.to_coords(yb).second;
}

Mat DefectField::jacobian(const AmbientPoint& x, int tgt_chart) const {
  const Chart& c = target().chart(tgt_chart);
  const int q = target().q;
  const int p = target().p;
  if (exact_) {
    AmbientPoint ya = a_(x), yb = b_(x);
    Mat Ja = c.coords_jacobian(ya) * a_.ambient_jacobian(x.x);
    Mat Jb = c.coords_jacobian(yb) * b_.ambient_jacobian(x.x);
    return (Ja - Jb).block(q, 0, p, domain().n);
  }
  bool ok = true;
  Mat J = richardson_jacobian(
      [this, tgt_chart](const Vec& v) { return eval_in(AmbientPoint{v}, tgt_chart); }, x.x,
      opts_.fd_step, &ok);
  if (!ok) throw NumericalError("not differentiable at x");
  return J;
}

Mat DefectField::leaf_restricted(const Mat& DF, const AmbientPoint& x, int src_chart,
                                 int tgt_chart) const {
  const Chart& sc = domain().chart(src_chart);
  Mat frame = sc.frame(x);  // columns ordered (transverse.., leaf..)
  Mat E = frame.rightCols(domain().p);
  if (sc.leaf_orientation < 0) E.col(0) = -E.col(0);
  Mat L = DF * E;
  if (target().chart(tgt_chart).leaf_orientation < 0) L.row(0) = -L.row(0);
  return L;
}

PointClassification DefectField::classify_in(const AmbientPoint& x, int src_chart,
                                             int tgt_chart, double tol_rank) const {
  PointClassification out;
  const int p = target().p;
  Mat DF = jacobian(x, tgt_chart);
  Eigen::JacobiSVD<Mat> svd_full(DF);
  out.sv_full = svd_full.singularValues().minCoeff();
  out.full_rank = rank_with_threshold(svd_full.singularValues(), tol_rank);
  Mat L = leaf_restricted(DF, x, src_chart, tgt_chart);
  Eigen::JacobiSVD<Mat> svd_leaf(L);
  out.sv_leaf = svd_leaf.singularValues().minCoeff();
  out.leaf_rank = rank_with_threshold(svd_leaf.singularValues(), tol_rank);
  if (out.leaf_rank == p) {
    out.kind = PointKind::leafwise_simple;
    out.sign = sign_of(L.determinant());
  } else if (out.full_rank == p) {
    out.kind = PointKind::ls_transverse_only;
  } else {
    out.kind = PointKind::degenerate;
  }
  return out;
}

PointClassification DefectField::classify(const AmbientPoint& x, double tol_rank) const {
  auto tgt = saturation_chart(x);
  if (!tgt) throw std::invalid_argument("point outside the good saturation");
  int src = domain().charts_containing(x)[0];
  return classify_in(x, src, *tgt, tol_rank);
}

PointClassification classify_point(const DefectField& defect, const AmbientPoint& x,
                                   double tol_rank) {
  return defect.classify(x, tol_rank);
}

bool FindReport::all_closed() const {
  for (const auto& c : components)
    if (!c.closed || c.stalled) return false;
  return true;
}

bool FindReport::all_ls_transverse() const {
  if (region_degenerate) return false;
  for (const auto& c : components) {
    if (c.stalled || !c.closed) return false;
    for (const auto& k : c.cls)
      if (k.kind == PointKind::degenerate) return false;
  }
  return true;
}

bool FindReport::all_simple_constant_sign() const {
  if (region_degenerate) return false;
  for (const auto& c : components)
    if (!c.closed || c.stalled || !c.simple_throughout() || !c.sign_constant()) return false;
  return true;
}

void FindReport::flip_signs(int p) {
  if (p % 2 == 0) return;
  for (auto& c : components) {
    c.sign = -c.sign;
    for (auto& k : c.cls) k.sign = -k.sign;
  }
}

std::optional<AmbientPoint> refine_zero(const DefectField& defect, const AmbientPoint& seed,
                                        const Options& opts) {
  if (!defect.saturation_chart(seed)) return std::nullopt;
  AmbientPoint x = seed;
  // Iterated to stationarity, not merely under tol_zero, so that points on a
  // quadratically degenerate circle settle at the noise floor and their
  // singular values reflect the degeneracy.
  for (int it = 0; it < 60; ++it) {
    auto c = defect.saturation_chart(x);
    if (!c) return std::nullopt;
    Vec F = defect.eval_in(x, *c);
    Mat J = defect.jacobian(x, *c);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
    Vec step = cod.solve(F);
    double sn = step.norm();
    if (sn > 0.1) step *= 0.1 / sn;
    x = AmbientPoint(Vec(x.x - step));
    if (sn < 1e-13) break;
  }
  auto c = defect.saturation_chart(x);
  if (!c) return std::nullopt;
  if (defect.eval_in(x, *c).cwiseAbs().maxCoeff() >= opts.tol_zero) return std::nullopt;
  return x;
}

namespace {

struct TangentInfo {
  Vec dir;          // unit kernel vector of DF
  double sv_min;    // smallest singular value of DF
  double sv_scale;  // largest singular value
};

TangentInfo kernel_direction(const Mat& DF) {
  Eigen::JacobiSVD<Mat> svd(DF, Eigen::ComputeFullV);
  TangentInfo out;
  out.dir = svd.matrixV().col(DF.cols() - 1);
  const auto& sv = svd.singularValues();
  out.sv_min = sv.minCoeff();
  out.sv_scale = sv.maxCoeff();
  return out;
}

double transverse_speed(const FoliatedAtlas& atlas, const AmbientPoint& x, const Vec& dir,
                        int chart_id) {
  const Chart& c = atlas.chart(chart_id);
  Vec tdot = (c.coords_jacobian(x) * dir).head(atlas.q);
  return tdot[0] * c.transverse_orientation;
}

}  // namespace

CoincidenceComponent trace_component(const DefectField& defect, const AmbientPoint& seed,
                                     double step_in, const Options& opts,
                                     bool flag_instead_of_throw) {
  const FoliatedAtlas& atlas = defect.domain();
  if (atlas.q != 1) throw std::invalid_argument("tracing requires codimension 1");

  CoincidenceComponent comp;
  auto stall = [&](const char* what) -> CoincidenceComponent& {
    if (!flag_instead_of_throw || comp.line.pts.empty())
      throw NumericalError(std::string("trace stalled near degeneracy: ") + what);
    comp.stalled = true;
    comp.degenerate_flag = true;
    return comp;
  };

  auto corrected = [&](AmbientPoint x, const Vec& along, bool* ok) -> AmbientPoint {
    *ok = false;
    for (int it = 0; it < 10; ++it) {
      auto c = defect.saturation_chart(x);
      if (!c) return x;
      Vec F = defect.eval_in(x, *c);
      if (F.cwiseAbs().maxCoeff() < opts.tol_zero) {
        *ok = true;
        return x;
      }
      Mat J = defect.jacobian(x, *c);
      Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
      Vec delta = cod.solve(F);
      delta -= along * along.dot(delta);  // correct within the cross-slice
      double dn = delta.norm();
      if (dn > 0.25) delta *= 0.25 / dn;
      x = AmbientPoint(Vec(x.x - delta));
    }
    auto c = defect.saturation_chart(x);
    if (c && defect.eval_in(x, *c).cwiseAbs().maxCoeff() < opts.tol_zero) *ok = true;
    return x;
  };

  AmbientPoint x = seed;
  auto chart0 = defect.saturation_chart(x);
  if (!chart0) throw std::invalid_argument("seed outside the good saturation");
  if (defect.eval_in(x, *chart0).cwiseAbs().maxCoeff() >= opts.tol_zero)
    throw std::invalid_argument("seed not on the zero set");

  TangentInfo tan = kernel_direction(defect.jacobian(x, *chart0));
  if (tan.sv_scale < 1e-12) {
    // No usable direction at the seed itself.
    throw NumericalError("trace stalled near degeneracy: no tangent at seed");
  }
  {
    int src = atlas.charts_containing(x)[0];
    if (transverse_speed(atlas, x, tan.dir, src) < 0) tan.dir = -tan.dir;
  }
  const Vec start_dir = tan.dir;
  const AmbientPoint start = x;

  double step = step_in;
  const int max_steps = static_cast<int>(std::ceil(24.0 / step_in)) + 64;
  int since_reduction = 0;

  auto record = [&](const AmbientPoint& pt, int tgt_chart) {
    int src = atlas.charts_containing(pt)[0];
    comp.line.pts.push_back(pt);
    comp.chart_ids.push_back(tgt_chart);
    PointClassification pc = defect.classify_in(pt, src, tgt_chart, opts.tol_rank);
    if (pc.kind == PointKind::degenerate) comp.degenerate_flag = true;
    comp.cls.push_back(pc);
  };
  record(x, *chart0);

  for (int k = 0; k < max_steps; ++k) {
    AmbientPoint pred{Vec(x.x + step * tan.dir)};
    bool ok = false;
    AmbientPoint next = corrected(pred, tan.dir, &ok);
    if (ok && torus_distance(next, x) > 3.0 * step) ok = false;  // sheet jump
    if (!ok) {
      step *= 0.5;
      since_reduction = 0;
      if (step < 1e-7) return stall("step underflow");
      continue;
    }
    if (++since_reduction > 6 && step < step_in) {
      step = std::min(step_in, step * 2.0);
      since_reduction = 0;
    }

    auto chart = defect.saturation_chart(next);
    if (!chart) return stall("left the good saturation");
    TangentInfo tn = kernel_direction(defect.jacobian(next, *chart));
    if (tn.sv_scale < 1e-12) return stall("no tangent direction");
    if (tn.dir.dot(tan.dir) < 0) tn.dir = -tn.dir;
    // Just above the rank threshold the kernel can rotate quickly; resolve
    // the stretch with a smaller step.
    if (tn.sv_min > opts.tol_rank && tn.sv_min < 10.0 * opts.tol_rank && step > 4e-6) {
      step *= 0.5;
      since_reduction = 0;
      continue;
    }
    x = next;
    tan = tn;
    record(x, *chart);

    if (comp.line.pts.size() > 3 && torus_distance(x, start) < 0.5 * step &&
        tan.dir.dot(start_dir) > 0.0) {
      comp.closed = true;
      comp.line.closed = true;
      break;
    }
  }
  if (!comp.closed && !comp.stalled) return stall("no closure within step budget");

  if (comp.simple_throughout() && comp.sign_constant()) comp.sign = comp.cls.front().sign;
  return comp;
}

double distance_to_polyline(const AmbientPoint& x, const Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (const AmbientPoint& p : line.pts) best = std::min(best, torus_distance(x, p));
  return best;
}

namespace {

double one_sided_hausdorff(const Polyline& a, const Polyline& b) {
  double worst = 0.0;
  for (const AmbientPoint& p : a.pts) worst = std::max(worst, distance_to_polyline(p, b));
  return worst;
}

}  // namespace

FindReport find_components(const DefectField& defect, int grid_per_axis, const Options& opts) {
  const FoliatedAtlas& atlas = defect.domain();
  if (atlas.q != 1) throw std::invalid_argument("find_components requires codimension 1");
  const int n = atlas.n;
  FindReport rep;

  const int g = grid_per_axis;
  const double spacing = 1.0 / g;
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::uint64_t>(g);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fval(total, nan);
  std::uint64_t defined = 0, near_zero = 0;
  {
    std::vector<int> idx(static_cast<size_t>(n), 0);
    for (std::uint64_t flat = 0; flat < total; ++flat) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x[i] = idx[static_cast<size_t>(i)] * spacing;
      if (auto F = defect.eval(AmbientPoint{x})) {
        fval[flat] = F->cwiseAbs().maxCoeff();
        ++defined;
        if (fval[flat] < 1e-8) ++near_zero;
      }
      int k = 0;
      while (k < n && ++idx[static_cast<size_t>(k)] == g) idx[static_cast<size_t>(k++)] = 0;
      if (k == n) break;
    }
  }

  if (defined > 0 && near_zero * 5 > defined) {
    rep.region_degenerate = true;
    rep.warnings.push_back("defect vanishes on a region; zero set is not a curve");
    return rep;
  }

  // Lipschitz bound of |F| from grid neighbours along every axis.
  double max_grad = 0.0;
  {
    std::uint64_t stride = 1;
    for (int ax = 0; ax < n; ++ax) {
      for (std::uint64_t flat = 0; flat < total; ++flat) {
        double a = fval[flat];
        if (std::isnan(a)) continue;
        std::uint64_t i_ax = (flat / stride) % static_cast<std::uint64_t>(g);
        std::uint64_t nb = i_ax + 1 < static_cast<std::uint64_t>(g)
                               ? flat + stride
                               : flat - stride * static_cast<std::uint64_t>(g - 1);
        double b = fval[nb];
        if (std::isnan(b)) continue;
        double quot = std::abs(b - a) / spacing;
        if (quot < 0.45 / spacing) max_grad = std::max(max_grad, quot);
      }
      stride *= static_cast<std::uint64_t>(g);
    }
  }
  rep.lipschitz_estimate = std::max(max_grad, 1e-3);

  const double cell_diag = spacing * std::sqrt(static_cast<double>(n));
  const double threshold = opts.seed_factor * cell_diag * rep.lipschitz_estimate * 2.0;

  struct SeedCandidate {
    double fnorm;
    std::uint64_t index;
  };
  std::vector<SeedCandidate> seeds;
  for (std::uint64_t flat = 0; flat < total; ++flat)
    if (!std::isnan(fval[flat]) && fval[flat] < threshold) seeds.push_back({fval[flat], flat});
  std::sort(seeds.begin(), seeds.end(), [](const SeedCandidate& a, const SeedCandidate& b) {
    if (a.fnorm != b.fnorm) return a.fnorm < b.fnorm;
    return a.index < b.index;
  });
  rep.seeds_considered = static_cast<int>(seeds.size());
  if (seeds.size() > 40000) seeds.resize(40000);

  auto decode = [&](std::uint64_t flat) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<double>(flat % static_cast<std::uint64_t>(g)) * spacing;
      flat /= static_cast<std::uint64_t>(g);
    }
    return AmbientPoint{x};
  };

  std::vector<AmbientPoint> failed_seeds;
  for (const SeedCandidate& cand : seeds) {
    AmbientPoint raw = decode(cand.index);
    bool near_existing = false;
    for (const auto& comp : rep.components)
      if (distance_to_polyline(raw, comp.line) < opts.dedup_radius) {
        near_existing = true;
        break;
      }
    if (near_existing) continue;

    auto refined = refine_zero(defect, raw, opts);
    if (!refined) {
      failed_seeds.push_back(raw);
      continue;
    }
    ++rep.seeds_refined;
    bool dup = false;
    for (const auto& comp : rep.components)
      if (distance_to_polyline(*refined, comp.line) < opts.dedup_radius) {
        dup = true;
        break;
      }
    if (dup) continue;

    CoincidenceComponent comp;
    try {
      comp = trace_component(defect, *refined, opts.trace_step, opts, true);
    } catch (const NumericalError&) {
      rep.warnings.push_back("possible missed component");
      continue;
    }
    bool hausdorff_dup = false;
    for (const auto& other : rep.components)
      if (one_sided_hausdorff(comp.line, other.line) < opts.dedup_radius) {
        hausdorff_dup = true;
        break;
      }
    if (!hausdorff_dup) rep.components.push_back(std::move(comp));
  }

  for (const AmbientPoint& f : failed_seeds) {
    bool near = false;
    for (const auto& comp : rep.components)
      if (distance_to_polyline(f, comp.line) < 10.0 * opts.dedup_radius) {
        near = true;
        break;
      }
    if (!near) {
      rep.warnings.push_back("possible missed component");
      break;
    }
  }
  return rep;
}

}  // namespace lamina
