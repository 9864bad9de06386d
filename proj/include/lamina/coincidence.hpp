#pragma once

#include <lamina/maps.hpp>

namespace lamina {

enum class PointKind { leafwise_simple, ls_transverse_only, degenerate };
const char* to_string(PointKind k);

struct PointClassification {
  PointKind kind = PointKind::degenerate;
  int leaf_rank = 0, full_rank = 0;
  double sv_leaf = 0.0, sv_full = 0.0;  // smallest singular values
  int sign = 0;                         // det sign of the leaf block when simple
};

/// One connected component of the coincidence set (q = 1: a traced closed
/// polyline), with per-point classification and a constant sign when the
/// component is leafwise simple throughout.
struct CoincidenceComponent {
  Polyline line;
  std::vector<PointClassification> cls;
  std::vector<int> chart_ids;  // saturation chart per point
  int sign = 0;
  bool closed = false;
  bool degenerate_flag = false;
  bool stalled = false;

  bool simple_throughout() const;
  bool sign_constant() const;
  double min_sv_leaf() const;
  double min_sv_full() const;
};

/// Chart-local leafwise defect of a map pair (a, b): F(x) is the difference
/// of the leaf coordinates of a(x) and b(x) in the chart witnessing that the
/// two images share a plaque, so F(x) = 0 exactly at coincidence points.
class DefectField {
 public:
  DefectField(const FoliationMap& a, const FoliationMap& b, const Options& opts = {});

  const FoliatedAtlas& domain() const { return *a_.source; }
  const FoliatedAtlas& target() const { return *a_.target; }
  const FoliationMap& first() const { return a_; }
  const FoliationMap& second() const { return b_; }
  const Options& options() const { return opts_; }

  std::optional<int> saturation_chart(const AmbientPoint& x) const;
  std::optional<Vec> eval(const AmbientPoint& x) const;
  // Defect with the target chart pinned; the form differentiated by jacobian().
  Vec eval_in(const AmbientPoint& x, int tgt_chart) const;
  // p x n derivative with respect to ambient coordinates.
  Mat jacobian(const AmbientPoint& x, int tgt_chart) const;
  // p x p restriction of DF to the oriented leaf frame of the source chart,
  // with the target chart's leaf orientation applied to the rows. Its det
  // sign is the epsilon sign of the pair at a leafwise simple point.
  Mat leaf_restricted(const Mat& DF, const AmbientPoint& x, int src_chart,
                      int tgt_chart) const;

  PointClassification classify(const AmbientPoint& x, double tol_rank) const;
  PointClassification classify_in(const AmbientPoint& x, int src_chart, int tgt_chart,
                                  double tol_rank) const;

 private:
  FoliationMap a_, b_;  // held by value: evaluators are cheap immutable closures
  Options opts_;
  bool exact_;
};

// classify_point with default chart assignment.
PointClassification classify_point(const DefectField& defect, const AmbientPoint& x,
                                   double tol_rank);

struct FindReport {
  std::vector<CoincidenceComponent> components;
  std::vector<std::string> warnings;
  bool region_degenerate = false;
  double lipschitz_estimate = 0.0;
  int seeds_considered = 0;
  int seeds_refined = 0;

  bool all_closed() const;
  bool all_ls_transverse() const;
  bool all_simple_constant_sign() const;
  void flip_signs(int p);  // pair-order reversal multiplies dets by (-1)^p
};

// Seeds a grid, Newton-refines onto F = 0, traces and deduplicates the
// components of the coincidence set. Requires q = 1.
FindReport find_components(const DefectField& defect, int grid_per_axis,
                           const Options& opts = {});

// Predictor-corrector continuation from a refined seed along the kernel of
// DF, oriented by positive transverse speed. Throws "trace stalled near
// degeneracy" at a degenerate seed or on step underflow (unless
// flag_instead_of_throw, which returns the partial component flagged).
CoincidenceComponent trace_component(const DefectField& defect, const AmbientPoint& seed,
                                     double step, const Options& opts = {},
                                     bool flag_instead_of_throw = false);

// Gauss-Newton refinement onto the zero set; returns the polished point or
// nullopt when |F| cannot be brought under tol_zero.
std::optional<AmbientPoint> refine_zero(const DefectField& defect, const AmbientPoint& seed,
                                        const Options& opts = {});

double distance_to_polyline(const AmbientPoint& x, const Polyline& line);

}  // namespace lamina
