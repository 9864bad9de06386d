#pragma once

#include <lamina/numeric.hpp>

#include <optional>
#include <utility>

namespace lamina {

/// Point of the flat torus R^n/Z^n; coordinates normalized to [0,1).
struct AmbientPoint {
  Vec x;
  AmbientPoint() = default;
  explicit AmbientPoint(Vec v) : x(wrap01(std::move(v))) {}
  int dim() const { return static_cast<int>(x.size()); }
};

AmbientPoint make_point(std::initializer_list<double> coords);
double torus_distance(const AmbientPoint& a, const AmbientPoint& b);
// Shortest-representative difference a-b, componentwise in (-1/2, 1/2].
Vec torus_delta(const AmbientPoint& a, const AmbientPoint& b);

/// Product of open circle intervals (lo_k, lo_k+len_k), each len_k < 1.
/// Boxes may wrap through 0.
struct Box {
  Vec lo, len;
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x) const;
  bool contains(const AmbientPoint& p) const { return contains(p.x); }
  // Min over axes of the distance to the two interval ends; assumes inside.
  double margin(const Vec& x) const;
  // Representative of x with every coordinate in (lo_k, lo_k+len_k).
  Vec lift(const Vec& x) const;
  Box shrunk(double d) const;
  Box padded(double d) const;
  bool contains_box(const Box& other) const;
  static std::optional<Box> intersect(const Box& a, const Box& b);
  static Box hull(const Box& a, const Box& b);  // bounding box on the torus
};

/// Foliation chart over a torus box: straightens the box to T x B with
/// transverse coordinates first. A null `fwd` means the straightening is the
/// axis split of the lifted coordinates.
struct Chart {
  int id = -1;
  Box box;
  std::vector<int> trans_axes, leaf_axes;
  int leaf_orientation = 1;
  int transverse_orientation = 1;

  std::function<void(const Vec& u, Vec& t, Vec& b)> fwd;  // lifted ambient -> (t,b)
  std::function<Vec(const Vec& t, const Vec& b)> inv;     // (t,b) -> ambient rep
  std::function<Mat(const Vec& u)> fwd_jac;               // d(t,b)/du, rows (t..,b..)

  int n() const { return box.dim(); }
  int q() const { return static_cast<int>(trans_axes.size()); }
  int p() const { return static_cast<int>(leaf_axes.size()); }

  std::pair<Vec, Vec> to_coords(const AmbientPoint& pt) const;  // throws "not in chart"
  Vec transverse_of(const AmbientPoint& pt) const { return to_coords(pt).first; }
  Vec leaf_of(const AmbientPoint& pt) const { return to_coords(pt).second; }
  AmbientPoint from_coords(const Vec& t, const Vec& b) const;
  // n x n, rows (t.., b..), columns ambient axes.
  Mat coords_jacobian(const AmbientPoint& pt) const;
  // Inverse of coords_jacobian: columns are chart frame vectors in ambient
  // coordinates, ordered (transverse.., leaf..).
  Mat frame(const AmbientPoint& pt) const;
};

/// Change of coordinates between two overlapping charts, split into the
/// transverse part h(t) and the leaf part g(t,b).
struct Transition {
  int source = -1, target = -1;
  Box overlap;  // ambient overlap of the two chart boxes
  std::function<Vec(const Vec& t)> h;
  std::function<Vec(const Vec& t, const Vec& b)> g;
  Mat dh(const Vec& t) const;  // numeric q x q Jacobian of h
};

struct RegularityWitness {
  int chart_a = -1, chart_b = -1;
  Box envelope;  // distinguished box containing the union
};

class FoliatedAtlas {
 public:
  int n = 0, p = 0, q = 0;
  std::string model_tag;
  bool regular = false;
  std::vector<Chart> charts;
  std::vector<Transition> transitions;
  std::vector<RegularityWitness> regularity;
  // Model-exact leaf membership predicate.
  std::function<bool(const AmbientPoint&, const AmbientPoint&)> same_leaf;
  // Builds a distinguished chart over an arbitrary box (len < 1 per axis);
  // any such box is a chart domain for the built-in models. Synthesized
  // charts carry id -1 and are not part of the atlas cover.
  std::function<Chart(const Box&)> chart_factory;

  const Chart& chart(int id) const { return charts.at(static_cast<size_t>(id)); }

  // Ids of charts whose box contains x, ordered by box margin, farthest from
  // the boundary first. Nonempty for covering atlases.
  std::vector<int> charts_containing(const AmbientPoint& x) const;

  // True iff both points lie in the chart box and their transverse chart
  // coordinates agree within tol. Throws "not in chart" otherwise.
  bool same_plaque(int chart_id, const AmbientPoint& a, const AmbientPoint& b,
                   double tol = 1e-9) const;

  // Chart id witnessing that x and y lie in the same plaque of some chart;
  // accepted pairs form the good local saturation of the diagonal.
  std::optional<int> in_good_saturation(const AmbientPoint& x, const AmbientPoint& y,
                                        double tol = 1e-9) const;

  // Coordinates of the same ambient point in chart j given chart-i
  // coordinates. Throws "not in overlap" outside the shared domain.
  std::pair<Vec, Vec> apply_transition(int i, int j, const Vec& t, const Vec& b) const;

  const Transition* find_transition(int i, int j) const;

  // Copy with every chart's leaf frame reversed (first leaf vector negated).
  FoliatedAtlas with_reversed_leaf_orientation() const;
};

/// Orientation-preserving circle diffeomorphism given by a lift
/// t + rotation + truncated Fourier series.
struct FourierTerm {
  int k = 1;
  double sin_coef = 0.0, cos_coef = 0.0;
};
struct CircleDiffeo {
  double rotation = 0.0;
  std::vector<FourierTerm> fourier;
  double lift(double t) const;
  double dlift(double t) const;
  double inverse_lift(double y) const;  // Newton on the monotone lift
  bool is_diffeo(int samples = 512) const;
};

// Coordinate foliation of T^n whose leaves are cosets of the subtorus spanned
// by leaf_axes. Charts are overlapping boxes with an axis-aligned split.
FoliatedAtlas make_linear_torus_foliation(int n, const std::vector<int>& leaf_axes,
                                          int boxes_per_axis = 3, double box_len = 0.45);

// Foliated T^2 suspending a circle diffeomorphism: leaves follow an isotopy
// from the identity to the monodromy as the base coordinate winds once, so
// the seam transition's transverse part is the monodromy itself.
FoliatedAtlas make_suspension(const CircleDiffeo& monodromy, int boxes_per_axis = 3,
                              double box_len = 0.45);

/// Closed or open polyline of ambient points; the q=1 transversal carrier.
struct Polyline {
  std::vector<AmbientPoint> pts;
  bool closed = false;
  size_t segment_count() const {
    if (pts.size() < 2) return 0;
    return closed ? pts.size() : pts.size() - 1;
  }
};

/// Quintic-smoothstep bump over a torus box: 1 on the box shrunk by `pad`,
/// 0 outside the box.
struct BoxBump {
  Box support;
  double pad = 0.0;
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
};

}  // namespace lamina
