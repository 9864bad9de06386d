#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lamina/geometry.hpp>

using namespace lamina;

TEST_CASE("ambient points normalize and measure torus distance") {
  AmbientPoint a = make_point({1.25, -0.1});
  CHECK(a.x[0] == doctest::Approx(0.25));
  CHECK(a.x[1] == doctest::Approx(0.9));
  AmbientPoint b = make_point({0.95, 0.05});
  AmbientPoint c = make_point({0.05, 0.05});
  CHECK(torus_distance(b, c) == doctest::Approx(0.1));
  CHECK(torus_delta(c, b)[0] == doctest::Approx(0.1));
}

TEST_CASE("boxes wrap, lift and intersect") {
  Box b;
  b.lo = Vec::Constant(1, 0.9);
  b.len = Vec::Constant(1, 0.3);  // (0.9, 1.2) through the seam
  CHECK(b.contains(make_point({0.05}).x));
  CHECK(b.contains(make_point({0.95}).x));
  CHECK(!b.contains(make_point({0.5}).x));
  CHECK(b.lift(Vec::Constant(1, 0.05))[0] == doctest::Approx(1.05));

  Box c;
  c.lo = Vec::Constant(1, 0.0);
  c.len = Vec::Constant(1, 0.45);
  auto ov = Box::intersect(b, c);
  REQUIRE(ov.has_value());
  CHECK(ov->lo[0] == doctest::Approx(0.0));
  CHECK(ov->len[0] == doctest::Approx(0.2));
  Box far_box;
  far_box.lo = Vec::Constant(1, 0.4);
  far_box.len = Vec::Constant(1, 0.2);
  CHECK(!Box::intersect(b, far_box).has_value());
}

TEST_CASE("linear torus foliation construction and degenerate splits") {
  FoliatedAtlas atlas = make_linear_torus_foliation(2, {1});
  CHECK(atlas.n == 2);
  CHECK(atlas.p == 1);
  CHECK(atlas.q == 1);
  CHECK(atlas.regular);
  CHECK(atlas.charts.size() == 9);

  FoliatedAtlas t3 = make_linear_torus_foliation(3, {1, 2});
  CHECK(t3.p == 2);
  CHECK(t3.charts.size() == 27);

  CHECK_THROWS_WITH_AS(make_linear_torus_foliation(2, {0, 1}), "bad split",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(make_linear_torus_foliation(2, std::vector<int>{}), "bad split",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(make_linear_torus_foliation(2, {2}), "bad split",
                       std::invalid_argument);
}

TEST_CASE("charts_containing orders by boundary margin and respects wrapping") {
  FoliatedAtlas atlas = make_linear_torus_foliation(2, {1});
  AmbientPoint deep = make_point({0.2, 0.2});
  auto ids = atlas.charts_containing(deep);
  REQUIRE(!ids.empty());
  const Chart& first = atlas.chart(ids[0]);
  for (int id : ids)
    CHECK(first.box.margin(deep.x) >= atlas.chart(id).box.margin(deep.x));

  auto ids2 = atlas.charts_containing(make_point({1.2, -0.8}));
  CHECK(ids == ids2);

  AmbientPoint ov = make_point({0.4, 0.2});
  CHECK(atlas.charts_containing(ov).size() >= 2);
}

TEST_CASE("same_plaque separates transverse coordinates") {
  FoliatedAtlas atlas = make_linear_torus_foliation(2, {1}, 3, 0.6);
  AmbientPoint a = make_point({0.2, 0.1});
  AmbientPoint b = make_point({0.2, 0.55});
  AmbientPoint c = make_point({0.3, 0.1});
  int chart = -1;
  for (int id : atlas.charts_containing(a))
    if (atlas.chart(id).box.contains(b)) {
      chart = id;
      break;
    }
  REQUIRE(chart >= 0);  // leaf-height 0.6 boxes cover both points
  CHECK(atlas.same_plaque(chart, a, a));
  CHECK(atlas.same_plaque(chart, a, b));
  if (atlas.chart(chart).box.contains(c)) CHECK(!atlas.same_plaque(chart, a, c));
  CHECK_THROWS_WITH_AS(atlas.same_plaque(chart, a, make_point({0.2, 0.9})), "not in chart",
                       std::invalid_argument);
}

TEST_CASE("good saturation accepts plaque-mates and is symmetric") {
  FoliatedAtlas atlas = make_linear_torus_foliation(2, {1});
  AmbientPoint x = make_point({0.2, 0.1});
  CHECK(atlas.in_good_saturation(x, x).has_value());
  AmbientPoint near = make_point({0.2, 0.18});
  CHECK(atlas.in_good_saturation(x, near).has_value());
  AmbientPoint other_leaf = make_point({0.5, 0.1});
  CHECK(!atlas.in_good_saturation(x, other_leaf).has_value());

  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    AmbientPoint a = make_point({rng.uniform01(), rng.uniform01()});
    AmbientPoint b = make_point({a.x[0], rng.uniform01()});
    CHECK(atlas.in_good_saturation(a, b).has_value() ==
          atlas.in_good_saturation(b, a).has_value());
  }
}

TEST_CASE("plaque relation is an equivalence on samples") {
  FoliatedAtlas atlas = make_linear_torus_foliation(2, {1});
  const Chart& c = atlas.chart(0);
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Vec u = c.box.lo + Vec(c.box.len * 0.2) + Vec(c.box.len * 0.6 * rng.uniform01());
    AmbientPoint a{u};
    auto [t, bb] = c.to_coords(a);
    AmbientPoint b = c.from_coords(t, Vec(bb.array() + 0.01));
    AmbientPoint d = c.from_coords(t, Vec(bb.array() - 0.01));
    CHECK(atlas.same_plaque(0, a, a));
    CHECK(atlas.same_plaque(0, a, b));
    CHECK(atlas.same_plaque(0, b, a));
    CHECK((atlas.same_plaque(0, a, b) && atlas.same_plaque(0, b, d) &&
           atlas.same_plaque(0, a, d)));
  }
}

TEST_CASE("transitions: identity, round trip, cocycle on triple overlaps") {
  FoliatedAtlas atlas = make_linear_torus_foliation(2, {1});
  Rng rng(3);
  int cocycle_checked = 0, roundtrip_checked = 0;
  for (int trial = 0; trial < 4000 && (cocycle_checked < 50 || roundtrip_checked < 50);
       ++trial) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01()});
    auto ids = atlas.charts_containing(x);
    auto [t, b] = atlas.chart(ids[0]).to_coords(x);
    {
      auto [ti, bi] = atlas.apply_transition(ids[0], ids[0], t, b);
      CHECK((ti - t).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    }
    if (ids.size() >= 2 && roundtrip_checked < 50) {
      ++roundtrip_checked;
      auto [t1, b1] = atlas.apply_transition(ids[0], ids[1], t, b);
      auto [t0, b0] = atlas.apply_transition(ids[1], ids[0], t1, b1);
      CHECK((t0 - t).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((b0 - b).cwiseAbs().maxCoeff() < 1e-10);
    }
    if (ids.size() >= 3 && cocycle_checked < 50) {
      ++cocycle_checked;
      auto [t1, b1] = atlas.apply_transition(ids[0], ids[1], t, b);
      auto [t2, b2] = atlas.apply_transition(ids[1], ids[2], t1, b1);
      auto [t2d, b2d] = atlas.apply_transition(ids[0], ids[2], t, b);
      CHECK((t2 - t2d).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((b2 - b2d).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  CHECK(cocycle_checked >= 50);
  CHECK(roundtrip_checked >= 50);

  AmbientPoint corner = make_point({0.2, 0.2});
  auto ids = atlas.charts_containing(corner);
  auto [t, b] = atlas.chart(ids[0]).to_coords(corner);
  bool found_outside = false;
  for (const Chart& c : atlas.charts)
    if (!c.box.contains(corner) && atlas.find_transition(ids[0], c.id)) {
      CHECK_THROWS_WITH_AS(atlas.apply_transition(ids[0], c.id, t, b), "not in overlap",
                           std::invalid_argument);
      found_outside = true;
      break;
    }
  CHECK(found_outside);
}

TEST_CASE("transitions are orientation-consistent local diffeomorphisms") {
  for (const FoliatedAtlas& atlas :
       {make_linear_torus_foliation(3, {1, 2}), make_suspension({0.3, {}})}) {
    Rng rng(5);
    for (const Transition& tr : atlas.transitions) {
      const Chart& src = atlas.chart(tr.source);
      const Chart& dst = atlas.chart(tr.target);
      for (int s = 0; s < 5; ++s) {
        Vec x(atlas.n);
        for (int i = 0; i < atlas.n; ++i)
          x[i] = tr.overlap.lo[i] + tr.overlap.len[i] * rng.uniform(0.05, 0.95);
        AmbientPoint pt{x};
        Mat D = dst.coords_jacobian(pt) * src.frame(pt);
        Mat leaf_block = D.bottomRightCorner(atlas.p, atlas.p);
        CHECK(leaf_block.determinant() > 0.0);
        // transverse part of the change of coordinates is nonsingular
        Mat h_block = D.topLeftCorner(atlas.q, atlas.q);
        CHECK(std::abs(h_block.determinant()) > 0.1);
      }
    }
  }
}

TEST_CASE("suspension: product for trivial monodromy, seam carries the rotation") {
  FoliatedAtlas prod = make_suspension({0.0, {}});
  for (const Transition& tr : prod.transitions) {
    const Chart& src = prod.chart(tr.source);
    const Chart& dst = prod.chart(tr.target);
    Vec x = tr.overlap.lo + Vec(0.5 * tr.overlap.len);
    AmbientPoint pt{x};
    double ti = src.to_coords(pt).first[0];
    double tj = dst.to_coords(pt).first[0];
    CHECK(circle_dist(ti, tj) < 1e-10);  // identity holonomy up to lift
  }

  FoliatedAtlas rot = make_suspension({0.3, {}});
  bool seam_seen = false;
  for (const Transition& tr : rot.transitions) {
    const Chart& src = rot.chart(tr.source);
    const Chart& dst = rot.chart(tr.target);
    Vec x = tr.overlap.lo + Vec(0.5 * tr.overlap.len);
    AmbientPoint pt{x};
    double shift = wrap01(dst.to_coords(pt).first[0] - src.to_coords(pt).first[0]);
    bool plus = circle_dist(shift, 0.3) < 1e-9;
    bool minus = circle_dist(shift, 0.7) < 1e-9;  // inverse direction
    bool trivial = circle_dist(shift, 0.0) < 1e-9;
    CHECK((plus || minus || trivial));
    if (plus) seam_seen = true;
  }
  CHECK(seam_seen);

  CircleDiffeo bad{0.0, {{1, 0.2, 0.0}}};  // derivative 1 + 0.4 pi cos 2 pi t vanishes
  CHECK(!bad.is_diffeo());
  CHECK_THROWS_WITH_AS(make_suspension(bad), "monodromy not invertible",
                       std::invalid_argument);
}

TEST_CASE("suspension charts invert their straightening") {
  FoliatedAtlas atlas = make_suspension({0.3, {{2, 0.02, 0.01}}});
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01()});
    const Chart& c = atlas.chart(atlas.charts_containing(x)[0]);
    auto [t, b] = c.to_coords(x);
    AmbientPoint back = c.from_coords(t, b);
    CHECK(torus_distance(x, back) < 1e-12);
  }
}

TEST_CASE("suspension chart jacobians match finite differences") {
  FoliatedAtlas atlas = make_suspension({0.3, {{1, 0.05, 0.0}}});
  Rng rng(19);
  for (int i = 0; i < 50; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01()});
    const Chart& c = atlas.chart(atlas.charts_containing(x)[0]);
    Mat J = c.coords_jacobian(x);
    Vec u0 = c.box.lift(x.x);
    Mat Jfd = richardson_jacobian(
        [&](const Vec& u) {
          Vec t, b;
          c.fwd(u, t, b);
          Vec out(2);
          out << t, b;
          return out;
        },
        u0, 1e-5);
    CHECK((J - Jfd).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("bump is one on the core and zero outside the support") {
  BoxBump bump;
  bump.support.lo = Vec::Constant(2, 0.1);
  bump.support.len = Vec::Constant(2, 0.3);
  bump.pad = 0.05;
  CHECK(bump.value(Vec::Constant(2, 0.25)) == doctest::Approx(1.0));
  CHECK(bump.value(Vec::Constant(2, 0.05)) == doctest::Approx(0.0));
  CHECK(bump.value(Vec::Constant(2, 0.12)) > 0.0);
  CHECK(bump.value(Vec::Constant(2, 0.12)) < 1.0);
  Vec x = Vec::Constant(2, 0.13);
  Vec g = bump.gradient(x);
  for (int i = 0; i < 2; ++i) {
    Vec xp = x, xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    CHECK(g[i] == doctest::Approx((bump.value(xp) - bump.value(xm)) / 2e-6).epsilon(1e-4));
  }
}
