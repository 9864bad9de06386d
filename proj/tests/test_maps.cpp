#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lamina/maps.hpp>

using namespace lamina;

namespace {

FoliatedAtlas t2() { return make_linear_torus_foliation(2, {1}); }
FoliatedAtlas t3() { return make_linear_torus_foliation(3, {1, 2}); }

Mat hyperbolic() {
  Mat A(2, 2);
  A << 2, 1, 1, 1;
  return A;
}

}  // namespace

TEST_CASE("evaluate: identity, mod-1 shift, hyperbolic leaf action") {
  FoliatedAtlas atlas = t2();
  FoliationMap id = identity_map(atlas);
  AmbientPoint x = make_point({0.3, 0.7});
  CHECK(torus_distance(id(x), x) == 0.0);

  Vec s(2);
  s << 0.0, 0.25;
  FoliationMap shift = translation_map(atlas, s);
  AmbientPoint y = shift(make_point({0.1, 0.9}));
  CHECK(y.x[0] == doctest::Approx(0.1));
  CHECK(y.x[1] == doctest::Approx(0.15));

  FoliatedAtlas atlas3 = t3();
  FoliationMap hyp = leaf_map(atlas3, hyperbolic(), {});
  AmbientPoint z = hyp(make_point({0.0, 0.5, 0.5}));
  CHECK(z.x[0] == doctest::Approx(0.0));
  CHECK(z.x[1] == doctest::Approx(0.5));  // 2*0.5 + 0.5 = 1.5 -> 0.5
  CHECK(z.x[2] == doctest::Approx(0.0));  // 0.5 + 0.5 = 1.0 -> 0.0
}

TEST_CASE("leaf_map validates its inputs") {
  FoliatedAtlas atlas = t2();
  Mat bad(1, 1);
  bad << 1.5;
  CHECK_THROWS_AS(leaf_map(atlas, bad, {}), std::invalid_argument);
  FoliatedAtlas atlas3 = t3();
  CHECK_THROWS_AS(leaf_map(atlas3, hyperbolic(), {}, FourierSeries{0.1, {}}),
                  std::invalid_argument);  // leaf fourier needs p = 1
}

TEST_CASE("full_jacobian: identity and constant hyperbolic leaf block") {
  FoliatedAtlas atlas3 = t3();
  FoliationMap id = identity_map(atlas3);
  AmbientPoint x = make_point({0.21, 0.43, 0.65});
  CHECK((full_jacobian(id, x) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  FoliationMap hyp = leaf_map(atlas3, hyperbolic(), {});
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    AmbientPoint p = make_point({rng.uniform01(), rng.uniform01(), rng.uniform01()});
    Mat J = full_jacobian(hyp, p);
    CHECK((J.bottomRightCorner(2, 2) - hyperbolic()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("finite differences agree with exact jacobians on the sine model") {
  FoliatedAtlas atlas = t2();
  FourierSeries sine{0.0, {{1, 0.05, 0.0}}};
  FoliationMap phi = leaf_map(atlas, Mat::Identity(1, 1), {}, sine);
  FoliationMap fd = phi;
  fd.jac_fn = nullptr;  // force the Richardson path
  Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01()});
    Mat Je = full_jacobian(phi, x);
    Mat Jf = full_jacobian(fd, x);
    CHECK((Je - Jf).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("leafwise_jacobian matches the hand derivative 1 + 2 pi eps cos") {
  FoliatedAtlas atlas = t2();
  FourierSeries sine{0.0, {{1, 0.05, 0.0}}};
  FoliationMap phi = leaf_map(atlas, Mat::Identity(1, 1), {}, sine);
  Mat L0 = leafwise_jacobian(phi, make_point({0.2, 0.0}));
  CHECK(L0(0, 0) == doctest::Approx(1.0 + 2.0 * M_PI * 0.05).epsilon(1e-12));
  Mat Lh = leafwise_jacobian(phi, make_point({0.2, 0.5}));
  CHECK(Lh(0, 0) == doctest::Approx(1.0 - 2.0 * M_PI * 0.05).epsilon(1e-12));

  FoliationMap id = identity_map(atlas);
  CHECK(leafwise_jacobian(id, make_point({0.9, 0.9}))(0, 0) == doctest::Approx(1.0));

  FoliatedAtlas atlas3 = t3();
  FoliationMap hyp = leaf_map(atlas3, hyperbolic(), {});
  Mat A = leafwise_jacobian(hyp, make_point({0.77, 0.12, 0.34}));
  CHECK((A - hyperbolic()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("chain rule holds on samples") {
  FoliatedAtlas atlas = t2();
  FourierSeries sine{0.1, {{1, 0.04, 0.02}}};
  FoliationMap f = leaf_map(atlas, Mat::Identity(1, 1), {}, sine);
  Vec s(2);
  s << 0.0, 0.3;
  FoliationMap g = translation_map(atlas, s);
  FoliationMap fg = compose(f, g);
  Rng rng(6);
  for (int i = 0; i < 30; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01()});
    AmbientPoint gx = g(x);
    int cs = atlas.charts_containing(x)[0];
    int cm = atlas.charts_containing(gx)[0];
    int ct = atlas.charts_containing(fg(x))[0];
    Mat lhs = full_jacobian(fg, x, cs, ct);
    Mat rhs = full_jacobian(f, gx, cm, ct) * full_jacobian(g, x, cs, cm);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("leaf-preserving maps have vanishing transverse-leaf block") {
  FoliatedAtlas atlas3 = t3();
  std::vector<FourierSeries> off{{0.0, {{1, 0.1, 0.0}}}, {0.0, {{2, 0.0, 0.07}}}};
  FoliationMap m = leaf_map(atlas3, hyperbolic(), off);
  Rng rng(8);
  for (int i = 0; i < 30; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01(), rng.uniform01()});
    Mat J = full_jacobian(m, x);
    CHECK(J.block(0, atlas3.q, atlas3.q, atlas3.p).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("leafwise det sign is chart independent") {
  FoliatedAtlas atlas3 = t3();
  std::vector<FourierSeries> off{{0.0, {{1, 0.1, 0.0}}}, {}};
  FoliationMap m = leaf_map(atlas3, hyperbolic(), off);
  Rng rng(10);
  for (int i = 0; i < 20; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01(), rng.uniform01()});
    AmbientPoint y = m(x);
    int ref = 0;
    bool first = true;
    for (int cs : atlas3.charts_containing(x))
      for (int ct : atlas3.charts_containing(y)) {
        int s = sign_of(leafwise_jacobian(m, x, cs, ct).determinant());
        if (first) {
          ref = s;
          first = false;
        }
        CHECK(s == ref);
      }
  }
}

TEST_CASE("leafwise_jacobian rejects plaque-breaking maps") {
  FoliatedAtlas atlas = t2();
  Vec s(2);
  s << 0.2, 0.0;  // transverse shift: no single target plaque for a plaque
  FoliationMap m = translation_map(atlas, s);
  FoliationMap skew = m;
  // jacobian with a transverse-leaf coupling violates plaque locality
  skew.jac_fn = [](const Vec&) {
    Mat J = Mat::Identity(2, 2);
    J(0, 1) = 0.5;
    return J;
  };
  CHECK_THROWS_WITH_AS(leafwise_jacobian(skew, make_point({0.2, 0.2})),
                       "map not plaque-local at x", NumericalError);
}

TEST_CASE("check_leaf_space_compatible: shifts agree, transverse shift does not") {
  FoliatedAtlas atlas = t2();
  Options opts;
  FoliationMap id = identity_map(atlas);
  CHECK(check_leaf_space_compatible(id, id, 128, 1, opts).compatible);

  Vec a(2), b(2);
  a << 0.0, 0.2;
  b << 0.0, 0.7;
  FoliationMap fa = translation_map(atlas, a);
  FoliationMap fb = translation_map(atlas, b);
  CHECK(check_leaf_space_compatible(fa, fb, 128, 1, opts).compatible);

  Vec c(2);
  c << 0.1, 0.0;
  FoliationMap fc = translation_map(atlas, c);
  CompatReport rep = check_leaf_space_compatible(fc, id, 128, 1, opts);
  CHECK(!rep.compatible);
  CHECK(!rep.violations.empty());
}

TEST_CASE("inverse and composed maps evaluate and differentiate consistently") {
  FoliatedAtlas atlas = t2();
  FourierSeries sine{0.2, {{1, 0.05, 0.0}}};
  FoliationMap psi = leaf_map(atlas, Mat::Identity(1, 1), {}, sine);
  FoliationMap inv = inverse_map(psi);
  Rng rng(12);
  for (int i = 0; i < 30; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01()});
    CHECK(torus_distance(psi(inv(x)), x) < 1e-10);
    Mat J = inv.ambient_jacobian(x.x);
    Mat Jpsi = psi.ambient_jacobian(inv(x).x);
    CHECK((J * Jpsi - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("sp_contains: base map, small leafwise shift, transverse shift") {
  FoliatedAtlas atlas = t2();
  Options opts;
  FoliationMap base = identity_map(atlas);
  SpNeighborhood nbhd = derive_sp_neighborhood(base, 0, 0.1, 0.12, opts);
  CHECK(!nbhd.patches.empty());

  CHECK(sp_contains(nbhd, base, opts).contains);

  Vec s(2);
  s << 0.0, 0.05;
  FoliationMap close = translation_map(atlas, s);
  SpReport rep = sp_contains(nbhd, close, opts);
  CHECK(rep.contains);
  CHECK(rep.max_c0 == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(rep.max_plaque_dev <= opts.tol_plaque);

  Vec t(2);
  t << 0.3, 0.0;
  FoliationMap far_map = translation_map(atlas, t);
  CHECK(!sp_contains(nbhd, far_map, opts).contains);
}

TEST_CASE("sp_contains at order one bounds the jacobian deviation") {
  FoliatedAtlas atlas = t2();
  Options opts;
  FoliationMap base = identity_map(atlas);
  SpNeighborhood nbhd = derive_sp_neighborhood(base, 1, 0.1, 0.12, opts);

  FourierSeries gentle{0.0, {{1, 0.005, 0.0}}};  // C1 distance ~ 0.031
  FoliationMap near = leaf_map(atlas, Mat::Identity(1, 1), {}, gentle);
  SpReport ok = sp_contains(nbhd, near, opts);
  CHECK(ok.contains);
  CHECK(ok.max_c1 > 0.0);

  FourierSeries steep{0.0, {{3, 0.02, 0.0}}};  // C1 distance ~ 0.38 > eps
  FoliationMap bad = leaf_map(atlas, Mat::Identity(1, 1), {}, steep);
  CHECK(!sp_contains(nbhd, bad, opts).contains);
}

TEST_CASE("sp_contains patches satisfy the neighborhood invariants") {
  FoliatedAtlas atlas = t3();
  Options opts;
  std::vector<FourierSeries> off{{0.0, {{1, 0.1, 0.0}}}, {}};
  FoliationMap base = leaf_map(atlas, hyperbolic(), off);
  SpNeighborhood nbhd = derive_sp_neighborhood(base, 0, 0.12, 0.3, opts);
  for (const SpPatch& patch : nbhd.patches) {
    const Chart& src = atlas.chart(patch.source_chart);
    CHECK(src.box.contains_box(patch.K));
    // base(K_i) inside the assigned target chart
    for (double fx : {0.05, 0.5, 0.95})
      for (double fy : {0.05, 0.5, 0.95})
        for (double fz : {0.05, 0.5, 0.95}) {
          Vec x(3);
          x << patch.K.lo[0] + fx * patch.K.len[0], patch.K.lo[1] + fy * patch.K.len[1],
              patch.K.lo[2] + fz * patch.K.len[2];
          CHECK(patch.target.box.contains(base(AmbientPoint{x}).x));
        }
  }
}

TEST_CASE("bump shift maps carry exact jacobians") {
  FoliatedAtlas atlas = t2();
  BoxBump bump;
  bump.support = atlas.chart(4).box.shrunk(0.01);
  bump.pad = 0.04;
  Vec c = Vec::Constant(1, 0.007);
  FoliationMap s = bump_shift_map(atlas, 4, bump, c);
  FoliationMap fd = s;
  fd.jac_fn = nullptr;
  Rng rng(14);
  for (int i = 0; i < 40; ++i) {
    AmbientPoint x = make_point({rng.uniform01(), rng.uniform01()});
    Mat Je = s.ambient_jacobian(x.x);
    Mat Jf = fd.ambient_jacobian(x.x);
    CHECK((Je - Jf).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(verify_leaf_preserving(s, 128, 3));
}
