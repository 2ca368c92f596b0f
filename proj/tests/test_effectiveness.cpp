#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "nlca/effectiveness.hpp"
#include "nlca/error.hpp"

using namespace nlca;

namespace {

// Central finite difference of one moment w.r.t. one surface.
double fd_entry(const EffectivenessModel& model, const ControlVector& u,
                const StateVector& sigma, int moment, int surface, double h) {
  ControlVector up = u;
  ControlVector dn = u;
  up[surface] += h;
  dn[surface] -= h;
  const MomentVector mp = model.evaluate(up, sigma);
  const MomentVector mn = model.evaluate(dn, sigma);
  return (mp[moment] - mn[moment]) / (2.0 * h);
}

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("elevator pitch response matches hand evaluation") {
  const SyntheticModel model;
  const MomentVector m = model.evaluate({10, 0, 0, 0, 0}, {0, 0});
  CHECK(m.cl == 0.0);
  CHECK(m.cm == doctest::Approx(-0.0105).epsilon(1e-12));
  CHECK(m.cn == 0.0);
}

TEST_CASE("left clamshell split produces pure yaw") {
  const SyntheticModel model;
  const MomentVector m = model.evaluate({0, 20, -20, 0, 0}, {0, 0});
  CHECK(m.cl == 0.0);
  CHECK(m.cm == 0.0);
  CHECK(m.cn == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("zero deflection maps to zero moments over the envelope") {
  const SyntheticModel model;
  for (double alpha : {0.0, 4.0, 8.0}) {
    for (double beta : {-12.0, 0.0, 12.0}) {
      const MomentVector m = model.evaluate({}, {alpha, beta});
      CHECK(norm1(m) == 0.0);
    }
  }
}

TEST_CASE("pitch slope at the origin equals the elevator gain") {
  const SyntheticModel model;
  const Mat35 g = model.jacobian_u({}, {0, 0});
  CHECK(g[5] == doctest::Approx(-1.0e-3).epsilon(1e-12));
}

TEST_CASE("jacobian matches central differences away from kinks") {
  const SyntheticModel model;
  const ControlVector points[] = {
      {3.0, 12.0, -5.0, 8.0, -9.0},
      {-7.5, 30.0, -22.0, 4.0, -1.0},
      {15.0, 5.0, -35.0, 33.0, -28.0},
  };
  const StateVector sigmas[] = {{1.0, -3.0}, {6.5, 9.0}, {4.0, 0.0}};
  for (int p = 0; p < 3; ++p) {
    const Mat35 g = model.jacobian_u(points[p], sigmas[p]);
    for (int m = 0; m < 3; ++m) {
      for (int s = 0; s < 5; ++s) {
        const double fd = fd_entry(model, points[p], sigmas[p], m, s, 1e-5);
        CHECK(g[5 * m + s] == doctest::Approx(fd).epsilon(1e-7).scale(1e-3));
      }
    }
  }
}

TEST_CASE("piecewise-linear ramp halves the slope past the knee") {
  SyntheticModelParams params;
  params.pwl_variant = true;
  const SyntheticModel model(params, BoxSet{}, StateBox{});

  // Ramp: identity to 10, slope 0.5 beyond, so r(20) = 15 and the plain
  // variant's quadratic term is absent.
  const MomentVector at20 = model.evaluate({20, 0, 0, 0, 0}, {0, 0});
  const MomentVector at5 = model.evaluate({5, 0, 0, 0, 0}, {0, 0});
  CHECK(at5.cm == doctest::Approx(-1.0e-3 * 5.0).epsilon(1e-12));
  CHECK(at20.cm == doctest::Approx(-1.0e-3 * 15.0).epsilon(1e-12));
}

TEST_CASE("piecewise-linear jacobian refuses the breakpoint") {
  SyntheticModelParams params;
  params.pwl_variant = true;
  const SyntheticModel model(params, BoxSet{}, StateBox{});
  CHECK_THROWS_WITH_AS(model.jacobian_u({10.0, 0, 0, 0, 0}, {0, 0}),
                       doctest::Contains("breakpoint"), Error);
  const Mat35 g = model.jacobian_u({10.001, 0, 0, 0, 0}, {0, 0});
  CHECK(g[5] == doctest::Approx(-1.0e-3 * 0.5).epsilon(1e-9));
}

TEST_CASE("piecewise-linear jacobian matches central differences off kinks") {
  SyntheticModelParams params;
  params.pwl_variant = true;
  const SyntheticModel model(params, BoxSet{}, StateBox{});
  const ControlVector u{4.0, 22.0, -3.0, 14.0, -27.0};
  const StateVector sigma{3.0, 5.0};
  const Mat35 g = model.jacobian_u(u, sigma);
  for (int m = 0; m < 3; ++m) {
    for (int s = 0; s < 5; ++s) {
      const double fd = fd_entry(model, u, sigma, m, s, 1e-6);
      CHECK(g[5 * m + s] == doctest::Approx(fd).epsilon(1e-6).scale(1e-3));
    }
  }
}

TEST_CASE("project_box clamps componentwise") {
  const BoxSet box;
  const ControlVector p = project_box({25.0, -3.0, -55.0, 12.0, 3.0}, box);
  CHECK(p[0] == 20.0);
  CHECK(p[1] == 0.0);
  CHECK(p[2] == -40.0);
  CHECK(p[3] == 12.0);
  CHECK(p[4] == 0.0);
  CHECK(box.contains(p, 0.0));
}

TEST_CASE("projection is idempotent and exact inside") {
  const BoxSet box;
  const ControlVector inside{-12.0, 17.0, -2.5, 0.0, -40.0};
  const ControlVector once = project_box(inside, box);
  for (int i = 0; i < 5; ++i) CHECK(once[i] == inside[i]);
  const ControlVector outside{100.0, 100.0, 100.0, 100.0, 100.0};
  const ControlVector p1 = project_box(outside, box);
  const ControlVector p2 = project_box(p1, box);
  for (int i = 0; i < 5; ++i) CHECK(p1[i] == p2[i]);
}

TEST_CASE("degenerate envelope is rejected") {
  BoxSet box;
  box.lower[2] = 1.0;
  box.upper[2] = -1.0;
  CHECK_THROWS_AS(box.validate(), Error);
}

TEST_CASE("axis affine model inverts exactly along each axis") {
  const LinearEffectivenessModel model = make_axis_affine_model(1e-3, 3.0);
  const MomentVector m = model.evaluate({1.0, 2.0, -1.5, 0.0, 0.0}, {4.0, 0.0});
  CHECK(m.cl == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(m.cm == doctest::Approx(2e-3).epsilon(1e-12));
  CHECK(m.cn == doctest::Approx(-1.5e-3).epsilon(1e-12));
}

TEST_CASE("model file round-trips the defaults") {
  const std::string path = temp_file("nlca_model_roundtrip.cfg");
  ModelFile mf;
  save_model_file(mf, path);
  const ModelFile back = load_model_file(path);
  CHECK(back.params.c_le == mf.params.c_le);
  CHECK(back.params.c_m2 == mf.params.c_m2);
  CHECK(back.params.pwl_variant == mf.params.pwl_variant);
  for (int i = 0; i < 5; ++i) {
    CHECK(back.box.lower[i] == mf.box.lower[i]);
    CHECK(back.box.upper[i] == mf.box.upper[i]);
  }
  CHECK(back.envelope.upper.alpha == mf.envelope.upper.alpha);
  std::filesystem::remove(path);
}

TEST_CASE("model file loader rejects junk") {
  const std::string path = temp_file("nlca_model_junk.cfg");
  std::FILE* f = std::fopen(path.c_str(), "w");
  std::fputs("c_le 0.1 no equals sign\n", f);
  std::fclose(f);
  CHECK_THROWS_AS(load_model_file(path), Error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model_file("/nonexistent/nlca/model.cfg"), Error);
}
