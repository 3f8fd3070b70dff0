#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mellin_radon/errors.hpp"
#include "mellin_radon/gamma.hpp"
#include "mellin_radon/scene.hpp"
#include "mellin_radon/selftest.hpp"

using namespace mellin_radon;

namespace {

const char* kMinimal = R"([cost]
expr = (ces :alpha 0.5 :C 1 :a (0.5 0.5) (axis 1) (axis 2))
[grid]
ymin = -4
ymax = 4
N = 32
)";

struct Caught {
  ErrorKind kind = ErrorKind::Argument;
  std::string what;
};

Caught parse_error(const std::string& text) {
  try {
    SceneConfig::parse(text);
  } catch (const Error& e) {
    return {e.kind(), e.what()};
  }
  FAIL("no error thrown");
  return {};
}

}  // namespace

TEST_CASE("scene defaults") {
  const auto sc = SceneConfig::parse(kMinimal);
  CHECK(sc.dim() == 2);
  CHECK(sc.f_family == "gamma-product");
  CHECK(sc.plane() == std::vector<double>{0.5, 0.5});
  CHECK(sc.r == WeightedNormSpec::R::Two);
  CHECK(sc.synthetic());
  CHECK_FALSE(sc.kernel);
  const auto pg = sc.p_grid();
  CHECK(pg.y0[0] == doctest::Approx(-sc.grid.y_max(0)));
  CHECK(pg.y_max(0) == doctest::Approx(-sc.grid.y0[0]));
  CHECK(sc.sample_f().values().size() == 32 * 32);
}

TEST_CASE("demo scene text matches the shipped config") {
  std::ifstream in(std::string(MR_SOURCE_DIR) + "/configs/demo.scene");
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == demo_scene_text());
  const auto sc = SceneConfig::parse(demo_scene_text());
  CHECK(sc.plane() == std::vector<double>{1.0, 1.0});
  CHECK(sc.coverage == CoveragePolicy::Zero);
  REQUIRE(sc.kernel);
  CHECK(sc.kernel->kind() == KernelSpec::Kind::Exponential);
  CHECK(sc.inversion.epsilon == 1e-4);
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"demo.scene", "nested.scene", "two_exponential.scene"}) {
    CAPTURE(name);
    CHECK_NOTHROW(SceneConfig::load(std::string(MR_SOURCE_DIR) + "/configs/" + name));
  }
  CHECK(SceneConfig::load(std::string(MR_SOURCE_DIR) + "/configs/nested.scene").dim() == 3);
}

TEST_CASE("multi-line cost expressions") {
  const auto sc = SceneConfig::parse(R"([cost]
expr = (ces :alpha 0.5 :C 1 :a (0.6 0.4)
         (ces :alpha 0.8 :C 1 :a (0.5 0.5) (axis 1) (axis 2))
         (axis 3))
[grid]
ymin = -3
ymax = 3
N = 16
)");
  CHECK(sc.dim() == 3);
}

TEST_CASE("scene parse errors carry positions") {
  auto e = parse_error(std::string(kMinimal) + "[bogus]\n");
  CHECK(e.kind == ErrorKind::Parse);
  CHECK(e.what.find("line 7, column 1") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "N = 64\n");
  CHECK(e.what.find("duplicate key 'N'") != std::string::npos);
  CHECK(e.what.find("line 7") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[options]\nfoo = 1\n");
  CHECK(e.kind == ErrorKind::Parse);
  CHECK(e.what.find("foo") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "just words\n");
  CHECK(e.what.find("expected 'key = value'") != std::string::npos);

  e = parse_error("[cost]\nexpr = (ces :alpha 1.5 :C 1 :a (0.5 0.5) (axis 1) (axis 2))\n[grid]\nymin=-1\nymax=1\nN=16\n");
  CHECK(e.kind == ErrorKind::Parse);
  CHECK(e.what.find("(0, 1]") != std::string::npos);
  CHECK(e.what.find("line 2, column 20") != std::string::npos);

  e = parse_error("[cost]\nexpr = (ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 1))\n[grid]\nymin=-1\nymax=1\nN=16\n");
  CHECK(e.kind == ErrorKind::Structural);
  CHECK(e.what.find("line 2") != std::string::npos);

  e = parse_error("[cost]\nexpr = (ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1)\n");
  CHECK(e.kind == ErrorKind::Parse);
  CHECK(e.what.find("unbalanced") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[options]\nc = 1 -1\n");
  CHECK(e.what.find("line 8") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[f]\nfamily = nonesuch\n");
  CHECK(e.kind == ErrorKind::Parse);
  CHECK(e.what.find("nonesuch") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[kernel]\ntype = wobbly\n");
  CHECK(e.what.find("unknown kernel type") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[options]\nr = 3\n");
  CHECK(e.kind == ErrorKind::Parse);

  CHECK(parse_error("[grid]\nymin=-1\nymax=1\nN=16\n").kind == ErrorKind::Parse);
}

TEST_CASE("synthetic families") {
  const std::vector<double> x{1.0, 2.0};
  CHECK(synthetic_family("gamma-product", 2, {})(x) == doctest::Approx(0.5 * std::exp(-1.0) * 2.0 * std::exp(-2.0)));
  CHECK(synthetic_family("zero", 2, {})(x) == 0.0);
  CHECK(synthetic_family("power-times-exponential", 2, {{"power", {1.0}}, {"rate", {0.0}}})(x) == doctest::Approx(2.0));
  CHECK_THROWS_AS(synthetic_family("lognormal-bump", 2, {{"sigma", {-1.0}}}), Error);
  CHECK_THROWS_AS(synthetic_family("gamma-product", 2, {{"k", {1.0, 2.0, 3.0}}}), Error);
}

TEST_CASE("tolerance table") {
  CHECK(tolerance_table().is_object());
  CHECK_THROWS_AS(tolerance("no-such-id"), Error);
}

TEST_CASE("a perturbed Gamma fails the projection identity") {
  testing::set_gamma_perturbation(0.1);
  const auto broken = check_projection();
  testing::set_gamma_perturbation(0.0);
  bool failed = false;
  for (const auto& c : broken) failed = failed || (c.criterion == 2 && !c.pass);
  CHECK(failed);
  const auto ok = check_projection();
  for (const auto& c : ok) CHECK(c.pass);
}
