#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mellin_radon/diagnostics.hpp"
#include "mellin_radon/errors.hpp"
#include "mellin_radon/scene.hpp"

using namespace mellin_radon;

namespace {

const CostExpr& half() {
  static const CostExpr q = CostExpr::parse("(ces :alpha 0.5 :C 1 :a (0.5 0.5) (axis 1) (axis 2))");
  return q;
}

const CostExpr& nested3() {
  static const CostExpr q = CostExpr::parse(
      "(ces :alpha 0.5 :C 1 :a (0.6 0.4) (ces :alpha 0.8 :C 1 :a (0.5 0.5) (axis 1) (axis 2)) (axis 3))");
  return q;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Argument;
}

const std::vector<double> kC{1.0, 1.0};

}  // namespace

TEST_CASE("zero_scan certifies CES trees") {
  const auto rep = zero_scan(half(), kC, 20.0, 128);
  CHECK(rep.analytic);
  CHECK(rep.min_modulus > 0.0);
  CHECK(rep.resolution == 128);
  CHECK(rep.argmin.size() == 2);
  const std::vector<double> c3{1.0, 1.0, 1.0};
  CHECK(zero_scan(nested3(), c3, 10.0, 16).analytic);
  const auto j = rep.to_json();
  CHECK(j.contains("classification"));
  CHECK(kind_of([&] { zero_scan(half(), kC, 20.0, 8); }) == ErrorKind::Argument);
  const std::vector<double> bad{1.0, -1.0};
  CHECK(kind_of([&] { zero_scan(half(), bad, 20.0, 32); }) == ErrorKind::Domain);
}

TEST_CASE("zero_scan property: random CES trees and planes") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> A(0.1, 1.0), W(0.1, 0.9), Cc(0.1, 5.0);
  for (int k = 0; k < 10; ++k) {
    const double w = W(rng);
    std::ostringstream os;
    os << "(ces :alpha " << A(rng) << " :C 1 :a (" << w << " " << 1.0 - w << ") (axis 1) (axis 2))";
    const auto q = CostExpr::parse(os.str());
    const std::vector<double> c{Cc(rng), Cc(rng)};
    CAPTURE(os.str());
    const auto rep = zero_scan(q, c, 10.0, 32);
    CHECK(rep.analytic);
    CHECK(rep.min_modulus > 0.0);
    for (std::size_t i = 1; i < rep.candidates.size(); ++i)
      CHECK(rep.candidates[i - 1].modulus <= rep.candidates[i].modulus);
  }
}

TEST_CASE("manufactured zero is located within one lattice cell") {
  const cplx root(1.0, 5.0);
  auto log_k = [&](std::span<const cplx> z) {
    return log_mellin_expcost_closed(half(), z) + std::log(z[0] - root) - std::log(z[0] - root + 1.0);
  };
  const double radius = 9.0;
  const std::size_t res = 128;
  const auto rep = zero_scan_symbol(log_k, kC, radius, res);
  CHECK_FALSE(rep.analytic);
  CHECK(rep.classification == ZeroClass::IsolatedZeros);
  REQUIRE_FALSE(rep.candidates.empty());
  const double cell = 2.0 * radius / static_cast<double>(res);
  CHECK(std::abs(rep.candidates.front().xi[0] - 5.0) <= cell);
  CHECK(combine_verdict(rep, nullptr, WeightedNormSpec::R::Inf) == Verdict::NotInjectiveNumerical);
  CHECK(combine_verdict(rep, nullptr, WeightedNormSpec::R::Two) == Verdict::InjectiveNumerical);
  CHECK(combine_verdict(rep, nullptr, WeightedNormSpec::R::One) == Verdict::InjectiveNumerical);
}

TEST_CASE("kernel_zero_scan") {
  const auto prof = kernel_zero_scan(KernelSpec::profit(1.0), 2.0, 8.0, 256);
  CHECK(prof.analytic);
  CHECK(prof.min_modulus > 0.0);
  const auto ex = kernel_zero_scan(KernelSpec::exponential(), 0.7, 8.0, 256);
  CHECK(ex.analytic);
  CHECK(ex.min_modulus > 0.0);
  const auto two = kernel_zero_scan(two_exponential_kernel(), 1.0, 8.0, 256);
  CHECK_FALSE(two.analytic);
  CHECK(two.classification == ZeroClass::IsolatedZeros);
  REQUIRE_FALSE(two.candidates.empty());
  CHECK(std::abs(two.candidates.front().xi[0]) <= 16.0 / 256.0);
  CHECK(kind_of([] { kernel_zero_scan(KernelSpec::exponential(), 0.0, 8.0, 256); }) == ErrorKind::Integrability);
}

TEST_CASE("injectivity_report verdicts") {
  for (auto r : {WeightedNormSpec::R::One, WeightedNormSpec::R::Two, WeightedNormSpec::R::Inf}) {
    const std::vector<double> c3{1.0, 1.0, 1.0};
    const ScanSettings small{.radius = 10.0, .resolution = 16};
    CHECK(injectivity_report(OperatorKind::Radon, nested3(), nullptr, c3, r, small).verdict ==
          Verdict::InjectiveCertified);
    const auto a = injectivity_report(OperatorKind::Radon, half(), nullptr, kC, r, small);
    const auto b = injectivity_report(OperatorKind::Profit, half(), nullptr, kC, r, small);
    CHECK(a.verdict == b.verdict);
    auto ja = a.to_json(), jb = b.to_json();
    ja.erase("operator");
    jb.erase("operator");
    CHECK(ja == jb);
  }
  const auto h = two_exponential_kernel();
  const std::vector<double> c{0.5, 0.5};
  const auto k = injectivity_report(OperatorKind::Kernel, half(), &h, c, WeightedNormSpec::R::Inf);
  CHECK(k.has_kernel_scan);
  CHECK(k.verdict == Verdict::NotInjectiveNumerical);
  const auto e = KernelSpec::exponential();
  CHECK(injectivity_report(OperatorKind::Kernel, half(), &e, c, WeightedNormSpec::R::Inf).verdict ==
        Verdict::InjectiveCertified);
  CHECK(kind_of([&] { injectivity_report(OperatorKind::Kernel, half(), nullptr, c, WeightedNormSpec::R::Two); }) ==
        ErrorKind::Argument);
  CHECK(kind_of([&] { injectivity_report(OperatorKind::Radon, half(), &e, c, WeightedNormSpec::R::Two); }) ==
        ErrorKind::Argument);
  CHECK(operator_kind_from_string(to_string(OperatorKind::Profit)) == OperatorKind::Profit);
}

TEST_CASE("combine_verdict") {
  ZeroScanReport cert;
  cert.analytic = true;
  ZeroScanReport region;
  region.classification = ZeroClass::ZeroRegion;
  ZeroScanReport broken;
  broken.finite = false;
  for (auto r : {WeightedNormSpec::R::One, WeightedNormSpec::R::Two, WeightedNormSpec::R::Inf}) {
    CHECK(combine_verdict(cert, nullptr, r) == Verdict::InjectiveCertified);
    CHECK(combine_verdict(cert, &region, r) == Verdict::NotInjectiveNumerical);
    CHECK(combine_verdict(broken, nullptr, r) == Verdict::Inconclusive);
    CHECK(combine_verdict(ZeroScanReport{}, nullptr, r) == Verdict::InjectiveNumerical);
  }
}

TEST_CASE("heatmap csv") {
  std::ostringstream os;
  write_heatmap_csv(os, half(), kC, 5.0, 4);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "xi1,xi2,modulus,log_modulus");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 25);
}
