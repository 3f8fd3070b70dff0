#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mellin_radon/cost_model.hpp"
#include "mellin_radon/gamma.hpp"
#include "mellin_radon/kernel.hpp"
#include "mellin_radon/transforms.hpp"

namespace mellin_radon {

struct ZeroCandidate {
  std::vector<double> xi;
  double modulus = 0.0;
};

enum class ZeroClass { NoZeroDetected, IsolatedZeros, ZeroRegion };
const char* to_string(ZeroClass z);

struct ZeroScanReport {
  /// Plane (n entries) or the kernel line alpha (one entry).
  std::vector<double> c;
  double radius = 0.0;
  std::size_t resolution = 0;
  double min_modulus = 0.0;
  double min_log_modulus = 0.0;
  std::vector<double> argmin;
  double median_modulus = 0.0;
  /// Candidates are interior local minima below this value.
  double threshold = 0.0;
  std::vector<ZeroCandidate> candidates;
  ZeroClass classification = ZeroClass::NoZeroDetected;
  /// Set when a closed form certifies that the function has no zeros.
  bool analytic = false;
  bool finite = true;

  nlohmann::json to_json() const;
};

/// Values are passed as logarithms so that decay over the box does not underflow.
using LogSymbol = std::function<cplx(std::span<const cplx> z)>;

/// Scan of log (M e^-q)(c + i xi) on the lattice [-radius, radius]^n with
/// `resolution` cells (resolution + 1 points) per axis. CES trees are certified zero-free.
ZeroScanReport zero_scan(const CostExpr& q, std::span<const double> c, double radius, std::size_t resolution);

/// Same scan for an arbitrary symbol given by its logarithm (never certified).
ZeroScanReport zero_scan_symbol(const LogSymbol& log_k, std::span<const double> c, double radius,
                                std::size_t resolution);

/// 1-D scan of (Mh)(alpha + i tau), |tau| <= radius.
ZeroScanReport kernel_zero_scan(const KernelSpec& h, double alpha, double radius, std::size_t resolution);

enum class OperatorKind { Radon, Kernel, Profit };
const char* to_string(OperatorKind k);
OperatorKind operator_kind_from_string(const std::string& name);

enum class Verdict { InjectiveCertified, InjectiveNumerical, NotInjectiveNumerical, Inconclusive };
const char* to_string(Verdict v);

struct InjectivityReport {
  WeightedNormSpec::R r = WeightedNormSpec::R::Two;
  OperatorKind op = OperatorKind::Radon;
  Verdict verdict = Verdict::Inconclusive;
  ZeroScanReport cost_scan;
  bool has_kernel_scan = false;
  ZeroScanReport kernel_scan;

  nlohmann::json to_json() const;
};

struct ScanSettings {
  double radius = 20.0;
  std::size_t resolution = 128;
  double kernel_radius = 8.0;
  std::size_t kernel_resolution = 256;
};

/// Verdict for R_q, R^h_q or Pi_q on L^r_{I-c}. h is required iff op is Kernel.
InjectivityReport injectivity_report(OperatorKind op, const CostExpr& q, const KernelSpec* h,
                                     std::span<const double> c, WeightedNormSpec::R r,
                                     const ScanSettings& scan = {});

/// Verdict from precomputed scans (kernel scan may be null).
Verdict combine_verdict(const ZeroScanReport& cost, const ZeroScanReport* kernel, WeightedNormSpec::R r);

/// CSV rows xi_1, ..., xi_n, |K|, log|K| over the scan lattice.
void write_heatmap_csv(std::ostream& os, const CostExpr& q, std::span<const double> c, double radius,
                       std::size_t resolution);

}  // namespace mellin_radon
