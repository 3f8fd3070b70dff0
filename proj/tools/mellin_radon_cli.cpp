// mellin-radon: forward transforms, inversion, injectivity diagnostics and
// the numerical self test, driven by scene files.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mellin_radon/cost_model.hpp"
#include "mellin_radon/diagnostics.hpp"
#include "mellin_radon/errors.hpp"
#include "mellin_radon/inversion.hpp"
#include "mellin_radon/scene.hpp"
#include "mellin_radon/selftest.hpp"
#include "mellin_radon/transforms.hpp"

using namespace mellin_radon;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kNumerical = 3;
constexpr int kIo = 4;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io:
      return kIo;
    case ErrorKind::Domain:
    case ErrorKind::Shape:
    case ErrorKind::Parse:
    case ErrorKind::Structural:
    case ErrorKind::Argument:
    case ErrorKind::DegenerateProduction:
      return kValidation;
    default:
      return kNumerical;
  }
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json grid_json(const LogGrid& g) {
  return {{"y0", g.y0}, {"dy", g.dy}, {"N", g.N}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot write " + path);
  os << j.dump(2) << "\n";
}

// `out` or stdout
void emit(const std::string& out, const json& j) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(out, j);
  }
}

const KernelSpec& need_kernel(const SceneConfig& s) {
  if (!s.kernel) fail(ErrorKind::Argument, "mode 'kernel' needs a [kernel] section in the config");
  return *s.kernel;
}

int cmd_validate(const std::string& config) {
  const auto scene = SceneConfig::load(config);
  const auto rep = validate_cost(scene.q(), 256);
  const bool ok = rep.ok();
  json j{{"ok", ok},
         {"config", config},
         {"dimension", scene.dim()},
         {"cost", scene.q().to_string()},
         {"cost_hash", hex64(scene.q().hash())},
         {"homogeneity_max_residual", rep.homogeneity_max_residual},
         {"positivity_ok", rep.positivity_ok},
         {"level_set_bounded", rep.level_set_bounded},
         {"analytic_bounded", rep.analytic_bounded},
         {"ray_growth", rep.ray_growth},
         {"grid", grid_json(scene.grid)},
         {"pgrid", grid_json(scene.p_grid())}};
  std::cout << j.dump(2) << "\n";
  return ok ? kOk : kValidation;
}

int cmd_forward(const std::string& config, const std::string& mode, const std::string& out) {
  const auto scene = SceneConfig::load(config);
  const auto f = scene.sample_f();
  const auto pg = scene.p_grid();
  const auto t0 = std::chrono::steady_clock::now();
  GridFunction g;
  json extra;
  if (mode == "radon") {
    g = radon_forward_grid(f, scene.q(), pg, scene.radon, scene.coverage);
    extra["scheme"] = to_string(scene.radon.scheme);
  } else if (mode == "profit") {
    g = profit_forward_grid(f, scene.q(), scene.p0, pg, scene.radon);
    extra["p0"] = scene.p0;
  } else {
    const auto& h = need_kernel(scene);
    g = rhq_forward_grid(f, scene.q(), h, pg, scene.radon);
    extra["kernel"] = h.describe();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g.save(out);
  json meta{{"mode", mode},
            {"q", scene.q().to_string()},
            {"q_hash", hex64(scene.q().hash())},
            {"pgrid", grid_json(pg)},
            {"max_abs", g.max_abs()},
            {"timings", {{"forward_seconds", secs}, {"timestamp", utc_now()}}}};
  meta.update(extra);
  write_json(out + ".json", meta);
  return kOk;
}

int cmd_invert(const std::string& config, const std::string& data, const std::string& mode, const std::string& out) {
  const auto scene = SceneConfig::load(config);
  const auto g = GridFunction::load(data);
  if (!g.grid().same_lattice(scene.p_grid())) fail(ErrorKind::Shape, "data grid does not match the config p-grid");
  std::optional<GridFunction> truth;
  if (scene.synthetic()) truth = scene.sample_f();
  const GridFunction* tp = truth ? &*truth : nullptr;
  InversionResult res;
  if (mode == "radon") {
    res = invert_radon(g, scene.q(), scene.inversion, tp);
  } else if (mode == "profit") {
    res = invert_profit(g, scene.p0, scene.q(), scene.inversion, tp);
  } else {
    res = invert_kernel(g, scene.q(), need_kernel(scene), scene.inversion, tp);
  }
  res.estimate.save(out);
  auto j = res.report.to_json();
  j["q_hash"] = hex64(scene.q().hash());
  write_json(out + ".json", j);
  return kOk;
}

int cmd_diagnose(const std::string& config, const std::string& mode, const std::string& out,
                 const std::string& heatmap) {
  const auto scene = SceneConfig::load(config);
  const auto op = operator_kind_from_string(mode);
  const KernelSpec* h = op == OperatorKind::Kernel ? &need_kernel(scene) : nullptr;
  const auto c = scene.plane();
  const auto rep = injectivity_report(op, scene.q(), h, c, scene.r, scene.scan);
  emit(out, rep.to_json());
  if (!heatmap.empty()) {
    std::ofstream os(heatmap);
    if (!os) fail(ErrorKind::Io, "cannot write " + heatmap);
    write_heatmap_csv(os, scene.q(), c, scene.scan.radius, scene.scan.resolution);
  }
  return kOk;
}

int cmd_selftest(const std::string& level) {
  const auto lv = level == "full" ? SelftestLevel::Full : SelftestLevel::Quick;
  const auto checks = run_selftest(lv, &std::cerr);
  print_checks(checks, std::cout);
  int failed = 0;
  for (const auto& c : checks) {
    if (!c.pass) {
      ++failed;
      std::cerr << "failed: [" << c.criterion << "] " << c.identity << "\n";
    }
  }
  std::cout << (failed ? "FAIL" : "PASS") << "  selftest " << level << ": " << checks.size() - failed << "/"
            << checks.size() << " checks within tolerance\n";
  return failed ? kNumerical : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized Radon transforms of capacity densities under CES costs"};
  app.require_subcommand(1);
  std::string config, mode = "radon", out, data, level = "quick", heatmap;
  const std::vector<std::string> modes{"radon", "kernel", "profit"};

  auto* validate = app.add_subcommand("validate", "parse a scene and check the cost function");
  validate->add_option("--config", config, "scene file")->required();

  auto* forward = app.add_subcommand("forward", "transform samples over the p-grid (CSV + JSON metadata)");
  forward->add_option("--config", config, "scene file")->required();
  forward->add_option("--mode", mode, "radon | kernel | profit")->check(CLI::IsMember(modes));
  forward->add_option("--out", out, "output CSV; metadata goes to <out>.json")->required();

  auto* invert = app.add_subcommand("invert", "recover f from transform samples (CSV + JSON report)");
  invert->add_option("--config", config, "scene file")->required();
  invert->add_option("--data", data, "GridFunction CSV of transform samples")->required();
  invert->add_option("--mode", mode, "radon | kernel | profit")->check(CLI::IsMember(modes));
  invert->add_option("--out", out, "output CSV; report goes to <out>.json")->required();

  auto* diagnose = app.add_subcommand("diagnose", "injectivity report (JSON)");
  diagnose->add_option("--config", config, "scene file")->required();
  diagnose->add_option("--mode", mode, "radon | kernel | profit")->check(CLI::IsMember(modes));
  diagnose->add_option("--out", out, "report path (default stdout)");
  diagnose->add_option("--heatmap", heatmap, "CSV of |M e^-q| over the scan lattice");

  auto* selftest = app.add_subcommand("selftest", "run the identity suites");
  selftest->add_option("--level", level, "quick | full")->check(CLI::IsMember({"quick", "full"}));

  auto* tolerances = app.add_subcommand("tolerances", "print the tolerance table (JSON)");
  auto* demo = app.add_subcommand("demo-config", "print the demo scene");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*validate) return cmd_validate(config);
    if (*forward) return cmd_forward(config, mode, out);
    if (*invert) return cmd_invert(config, data, mode, out);
    if (*diagnose) return cmd_diagnose(config, mode, out, heatmap);
    if (*selftest) return cmd_selftest(level);
    if (*tolerances) {
      std::cout << tolerance_table().dump(2) << "\n";
      return kOk;
    }
    if (*demo) {
      std::cout << demo_scene_text();
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
