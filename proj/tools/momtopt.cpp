#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "config.hpp"
#include "momtopt/curves.hpp"
#include "momtopt/io.hpp"
#include "momtopt/operator_cache.hpp"
#include "momtopt/qfactor.hpp"
#include "momtopt/topopt.hpp"

using namespace momtopt;
using momtopt::cli::ConfigError;
using momtopt::cli::RunConfig;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_numerical = 1;
constexpr int exit_usage = 2;

/// Raised for bad command-line values that CLI11 cannot check on its own.
class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void apply_threads(const RunConfig& c) {
  const int n = cli::resolve_threads(c);
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

RunConfig prepare(const std::string& path, bool needs_output) {
  RunConfig c = cli::load_config(path);
  cli::validate_paths(c, needs_output);
  apply_threads(c);
  return c;
}

std::string out_path(const RunConfig& c, const std::string& suffix) {
  return (std::filesystem::path(c.output.dir) / (c.output.prefix + suffix)).string();
}

void print_mesh_summary(const TriMesh& mesh, const BasisSet& basis) {
  std::cout << "T=" << mesh.triangle_count() << " N=" << basis.N() << " b=" << mesh.boundary_edge_count()
            << " a=" << fmt12(mesh.a) << '\n';
}

Eigen::VectorXd design_for(const TriMesh& mesh, const std::string& path) {
  Eigen::VectorXd rho_bar = load_design(path);
  if (static_cast<std::size_t>(rho_bar.size()) != mesh.triangle_count())
    throw UsageError("design '" + path + "' has " + std::to_string(rho_bar.size()) + " entries but the mesh has " +
                     std::to_string(mesh.triangle_count()) + " triangles");
  return rho_bar;
}

std::string q_line(const char* label, const QFactors& q) {
  return std::string(label) + " Qe=" + fmt12(q.Qe) + " Qm=" + fmt12(q.Qm) + " Q=" + fmt12(q.Q) +
         " selfres=" + (self_resonant(q) ? "1" : "0");
}

int cmd_mesh(const std::string& kind, double L, double aspect, int nx, int ny, int subdiv, double R,
             const std::string& out) {
  TriMesh mesh = [&] {
    if (kind == "plate") {
      if (!(L > 0.0) || !(aspect > 0.0) || nx < 1 || ny < 1) throw UsageError("plate needs L, aspect > 0 and nx, ny >= 1");
      return generate_plate(L, aspect, nx, ny);
    }
    if (subdiv < 0 || subdiv > 6 || !(R > 0.0)) throw UsageError("sphere needs 0 <= subdiv <= 6 and R > 0");
    return generate_sphere(subdiv, R);
  }();
  const BasisSet basis = build_rwg(mesh);
  if (!out.empty()) with_output_file(out, [&](std::ostream& os) { write_mesh(os, mesh); });
  print_mesh_summary(mesh, basis);
  return exit_ok;
}

int cmd_optimize(const std::string& config_path, bool use_cache) {
  const RunConfig c = prepare(config_path, true);
  OptConfig opt = c.opt;
  cli::Problem p = cli::build_problem(c);
  if (opt.seed.mode == SeedMode::FromFile) opt.seed.values = design_for(p.mesh, c.seed_path);
  print_mesh_summary(p.mesh, p.basis);
  with_output_file(out_path(c, ".mesh"), [&](std::ostream& os) { write_mesh(os, p.mesh); });

  const double k = opt.ka / p.mesh.a;
  const OperatorOptions op_opts{};
  const std::string cache = out_path(c, ".opcache");
  std::optional<OperatorSet> cached;
  if (use_cache) cached = load_operator_cache(cache, p.mesh, p.basis, k, p.feeds, op_opts);
  const OperatorSet ops = cached ? std::move(*cached) : build_operators(p.mesh, p.basis, k, p.feeds, op_opts);
  if (use_cache && !cached) save_operator_cache(cache, p.mesh, ops, op_opts);

  std::ofstream log(out_path(c, "_log.csv"), std::ios::binary);
  if (!log) throw ConfigError("/output/dir", "cannot write the convergence log");
  log << log_header() << std::flush;
  OptCallbacks cb;
  cb.on_iteration = [&](const IterationRecord& r) { log << log_row(r) << std::flush; };
  cb.on_snapshot = [&](int i, const DesignField& d) {
    char name[32];
    std::snprintf(name, sizeof name, "_snap_%04d.design", i);
    with_output_file(out_path(c, name), [&](std::ostream& os) { write_design(os, d.rho_bar); });
  };

  const OptimizationResult res = optimize(opt, p.mesh, p.basis, ops, p.feeds, cb, op_opts);
  with_output_file(out_path(c, "_final.design"), [&](std::ostream& os) { write_design(os, res.design.rho_bar); });
  with_output_file(out_path(c, "_thresholded.design"),
                   [&](std::ostream& os) { write_design(os, design_from_mask(res.thresholded)); });

  const IterationRecord& last = res.records.back();
  QFactors qf;
  qf.Qe = last.Qe;
  qf.Qm = last.Qm;
  qf.Q = last.Q;
  std::ostringstream s;
  s << "termination=" << termination_name(res.reason) << '\n'
    << "iterations=" << last.iter << '\n'
    << "beta=" << fmt12(last.beta) << '\n'
    << "Qref=" << fmt12(res.Qref) << '\n'
    << "Qe=" << fmt12(last.Qe) << '\n'
    << "Qm=" << fmt12(last.Qm) << '\n'
    << "Q=" << fmt12(last.Q) << '\n'
    << "selfres=" << (self_resonant(qf) ? 1 : 0) << '\n'
    << "area_frac=" << fmt12(last.area_frac) << '\n';
  if (res.thr_ok) {
    s << "thr_Qe=" << fmt12(res.thr_q.Qe) << '\n'
      << "thr_Qm=" << fmt12(res.thr_q.Qm) << '\n'
      << "thr_Q=" << fmt12(res.thr_q.Q) << '\n'
      << "thr_selfres=" << (self_resonant(res.thr_q) ? 1 : 0) << '\n';
  } else {
    s << "thr_Q=nan\n"
      << "thr_error=" << res.thr_error << '\n';
  }
  with_output_file(out_path(c, "_summary.txt"), [&](std::ostream& os) { os << s.str(); });
  std::cout << s.str();
  return exit_ok;
}

std::vector<double> ka_values(const std::vector<double>& list, const std::vector<double>& range) {
  if (!list.empty() && !range.empty()) throw UsageError("give either --ka or --ka-range, not both");
  if (!list.empty()) return list;
  if (range.empty()) throw UsageError("a non-empty --ka list or --ka-range is required");
  if (range.size() != 3) throw UsageError("--ka-range takes START STOP COUNT");
  const double count = range[2];
  if (!(count >= 1.0) || count != std::floor(count)) throw UsageError("--ka-range COUNT must be a positive integer");
  const auto n = static_cast<int>(count);
  if (n == 1) return {range[0]};
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(range[0] + (range[1] - range[0]) * i / (n - 1));
  return out;
}

int cmd_sweep(const std::string& config_path, const std::string& design_path, const std::vector<double>& ka_list,
              const std::vector<double>& ka_range, const std::string& mode, const std::string& out) {
  const RunConfig c = prepare(config_path, false);
  const std::vector<double> kas = ka_values(ka_list, ka_range);
  for (std::size_t i = 0; i < kas.size(); ++i)
    if (!(kas[i] > 0.0) || (i > 0 && !(kas[i] > kas[i - 1]))) throw UsageError("ka values must be positive and increasing");
  const cli::Problem p = cli::build_problem(c);
  const Eigen::VectorXd rho_bar = design_for(p.mesh, design_path);
  const SweepMode m = mode == "gray" ? SweepMode::Gray : SweepMode::Thresholded;
  const auto rows = frequency_sweep(p.mesh, p.basis, rho_bar, m, kas, p.feeds, c.opt.interpolation);
  std::ostringstream s;
  write_sweep_csv(s, rows);
  if (out.empty()) std::cout << s.str();
  else with_output_file(out, [&](std::ostream& os) { os << s.str(); });
  for (const auto& r : rows)
    if (!r.ok) std::cerr << "ka=" << fmt12(r.ka) << ": " << r.error << '\n';
  return exit_ok;
}

int cmd_analyze(const std::string& config_path, const std::string& design_path, double ka) {
  const RunConfig c = prepare(config_path, false);
  if (ka == 0.0) ka = c.opt.ka;
  if (!(ka > 0.0)) throw UsageError("ka must be > 0");
  const cli::Problem p = cli::build_problem(c);
  const Eigen::VectorXd rho_bar = design_for(p.mesh, design_path);
  const double k = ka / p.mesh.a;
  const OperatorSet ops = build_operators(p.mesh, p.basis, k, p.feeds);
  const QFactors gray =
      analyze_gray(ops, std::span<const double>(rho_bar.data(), static_cast<std::size_t>(rho_bar.size())),
                   c.opt.interpolation, false)
          .q;
  std::cout << "ka=" << fmt12(ka) << '\n' << q_line("gray", gray) << '\n';
  try {
    const ThresholdResult thr = thresholded_analysis(p.mesh, p.basis, hard_threshold(rho_bar), p.feeds, k);
    std::cout << q_line("thresholded", thr.q) << '\n';
  } catch (const FeedIsolatedError& ex) {
    std::cout << "thresholded error=" << ex.what() << '\n';
  }
  return exit_ok;
}

int cmd_gradcheck(const std::string& config_path) {
  const RunConfig c = prepare(config_path, false);
  const cli::Problem p = cli::build_problem(c);
  const auto& g = c.gradcheck;
  if (p.mesh.triangle_count() > g.max_triangles)
    throw UsageError("gradcheck is limited to " + std::to_string(g.max_triangles) + " triangles; this mesh has " +
                     std::to_string(p.mesh.triangle_count()));
  OptConfig seed_cfg = c.opt;
  seed_cfg.seed.mode = SeedMode::Random;
  seed_cfg.seed.seed = g.seed;
  DesignField d = seed_design(seed_cfg, p.mesh, feed_triangles(p.mesh, p.feeds));
  for (Eigen::Index t = 0; t < d.size(); ++t)
    if (!d.is_fixed(t)) d.rho[t] = g.rho_lo + (g.rho_hi - g.rho_lo) * d.rho[t];
  const OperatorSet ops = build_operators(p.mesh, p.basis, c.opt.ka / p.mesh.a, p.feeds);
  const GradientCheck r =
      gradient_check(p.mesh, ops, d, c.opt.Rmin * p.mesh.a, {g.beta, c.opt.eta}, c.opt.interpolation, g.h);
  std::cout << "T=" << p.mesh.triangle_count() << " max_rel_error=" << fmt12(r.max_rel_error)
            << " worst_triangle=" << r.worst << '\n';
  if (r.max_rel_error <= g.tol) return exit_ok;
  std::cerr << "gradient check failed: error " << fmt12(r.max_rel_error) << " exceeds " << fmt12(g.tol)
            << " at triangle " << r.worst << '\n';
  return exit_numerical;
}

int cmd_curves(SphericalCurve curve, const std::string& out) {
  curve.validate();
  if (out.empty()) {
    write_polyline(std::cout, curve);
  } else {
    with_output_file(out, [&](std::ostream& os) { write_polyline(os, curve); });
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology optimization of antenna Q-factor with the method of moments"};
  app.require_subcommand(1);
  std::function<int()> run;

  auto* mesh_cmd = app.add_subcommand("mesh", "Generate a plate or sphere mesh");
  mesh_cmd->require_subcommand(1);
  double L = 1.0, aspect = 0.6, R = 1.0;
  int nx = 0, ny = 0, subdiv = 0;
  std::string mesh_out;
  auto* plate = mesh_cmd->add_subcommand("plate", "Rectangular plate, each cell split into 4 triangles");
  plate->add_option("--L", L, "Plate length along x")->capture_default_str();
  plate->add_option("--aspect", aspect, "Width over length")->capture_default_str();
  plate->add_option("--nx", nx, "Cells along x")->required();
  plate->add_option("--ny", ny, "Cells along y")->required();
  plate->add_option("--out", mesh_out, "Mesh file to write");
  plate->callback([&] { run = [&] { return cmd_mesh("plate", L, aspect, nx, ny, 0, 1.0, mesh_out); }; });
  auto* sphere = mesh_cmd->add_subcommand("sphere", "Subdivided icosahedron");
  sphere->add_option("--subdiv", subdiv, "Subdivision level")->required();
  sphere->add_option("--R", R, "Sphere radius")->capture_default_str();
  sphere->add_option("--out", mesh_out, "Mesh file to write");
  sphere->callback([&] { run = [&] { return cmd_mesh("sphere", 1.0, 1.0, 1, 1, subdiv, R, mesh_out); }; });

  std::string config, design, out, mode = "thresholded";
  bool no_cache = false;
  auto* opt_cmd = app.add_subcommand("optimize", "Run the density-based Q minimization");
  opt_cmd->add_option("config", config, "JSON configuration")->required();
  opt_cmd->add_flag("--no-cache", no_cache, "Do not read or write the operator cache");
  opt_cmd->callback([&] { run = [&] { return cmd_optimize(config, !no_cache); }; });

  std::vector<double> ka_list, ka_range;
  auto* sweep_cmd = app.add_subcommand("sweep", "Q-factor of a fixed design over a list of ka");
  sweep_cmd->add_option("config", config, "JSON configuration (mesh and feeds)")->required();
  sweep_cmd->add_option("--design", design, "Design file")->required();
  sweep_cmd->add_option("--ka", ka_list, "ka values")->delimiter(',');
  sweep_cmd->add_option("--ka-range", ka_range, "START STOP COUNT")->expected(3);
  sweep_cmd->add_option("--mode", mode, "gray or thresholded")
      ->check(CLI::IsMember({"gray", "thresholded"}))
      ->capture_default_str();
  sweep_cmd->add_option("--out", out, "CSV file to write (stdout if omitted)");
  sweep_cmd->callback([&] { run = [&] { return cmd_sweep(config, design, ka_list, ka_range, mode, out); }; });

  double ka = 0.0;
  auto* analyze_cmd = app.add_subcommand("analyze", "Gray and thresholded Q-factors of a design");
  analyze_cmd->add_option("config", config, "JSON configuration")->required();
  analyze_cmd->add_option("--design", design, "Design file")->required();
  analyze_cmd->add_option("--ka", ka, "Electrical size (defaults to the configured ka)");
  analyze_cmd->callback([&] { run = [&] { return cmd_analyze(config, design, ka); }; });

  auto* grad_cmd = app.add_subcommand("gradcheck", "Adjoint sensitivities against central differences");
  grad_cmd->add_option("config", config, "JSON configuration")->required();
  grad_cmd->callback([&] { run = [&] { return cmd_gradcheck(config); }; });

  SphericalCurve curve;
  std::string curve_out;
  auto* curves_cmd = app.add_subcommand("curves", "Sample spherical helix or loxodrome curves");
  curves_cmd->require_subcommand(1);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--R", curve.R, "Sphere radius")->capture_default_str();
    sub->add_option("--samples", curve.samples, "Samples per arm")->capture_default_str();
    sub->add_option("--arms", curve.arms, "1, or 2 for a second arm rotated by pi about z")->capture_default_str();
    sub->add_option("--out", curve_out, "Polyline file (stdout if omitted)");
  };
  auto* helix = curves_cmd->add_subcommand("helix", "Spherical helix");
  helix->add_option("--M", curve.param, "Number of turns")->required();
  add_common(helix);
  helix->callback([&] {
    curve.kind = CurveKind::Helix;
    run = [&] { return cmd_curves(curve, curve_out); };
  });
  auto* lox = curves_cmd->add_subcommand("loxodrome", "Loxodrome (rhumb line)");
  lox->add_option("--gamma", curve.param, "Slope parameter")->required();
  lox->add_option("--tmax", curve.t_max, "Parameter range [-tmax, tmax]")->capture_default_str();
  add_common(lox);
  lox->callback([&] {
    curve.kind = CurveKind::Loxodrome;
    run = [&] { return cmd_curves(curve, curve_out); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return exit_usage;
  }

  try {
    return run();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_usage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const StructuralError& e) {
    std::cerr << "mesh error: " << e.what() << '\n';
    return exit_usage;
  } catch (const FormatError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  }
}
