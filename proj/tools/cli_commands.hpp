#pragma once

// Command-line driver. Everything lives in this header so the test suite can
// call run_cli() in-process; gausson_cli.cpp only forwards main().

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gausson/gausson.hpp"

namespace gausson::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fixed(double v, int digits = 9) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Preset {
  double omega1;
  double omega2;
  double b;
};

inline const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> table{
      {"fig1", {std::sqrt(2.0 / 3.0), std::sqrt(4.0 / 3.0), 0.0}},
      {"fig2", {std::sqrt(2.0 / 3.0), std::sqrt(4.0 / 3.0), 1.0}},
      {"fig3", {std::sqrt(2.0 / 3.0), std::sqrt(4.0 / 3.0), -1.0}},
  };
  return table;
}

/// key = value lines for resolved_config.txt, in the order they were added.
using ConfigLines = std::vector<std::pair<std::string, std::string>>;

struct Common {
  double omega1 = 0.0;
  double omega2 = 0.0;
  double omega3 = 0.0;
  double b = 0.0;
  double omega = 0.0;
  std::string preset;
  std::string out = ".";

  CLI::Option* o_omega1 = nullptr;
  CLI::Option* o_omega2 = nullptr;
  CLI::Option* o_omega3 = nullptr;
  CLI::Option* o_b = nullptr;

  void attach(CLI::App& app) {
    o_omega1 = app.add_option("--omega1", omega1, "Trap frequency along x");
    o_omega2 = app.add_option("--omega2", omega2, "Trap frequency along y (> omega1)");
    o_omega3 = app.add_option("--omega3", omega3, "Trap frequency along z (3D runs only)");
    o_b = app.add_option("--b", b, "Nonlinearity strength");
    app.add_option("--omega", omega, "Rotation rate (signed)");
    app.add_option("--preset", preset, "Trap preset")
        ->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
    app.add_option("--out", out, "Output directory");
  }

  /// Applies the preset to every trap parameter not given explicitly.
  TrapConfig trap() {
    if (!preset.empty()) {
      const Preset& p = presets().at(preset);
      if (o_omega1->count() == 0) omega1 = p.omega1;
      if (o_omega2->count() == 0) omega2 = p.omega2;
      if (o_b->count() == 0) b = p.b;
    } else {
      if (o_omega1->count() == 0) throw ConfigError("omega1 is required (or use --preset)");
      if (o_omega2->count() == 0) throw ConfigError("omega2 is required (or use --preset)");
    }
    std::optional<double> w3;
    if (o_omega3->count() > 0) w3 = omega3;
    return TrapConfig(omega1, omega2, omega, b, w3);
  }

  ConfigLines lines(const TrapConfig& c) const {
    ConfigLines l{{"omega1", num(c.omega1())}, {"omega2", num(c.omega2())}};
    if (c.omega3()) l.emplace_back("omega3", num(*c.omega3()));
    l.emplace_back("b", num(c.b()));
    l.emplace_back("omega", num(c.signed_rotation()));
    l.emplace_back("out", out);
    return l;
  }

  std::filesystem::path out_dir() const {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec || !std::filesystem::is_directory(out))
      throw ConfigError("out: cannot create directory '" + out + "'");
    return out;
  }
};

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("out: cannot write '" + p.string() + "'");
  return f;
}

/// Writes the resolved configuration in the same format --config reads.
inline void write_resolved(const std::filesystem::path& dir, const std::string& command,
                           const ConfigLines& top, const ConfigLines& sub) {
  auto f = open_output(dir / "resolved_config.txt");
  for (const auto& [k, v] : top) f << k << " = " << v << '\n';
  f << "\n[" << command << "]\n";
  for (const auto& [k, v] : sub) f << k << " = " << v << '\n';
}

/// Index into find_all_roots() order, or the most compact root (largest det A) when root < 0.
inline StationaryPoint pick_root(const TrapConfig& trap, int root) {
  if (trap.dim() != 2) throw ConfigError("from-stationary requires a 2D trap (no omega3)");
  const auto roots = find_all_roots(trap, ContinuationSettings{});
  if (roots.empty())
    throw ConfigError("from-stationary: no stationary Gausson exists at omega=" +
                      num(trap.signed_rotation()));
  if (root >= static_cast<int>(roots.size()))
    throw ConfigError("root: index " + std::to_string(root) + " out of range (" +
                      std::to_string(roots.size()) + " roots)");
  if (root >= 0) return roots[root];
  std::size_t best = 0;
  for (std::size_t i = 1; i < roots.size(); ++i)
    if (roots[i].alpha1 * roots[i].alpha2 > roots[best].alpha1 * roots[best].alpha2) best = i;
  return roots[best];
}

// ---------------------------------------------------------------------------

struct StationaryScanCmd {
  ContinuationSettings cs;
  double stab_tol = kDefaultStabTol;

  void attach(CLI::App& sub) {
    sub.add_option("--omega-min", cs.omega_min, "Lower end of the Omega grid");
    sub.add_option("--omega-max", cs.omega_max, "Upper end of the Omega grid");
    sub.add_option("--n-omega", cs.n_omega, "Number of Omega grid points");
    sub.add_option("--n-grid", cs.n_grid, "Lattice cells per axis in the root search");
    sub.add_option("--arc-step", cs.arc_step, "Maximum continuation step");
    sub.add_option("--newton-tol", cs.newton_tol, "Newton residual tolerance");
    sub.add_option("--alpha-max", cs.alpha_max, "Search box edge (0 = automatic)");
    sub.add_option("--stab-tol", stab_tol, "Real-part threshold for classification");
  }

  int run(Common& common, std::ostream& out) {
    const TrapConfig trap = common.trap();
    if (trap.dim() != 2) throw ConfigError("omega3: stationary-scan is 2D only");
    cs.validate();
    const auto dir = common.out_dir();
    write_resolved(dir, "stationary-scan", common.lines(trap),
                   {{"omega-min", num(cs.omega_min)},
                    {"omega-max", num(cs.omega_max)},
                    {"n-omega", std::to_string(cs.n_omega)},
                    {"n-grid", std::to_string(cs.n_grid)},
                    {"arc-step", num(cs.arc_step)},
                    {"newton-tol", num(cs.newton_tol)},
                    {"alpha-max", num(cs.alpha_max)},
                    {"stab-tol", num(stab_tol)}});

    BranchScan scan = trace_branches(trap, cs);
    for (auto& p : scan.points) classify(p, scan.config, stab_tol);
    {
      auto f = open_output(dir / "branch_scan.csv");
      write_scan_csv(f, scan);
    }

    std::ostringstream summary;
    summary << "branches " << scan.n_branches << '\n';
    for (const auto& iv : multiplicity_intervals(scan))
      summary << "interval [" << fixed(iv.lo) << ", " << fixed(iv.hi) << "] multiplicity "
              << iv.multiplicity << '\n';
    for (const auto& t : scan.transitions)
      summary << "transition " << to_string(t.kind) << " Omega " << fixed(t.omega) << " bracket ["
              << fixed(t.bracket_lo) << ", " << fixed(t.bracket_hi) << "] "
              << t.multiplicity_below << " -> " << t.multiplicity_above << '\n';
    auto f = open_output(dir / "scan_summary.txt");
    f << summary.str();
    out << summary.str();
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------

struct InitialState {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 1.0;
  double beta = 0.0;
  std::vector<double> xi0;
  std::vector<double> pi0;
  bool from_stationary = false;
  int root = -1;

  void attach(CLI::App& sub) {
    sub.add_option("--alpha1", alpha1, "Initial A11");
    sub.add_option("--alpha2", alpha2, "Initial A22");
    sub.add_option("--alpha3", alpha3, "Initial A33 (3D)");
    sub.add_option("--beta", beta, "Initial B12");
    sub.add_option("--xi0", xi0, "Initial center of mass")->expected(2, 3);
    sub.add_option("--pi0", pi0, "Initial mean momentum")->expected(2, 3);
    sub.add_flag("--from-stationary", from_stationary, "Start from a stationary Gausson");
    sub.add_option("--root", root, "Root index for --from-stationary (default: most compact)");
  }

  template <int D>
  GaussonState<D> build(const TrapConfig& trap, std::optional<StationaryPoint>& chosen) const {
    GaussonState<D> s;
    if constexpr (D == 2) {
      if (from_stationary) {
        chosen = pick_root(trap, root);
        s = chosen->state();
      } else {
        s = stationary_state(alpha1, alpha2, beta);
      }
    } else {
      if (from_stationary) throw ConfigError("from-stationary requires a 2D trap (no omega3)");
      s.A = SymMatrix<3>::diagonal(Vec<3>(alpha1, alpha2, alpha3));
      s.B = SymMatrix<3>::off_diagonal(beta);
      s.xi.setZero();
      s.pi.setZero();
      s.N = 1.0;
      s.N = 1.0 / std::sqrt(gausson_norm(s));
    }
    set_vector<D>(s.xi, xi0, "xi0");
    set_vector<D>(s.pi, pi0, "pi0");
    validate(s);
    return s;
  }

  ConfigLines lines() const {
    ConfigLines l;
    if (from_stationary) {
      l.emplace_back("from-stationary", "true");
      l.emplace_back("root", std::to_string(root));
    } else {
      l.emplace_back("alpha1", num(alpha1));
      l.emplace_back("alpha2", num(alpha2));
      l.emplace_back("alpha3", num(alpha3));
      l.emplace_back("beta", num(beta));
    }
    auto vec = [](const std::vector<double>& v) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
      return s + "]";
    };
    if (!xi0.empty()) l.emplace_back("xi0", vec(xi0));
    if (!pi0.empty()) l.emplace_back("pi0", vec(pi0));
    return l;
  }

 private:
  template <int D>
  static void set_vector(Vec<D>& dst, const std::vector<double>& src, const char* name) {
    if (src.empty()) return;
    if (static_cast<int>(src.size()) != D)
      throw ConfigError(std::string(name) + ": expected " + std::to_string(D) + " components");
    for (int i = 0; i < D; ++i) dst(i) = src[i];
  }
};

/// Slope of -1/2 log(min eig A) against t over the second half of the samples:
/// the exponential growth rate of the packet width.
template <int D>
double width_growth_exponent(const Trajectory<D>& traj) {
  const std::size_t n = traj.samples.size();
  if (n < 4) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t i = n / 2; i < n; ++i) {
    const double x = traj.samples[i].t;
    const double y = -0.5 * std::log(traj.diagnostics[i].min_eig_A);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    m += 1;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct EvolveOdeCmd {
  InitialState init;
  OdeSettings os;
  std::string method = "rk45";

  void attach(CLI::App& sub) {
    init.attach(sub);
    sub.add_option("--method", method, "Integrator")->check(CLI::IsMember({"rk4", "rk45"}));
    sub.add_option("--dt", os.dt, "Step (rk4) or initial step (rk45)");
    sub.add_option("--t-end", os.t_end, "Integration time");
    sub.add_option("--rel-tol", os.rel_tol, "Relative tolerance (rk45)");
    sub.add_option("--abs-tol", os.abs_tol, "Absolute tolerance (rk45)");
    sub.add_option("--sample-every", os.sample_every, "Write a row every this many dt");
  }

  int run(Common& common, std::ostream& out) {
    const TrapConfig trap = common.trap();
    os.method = method == "rk4" ? OdeMethod::RK4Fixed : OdeMethod::RK45Adaptive;
    os.validate();
    const auto dir = common.out_dir();
    ConfigLines sub = init.lines();
    sub.insert(sub.end(), {{"method", method},
                           {"dt", num(os.dt)},
                           {"t-end", num(os.t_end)},
                           {"rel-tol", num(os.rel_tol)},
                           {"abs-tol", num(os.abs_tol)},
                           {"sample-every", std::to_string(os.sample_every)}});
    write_resolved(dir, "evolve-ode", common.lines(trap), sub);
    return trap.dim() == 2 ? go<2>(trap, dir, out) : go<3>(trap, dir, out);
  }

 private:
  template <int D>
  int go(const TrapConfig& trap, const std::filesystem::path& dir, std::ostream& out) {
    std::optional<StationaryPoint> chosen;
    const GaussonState<D> initial = init.build<D>(trap, chosen);
    if (chosen)
      out << "initial stationary root alpha1=" << fixed(chosen->alpha1, 12)
          << " alpha2=" << fixed(chosen->alpha2, 12) << " beta=" << fixed(chosen->beta, 12)
          << '\n';
    Trajectory<D> traj;
    std::optional<PositiveDefinitenessLost> failure;
    try {
      integrate(initial, trap, os, traj);
    } catch (const PositiveDefinitenessLost& e) {
      failure = e;
    }
    {
      auto f = open_output(dir / "trajectory.csv");
      write_trajectory_csv(f, traj);
    }
    const double growth = width_growth_exponent(traj);
    out << "width growth exponent " << fixed(growth, 6) << '\n';
    if (trap.dim() == 2)
      out << "com max Re(lambda) " << fixed(com_spectrum(trap).max_real_part, 6) << '\n';
    if (failure) throw *failure;
    const auto& d0 = traj.diagnostics.front();
    const auto& d1 = traj.diagnostics.back();
    out << "norm drift " << csv::format(std::abs(d1.norm - d0.norm)) << '\n';
    out << "energy drift " << csv::format(std::abs(d1.energy - d0.energy)) << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------

struct EvolvePdeCmd {
  InitialState init;
  PdeSettings ps;
  int n = 256;
  double half_width = 12.0;
  std::string frame = "lab";
  int snapshot_every = 10;
  bool dt_study = false;
  double study_t_end = 1.0;

  void attach(CLI::App& sub) {
    init.attach(sub);
    sub.add_option("--n", n, "Grid points per axis (power of two)");
    sub.add_option("--L", half_width, "Box half-width");
    sub.add_option("--dt", ps.dt, "Time step");
    sub.add_option("--t-end", ps.t_end, "Integration time");
    sub.add_option("--frame", frame, "Frame of the solver")
        ->check(CLI::IsMember({"lab", "rotating"}));
    sub.add_option("--sample-every", ps.sample_every, "Diagnostics every this many steps");
    sub.add_option("--snapshot-every", snapshot_every,
                   "Write a snapshot every this many diagnostic samples (0 = none)");
    sub.add_option("--log-eps", ps.log_epsilon, "Regularization inside log|psi|^2");
    sub.add_flag("--dt-study", dt_study, "Run the time-step convergence study instead");
    sub.add_option("--study-t-end", study_t_end, "Integration time of the convergence study");
  }

  int run(Common& common, std::ostream& out) {
    const TrapConfig trap = common.trap();
    if (trap.dim() != 2) throw ConfigError("omega3: evolve-pde is 2D only");
    ps.frame = frame == "lab" ? Frame::Lab : Frame::Rotating;
    ps.validate();
    if (snapshot_every < 0) throw ConfigError("snapshot-every must be >= 0");
    if (!(study_t_end > 0.0)) throw ConfigError("study-t-end must be positive");
    const Grid2D grid(n, half_width);
    const auto dir = common.out_dir();
    ConfigLines sub = init.lines();
    sub.insert(sub.end(), {{"n", std::to_string(n)},
                           {"L", num(half_width)},
                           {"dt", num(ps.dt)},
                           {"t-end", num(ps.t_end)},
                           {"frame", frame},
                           {"sample-every", std::to_string(ps.sample_every)},
                           {"snapshot-every", std::to_string(snapshot_every)},
                           {"log-eps", num(ps.log_epsilon)}});
    if (dt_study) {
      sub.emplace_back("dt-study", "true");
      sub.emplace_back("study-t-end", num(study_t_end));
    }
    write_resolved(dir, "evolve-pde", common.lines(trap), sub);

    std::optional<StationaryPoint> chosen;
    const GaussonState2 initial = init.build<2>(trap, chosen);
    const PdeModel model = PdeModel::from(trap);
    const Field2D field0 = sample_gausson(initial, grid);
    return dt_study ? study(field0, model, out) : evolve_run(initial, field0, trap, dir, out);
  }

 private:
  int study(const Field2D& field0, const PdeModel& model, std::ostream& out) {
    PdeSettings s = ps;
    s.t_end = study_t_end;
    const auto r = strang_order_study(field0, model, s, {2e-3, 1e-3, 5e-4, 2.5e-4});
    for (std::size_t i = 0; i < r.dts.size(); ++i)
      out << "dt " << csv::format(r.dts[i]) << " error " << csv::format(r.errors[i]) << '\n';
    for (std::size_t i = 0; i < r.pairwise_orders.size(); ++i)
      out << "order " << fixed(r.pairwise_orders[i], 4) << '\n';
    out << "observed order " << fixed(r.fitted_order, 4) << '\n';
    return kExitOk;
  }

  // The Gausson reference follows the ODE flow from the same initial state.
  int evolve_run(const GaussonState2& initial, const Field2D& field0, const TrapConfig& trap,
                 const std::filesystem::path& dir, std::ostream& out) {
    OdeSettings os;
    os.dt = ps.dt;
    os.t_end = ps.t_end;
    os.sample_every = ps.sample_every;
    os.rel_tol = 1e-12;
    os.abs_tol = 1e-14;
    const Trajectory<2> ref = integrate(initial, trap, os);
    const PdeModel model = PdeModel::from(trap);

    SplitStepSolver solver(field0.grid, model, ps);
    solver.load(field0);
    const auto total = static_cast<long>(std::llround(ps.t_end / ps.dt));
    std::vector<PdeDiagnostics> rows;
    double min_fid = 1.0;
    long done = 0;
    for (std::size_t k = 0;; ++k) {
      const Field2D f = solver.field();
      const std::optional<GaussonState2> r =
          k < ref.samples.size() ? std::optional<GaussonState2>(ref.samples[k]) : std::nullopt;
      rows.push_back(diagnose(f, model, ps, r));
      if (r) min_fid = std::min(min_fid, rows.back().fidelity_vs_gausson);
      if (snapshot_every > 0 && k % static_cast<std::size_t>(snapshot_every) == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%04zu.bin", k / snapshot_every);
        auto sf = open_output(dir / name);
        write_snapshot(sf, f);
      }
      if (done >= total) break;
      const long chunk = std::min<long>(ps.sample_every, total - done);
      solver.advance(chunk);
      done += chunk;
    }
    auto f = open_output(dir / "diagnostics.csv");
    write_pde_diagnostics_csv(f, rows);
    out << "norm drift " << csv::format(std::abs(rows.back().norm - rows.front().norm)) << '\n';
    out << "min fidelity vs gausson " << fixed(min_fid, 9) << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------

struct StabilityCmd {
  double omega_min = 0.0;
  double omega_max = 2.0;
  int n_omega = 401;
  double stab_tol = kDefaultStabTol;
  std::string scan_file;

  void attach(CLI::App& sub) {
    sub.add_option("--omega-min", omega_min, "Lower end of the Omega grid");
    sub.add_option("--omega-max", omega_max, "Upper end of the Omega grid");
    sub.add_option("--n-omega", n_omega, "Number of Omega grid points");
    sub.add_option("--stab-tol", stab_tol, "Real-part threshold for classification");
    sub.add_option("--scan", scan_file, "branch_scan.csv to classify point by point");
  }

  int run(Common& common, std::ostream& out) {
    const TrapConfig trap = common.trap();
    if (trap.dim() != 2) throw ConfigError("omega3: stability is 2D only");
    if (!(omega_min < omega_max)) throw ConfigError("omega-min must be below omega-max");
    if (n_omega < 2) throw ConfigError("n-omega must be >= 2");
    const auto dir = common.out_dir();
    ConfigLines sub{{"omega-min", num(omega_min)},
                    {"omega-max", num(omega_max)},
                    {"n-omega", std::to_string(n_omega)},
                    {"stab-tol", num(stab_tol)}};
    if (!scan_file.empty()) sub.emplace_back("scan", scan_file);
    write_resolved(dir, "stability", common.lines(trap), sub);

    out << "Omega=0 center-of-mass eigenvalues:";
    for (const auto& l : com_spectrum(trap.with_rotation(0.0), stab_tol).eigenvalues)
      out << ' ' << fixed(l.real(), 9) << (l.imag() < 0 ? "-" : "+") << fixed(std::abs(l.imag()), 9)
          << 'i';
    out << '\n';

    std::vector<SpectrumRow> rows;
    for (int k = 0; k < n_omega; ++k) {
      const double om = omega_min + (omega_max - omega_min) * k / (n_omega - 1.0);
      rows.push_back({om, -1, com_spectrum(trap.with_rotation(om), stab_tol)});
    }
    {
      auto f = open_output(dir / "com_spectrum.csv");
      write_spectrum_csv(f, rows, 4);
    }
    for (std::size_t k = 0; k + 1 < rows.size(); ++k)
      if (rows[k].report.classification != rows[k + 1].report.classification) {
        const double th = com_threshold(trap, rows[k].omega, rows[k + 1].omega, 1e-12, stab_tol);
        out << "center-of-mass threshold Omega " << fixed(th, 12) << ' '
            << to_string(rows[k].report.classification) << " -> "
            << to_string(rows[k + 1].report.classification) << '\n';
      }

    if (!scan_file.empty()) classify_scan(trap, dir, out);
    return kExitOk;
  }

 private:
  void classify_scan(const TrapConfig& trap, const std::filesystem::path& dir, std::ostream& out) {
    std::ifstream in(scan_file);
    if (!in) throw ConfigError("scan: cannot open '" + scan_file + "'");
    auto points = read_scan_csv(in);
    std::vector<SpectrumRow> rows;
    // Arc index: rank by alpha1 among points of the same branch at the same Omega.
    // A fold joins two arcs under one branch_id; this keeps them apart in the table.
    std::vector<int> arc(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& p = points[i];
      const double res = max_residual(p.alpha1, p.alpha2, p.beta, trap.with_rotation(p.Omega));
      if (!(res < 1e-8))
        throw ConfigError("scan: point at Omega=" + num(p.Omega) +
                          " is not stationary for the given trap (residual " + num(res) + ")");
      for (std::size_t j = 0; j < i; ++j)
        if (points[j].Omega == p.Omega && points[j].branch_id == p.branch_id) {
          if (points[j].alpha1 < p.alpha1)
            ++arc[i];
          else
            ++arc[j];
        }
      rows.push_back({p.Omega, p.branch_id, classify(p, trap, stab_tol)});
    }
    {
      auto f = open_output(dir / "shape_spectrum.csv");
      write_spectrum_csv(f, rows, 6);
    }
    // Runs of constant classification along each arc, in file (Omega) order.
    std::map<std::pair<int, int>, std::vector<const SpectrumRow*>> by_arc;
    for (std::size_t i = 0; i < rows.size(); ++i)
      by_arc[{rows[i].branch_id, arc[i]}].push_back(&rows[i]);
    out << "branch  arc  Omega_lo  Omega_hi  classification  max_re\n";
    for (const auto& [key, list] : by_arc) {
      std::size_t start = 0;
      double max_re = -INFINITY;
      for (std::size_t i = 0; i <= list.size(); ++i) {
        if (i == list.size() ||
            list[i]->report.classification != list[start]->report.classification) {
          out << key.first << "  " << key.second << "  " << fixed(list[start]->omega, 6) << "  "
              << fixed(list[i - 1]->omega, 6) << "  "
              << to_string(list[start]->report.classification) << "  " << fixed(max_re, 6)
              << '\n';
          start = i;
          max_re = -INFINITY;
        }
        if (i < list.size()) max_re = std::max(max_re, list[i]->report.max_real_part);
      }
    }
  }
};

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Gaussian-ansatz solutions of the logarithmic Schrodinger equation in a rotating trap"};
  app.set_config("--config", "", "Read key = value options from FILE");
  app.require_subcommand(1);

  Common common;
  common.attach(app);
  StationaryScanCmd scan;
  EvolveOdeCmd ode;
  EvolvePdeCmd pde;
  StabilityCmd stab;
  auto* s_scan = app.add_subcommand("stationary-scan", "Trace stationary branches over Omega");
  auto* s_ode = app.add_subcommand("evolve-ode", "Integrate the Gausson ODE flow");
  auto* s_pde = app.add_subcommand("evolve-pde", "Evolve with the split-step spectral solver");
  auto* s_stab = app.add_subcommand("stability", "Center-of-mass and shape spectra");
  scan.attach(*s_scan);
  ode.attach(*s_ode);
  pde.attach(*s_pde);
  stab.attach(*s_stab);
  for (auto* s : {s_scan, s_ode, s_pde, s_stab}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (s_scan->parsed()) return scan.run(common, out);
    if (s_ode->parsed()) return ode.run(common, out);
    if (s_pde->parsed()) return pde.run(common, out);
    return stab.run(common, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
}

}  // namespace gausson::cli
