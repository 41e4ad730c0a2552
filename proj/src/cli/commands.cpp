#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridsens/cli.hpp"

namespace hybridsens::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string label(Mode m) { return std::string(to_string(m)); }

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

json to_json(const std::optional<double>& x) {
  return x ? number(*x) : json(nullptr);
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) raise(ErrorKind::kInvalidArgument, "cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::kInvalidArgument, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::string> indexed(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 1; i <= n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

std::vector<std::string> matrix_names(const std::string& prefix, Eigen::Index r,
                                      Eigen::Index c) {
  std::vector<std::string> names;
  for (Eigen::Index i = 1; i <= r; ++i) {
    for (Eigen::Index j = 1; j <= c; ++j) {
      names.push_back(prefix + std::to_string(i) + "_" + std::to_string(j));
    }
  }
  return names;
}

void append(std::vector<std::string>& cells, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) cells.push_back(fmt(v[i]));
}

void append_rows(std::vector<std::string>& cells, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) cells.push_back(fmt(m(i, j)));
  }
}

void append_nan(std::vector<std::string>& cells, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) cells.push_back("nan");
}

template <class... T>
std::vector<std::string> concat(std::vector<std::string> a, const T&... rest) {
  (a.insert(a.end(), rest.begin(), rest.end()), ...);
  return a;
}

fs::path prepare(const CommandOptions& opts, const std::string& name) {
  fs::create_directories(opts.out_dir);
  return opts.out_dir / name;
}

HybridTrajectory nominal(const RunConfig& cfg, IntegrationOptions options) {
  return simulate(cfg.model->system, cfg.x0, cfg.mu(), cfg.span, options);
}

json event_json(const HybridTrajectory& traj) {
  json j;
  j["event_found"] = traj.event_found;
  if (traj.event_found) {
    j["tau"] = traj.event_time;
    j["x_minus"] = to_json(traj.pre_event_state);
    j["x_plus"] = to_json(traj.post_event_state);
    j["g_dot"] = traj.guard_rate;
    j["crossing_direction"] = traj.crossing_direction;
  } else {
    j["tau"] = nullptr;
  }
  return j;
}

}  // namespace

std::vector<fs::path> cmd_simulate(const RunConfig& cfg, const CommandOptions& opts) {
  const HybridTrajectory traj = nominal(cfg, cfg.integration);
  const Eigen::Index n = cfg.x0.size();
  const fs::path csv = prepare(opts, "trajectory.csv");
  CsvWriter w(csv, concat(std::vector<std::string>{"t"}, indexed("x", n),
                          std::vector<std::string>{"branch"}, indexed("ante_x", n),
                          indexed("post_x", n)));
  for (double t : traj.grid) {
    std::vector<std::string> cells{fmt(t)};
    append(cells, traj.state(t));
    cells.push_back(label(traj.branch(t)));
    append(cells, traj.ante_ext(t));
    if (traj.post_ext) {
      append(cells, (*traj.post_ext)(t));
    } else {
      append_nan(cells, n);
    }
    w.row(cells);
  }
  json report = event_json(traj);
  report["model"] = cfg.model_name;
  report["span"] = {cfg.span.t0, cfg.span.t1};
  const fs::path js = prepare(opts, "event.json");
  write_json(js, report);
  return {csv, js};
}

std::vector<fs::path> cmd_sensitize(const RunConfig& cfg, const CommandOptions& opts) {
  IntegrationOptions options = cfg.integration;
  // Grazing is reported by the transversality check of the linearization.
  options.reject_grazing = false;
  const HybridTrajectory traj = nominal(cfg, options);
  const auto mu = cfg.mu();
  const JumpLinearization lin = linearize(cfg.model->system, traj, mu,
                                          options.transversality_tolerance);
  const LinearizedTrajectory lt =
      propagate_linearization(lin, cfg.z0, cfg.v_signal(), options);
  const Eigen::Index n = cfg.x0.size();

  json gain = event_json(traj);
  gain["H"] = to_json(lin.H);
  gain["I_plus_H"] = to_json(Matrix(Matrix::Identity(n, n) + lin.H));
  gain["tau_prime"] = number(lt.tau_prime);
  gain["z0"] = to_json(cfg.z0);
  const fs::path gain_path = prepare(opts, "jump_gain.json");
  write_json(gain_path, gain);

  const fs::path lin_path = prepare(opts, "linearization.csv");
  {
    CsvWriter w(lin_path, concat(std::vector<std::string>{"t"}, indexed("za", n),
                                 indexed("zp", n)));
    for (double t : lt.z_ante_ext.times()) {
      std::vector<std::string> cells{fmt(t)};
      append(cells, lt.z_ante_ext(t));
      if (lt.z_post_ext) {
        append(cells, (*lt.z_post_ext)(t));
      } else {
        append_nan(cells, n);
      }
      w.row(cells);
    }
  }

  const ConvergenceTable table =
      convergence_study(cfg.model->system, traj, lt, mu, cfg.eps, cfg.integration);
  const fs::path conv_path = prepare(opts, "convergence.csv");
  {
    CsvWriter w(conv_path, {"eps", "state_error", "event_time_error",
                            "perturbed_event_time", "state_slope", "event_slope"});
    for (const auto& r : table.rows) {
      w.row({fmt(r.eps), fmt(r.state_error), fmt(r.event_time_error),
             fmt(r.perturbed_event_time), r.state_slope ? fmt(*r.state_slope) : "",
             r.event_slope ? fmt(*r.event_slope) : ""});
    }
  }
  return {gain_path, lin_path, conv_path};
}

namespace {

RiccatiSolution synthesize(const RunConfig& cfg, const HybridTrajectory& traj) {
  const JumpLinearization lin = linearize(cfg.model->system, traj, cfg.mu(),
                                          cfg.integration.transversality_tolerance);
  return riccati_with_jumps(lin, cfg.weights(), cfg.riccati);
}

}  // namespace

std::vector<fs::path> cmd_synthesize(const RunConfig& cfg, const CommandOptions& opts) {
  const HybridTrajectory traj = nominal(cfg, cfg.integration);
  const RiccatiSolution sol = synthesize(cfg, traj);
  const Eigen::Index n = cfg.x0.size();
  const Eigen::Index m = cfg.model->system.n_input();

  const fs::path csv = prepare(opts, "riccati.csv");
  {
    CsvWriter w(csv, concat(std::vector<std::string>{"t", "piece"},
                            matrix_names("P", n, n), matrix_names("K", m, n)));
    auto emit = [&](Mode mode, std::span<const double> times) {
      for (double t : times) {
        std::vector<std::string> cells{fmt(t), label(mode)};
        append_rows(cells, sol.P(mode, t));
        append_rows(cells, sol.K(mode, t));
        w.row(cells);
      }
    };
    emit(Mode::kAnte, sol.P_ante_segment().times());
    if (sol.P_post_segment()) emit(Mode::kPost, sol.P_post_segment()->times());
  }

  json j;
  j["horizon"] = sol.t_end();
  j["has_reset"] = sol.has_reset();
  j["tau"] = sol.has_reset() ? json(sol.tau()) : json(nullptr);
  j["P_t0"] = to_json(sol.P(sol.t_begin()));
  j["K_t0"] = to_json(sol.K(sol.t_begin()));
  j["P_plus_at_tau"] = sol.P_plus_at_tau() ? to_json(*sol.P_plus_at_tau()) : json(nullptr);
  j["P_minus_at_tau"] = sol.P_minus_at_tau() ? to_json(*sol.P_minus_at_tau()) : json(nullptr);
  j["jump_at_tau"] = sol.has_reset()
                         ? json((*sol.P_minus_at_tau() - *sol.P_plus_at_tau())
                                    .cwiseAbs()
                                    .maxCoeff())
                         : json(0.0);
  j["reset_residual"] = sol.reset_residual();
  j["max_symmetry_error"] = sol.max_symmetry_error();
  j["max_R_condition"] = sol.max_R_condition();
  const fs::path js = prepare(opts, "riccati.json");
  write_json(js, j);
  return {csv, js};
}

std::vector<fs::path> cmd_track(const RunConfig& cfg, const CommandOptions& opts) {
  const HybridTrajectory traj = nominal(cfg, cfg.integration);
  const RiccatiSolution sol = synthesize(cfg, traj);
  const SwitchingPolicy policy = opts.policy.value_or(cfg.policy);
  const auto mu = cfg.mu();
  const ClosedLoopTrace trace = track(cfg.model->system, traj, mu, sol,
                                      cfg.x0 + cfg.delta, policy, cfg.integration);
  const Eigen::Index n = cfg.x0.size();
  const Eigen::Index m = cfg.model->system.n_input();

  const fs::path csv = prepare(opts, "trace.csv");
  {
    CsvWriter w(csv, concat(std::vector<std::string>{"t"}, indexed("x", n),
                            indexed("u", m),
                            std::vector<std::string>{"error", "reference_error",
                                                     "naive_error", "plant_branch",
                                                     "reference_branch"}));
    for (const auto& s : trace.samples) {
      std::vector<std::string> cells{fmt(s.t)};
      append(cells, s.x);
      append(cells, s.u);
      cells.insert(cells.end(), {fmt(s.error), fmt(s.reference_error),
                                 fmt(s.naive_error), label(s.plant_branch),
                                 label(s.reference_branch)});
      w.row(cells);
    }
  }

  json j;
  j["policy"] = to_string(policy);
  j["delta"] = to_json(cfg.delta);
  j["nominal_tau"] = traj.event_found ? json(traj.event_time) : json(nullptr);
  j["detection_time"] = to_json(trace.detection_time);
  j["reference_switch_time"] = to_json(trace.reference_switch_time);
  j["sup_error"] = trace.sup_error;
  j["sup_naive_error"] = trace.sup_naive_error;
  if (traj.event_found) {
    j["jump_magnitude"] = (traj.post_event_state - traj.pre_event_state).norm();
  }
  if (trace.detection_time && traj.event_found) {
    const double lo = std::min(traj.event_time, *trace.detection_time);
    const double hi = std::max(traj.event_time, *trace.detection_time);
    double band = 0.0;
    for (const auto& s : trace.samples) {
      if (s.t > lo && s.t < hi) band = std::max(band, s.naive_error);
    }
    j["band_naive_error"] = band;
  }
  if (trace.gain_metric) {
    j["gain_metric"] = {{"norm_at_tau_minus", trace.gain_metric->norm_at_tau_minus},
                        {"max_norm_pre_event", trace.gain_metric->max_norm_pre_event},
                        {"mean_norm_pre_event", trace.gain_metric->mean_norm_pre_event}};
  }
  if (cfg.random_trials > 0) {
    std::mt19937 rng(opts.seed);
    std::normal_distribution<double> normal;
    const double radius = cfg.delta.norm() > 0.0 ? cfg.delta.norm() : 0.01;
    json trials = json::array();
    for (int k = 0; k < cfg.random_trials; ++k) {
      Vector d(n);
      for (Eigen::Index i = 0; i < n; ++i) d[i] = normal(rng);
      d *= radius / d.norm();
      const auto tr = track(cfg.model->system, traj, mu, sol, cfg.x0 + d, policy,
                            cfg.integration);
      trials.push_back({{"delta", to_json(d)},
                        {"sup_error", tr.sup_error},
                        {"sup_naive_error", tr.sup_naive_error},
                        {"detection_time", to_json(tr.detection_time)}});
    }
    j["seed"] = opts.seed;
    j["random_trials"] = trials;
  }
  const fs::path js = prepare(opts, "track_summary.json");
  write_json(js, j);
  return {csv, js};
}

int exit_code(ErrorKind kind) { return kind == ErrorKind::kConfigError ? 2 : 1; }

int run(int argc, char** argv) {
  CLI::App app{"Sensitivity analysis and tracking for hybrid systems with one jump"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  std::uint32_t seed = 0;
  std::string policy;
  const std::vector<std::string> names{"simulate", "sensitize", "synthesize", "track"};
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Seed for random perturbation trials");
    sub->add_option("--policy", policy, "Switching policy")
        ->check(CLI::IsMember({"detection", "min_norm"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = load_config(config_path);
    CommandOptions opts;
    opts.out_dir = out_dir;
    opts.seed = seed;
    if (!policy.empty()) opts.policy = parse_switching_policy(policy);
    const std::string cmd = app.get_subcommands().front()->get_name();
    std::vector<fs::path> files;
    if (cmd == "simulate") files = cmd_simulate(cfg, opts);
    if (cmd == "sensitize") files = cmd_sensitize(cfg, opts);
    if (cmd == "synthesize") files = cmd_synthesize(cfg, opts);
    if (cmd == "track") files = cmd_track(cfg, opts);
    for (const auto& f : files) std::cout << f.string() << '\n';
    return 0;
  } catch (const HybridError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hybridsens::cli
