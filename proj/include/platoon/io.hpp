#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "platoon/harness.hpp"

namespace platoon {

// 17 significant digits: round-trips every double.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ------------------------------------------------------------ envelopes

struct EnvelopeRow {
  long t;
  Index i;
  double rho, lambda, tau, alpha;
};

// Bound recursions with every detection set held empty: the worst case that
// can be evaluated before running. lambda is the envelope a boundary vehicle
// would follow if trusted from the first step.
inline std::vector<EnvelopeRow> bound_envelopes(const ResolvedScenario& sc) {
  const auto& c = sc.config;
  const auto& p = sc.params;
  const Topology topo(c.N, c.L);
  const DetectionSets empty;
  const auto n = static_cast<std::size_t>(c.N + 1);
  std::vector<double> rho(n, p.q), lam(n, p.q), tau(n, p.q), alpha(n, p.q);
  std::vector<EnvelopeRow> rows;
  auto emit = [&](long t) {
    for (Index i = 1; i <= c.N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const bool in = topo.interior(i);
      rows.push_back({t, i, in ? rho[k] : kNaN, in ? kNaN : lam[k], in ? kNaN : tau[k], alpha[k]});
    }
  };
  emit(0);
  const double k0 = sc.threshold.beta / p.beta0();
  for (long t = 1; t <= c.horizon; ++t) {
    const auto prev_alpha = alpha;
    for (Index i = 1; i <= c.N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (topo.interior(i)) {
        const double beta_t =
            c.threshold.mode == ThresholdMode::adaptive ? adaptive_threshold(rho[k], k0, p) : sc.threshold.beta;
        rho[k] = rho_update(rho[k], 0, 0, beta_t, p).rho;
        alpha[k] = rho[k];
      } else {
        const Index j = nearest_trusted(i, empty, topo);
        tau[k] = tau_update(tau[k], std::abs(j - i), prev_alpha[static_cast<std::size_t>(j)], p);
        lam[k] = lambda_update(lam[k], p);
        alpha[k] = tau[k];
      }
    }
    emit(t);
  }
  return rows;
}

inline void write_envelopes_csv(std::ostream& os, const std::vector<EnvelopeRow>& rows) {
  os << "t,i,rho,lambda,tau,alpha\n";
  for (const auto& r : rows) {
    os << r.t << ',' << r.i << ',' << fmt(r.rho) << ',' << fmt(r.lambda) << ',' << fmt(r.tau) << ','
       << fmt(r.alpha) << '\n';
  }
}

// ---------------------------------------------------------- feasibility

inline nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline nlohmann::json feasibility_report(const ResolvedScenario& sc) {
  const auto& c = sc.config;
  const auto& p = sc.params;
  const Gains g{c.g_s, c.g_v};
  const Topology topo(c.N, c.L);
  nlohmann::json j;
  j["feasible"] = sc.gains.holds && sc.threshold.beta > 0.0 && std::isfinite(sc.threshold.beta);

  j["observer"] = {{"norm_A", p.normA}, {"varpi", p.varpi}, {"mu_bar", p.mu_bar()}, {"beta0_bound", p.beta0()}};

  const auto& gc = sc.gains;
  j["gain_conditions"] = {{"holds", gc.holds},
                          {"lambda_max", gc.lambda_max},
                          {"margin_ordering", gc.margin_ordering},
                          {"margin_positive", gc.margin_positive},
                          {"margin_stability", gc.margin_stability}};

  const Eigen::MatrixXd P = closed_loop_matrix(c.N, c.T, g);
  const double radius = spectral_radius(P);
  nlohmann::json cl{{"spectral_radius", radius},
                    {"block_spectrum_gap", spectrum_distance(spectrum(P), block_spectrum(c.N, c.T, g))}};
  std::optional<LyapunovBound> lb;
  if (radius < 1.0) {
    lb = lyapunov_bound(P);
    cl["lyapunov_residual"] = lyapunov_residual(P, lb->M);
    cl["kappa"] = lb->kappa;
    cl["xi"] = lb->xi_unit;
  }
  j["closed_loop"] = cl;

  const auto& th = sc.threshold;
  nlohmann::json tj{{"mode", c.threshold.mode == ThresholdMode::static_beta ? "static" : "adaptive"},
                    {"grid_feasible", th.feasible},
                    {"omega", number_or_null(th.omega)},
                    {"beta_bar_1", number_or_null(th.interval.lo)},
                    {"beta_bar_2", number_or_null(th.interval.hi)},
                    {"beta", number_or_null(th.beta)},
                    {"k0", number_or_null(th.k0)}};
  if (auto iv = feasible_omega_interval(p)) tj["omega_interval"] = {iv->first, iv->second};
  else tj["omega_interval"] = nullptr;
  int grid = 0;
  for (int k = 1; k <= 99; ++k) grid += static_threshold_interval(k / 100.0, p).valid() ? 1 : 0;
  tj["feasible_grid_points"] = grid;
  j["threshold"] = tj;

  auto bounds_json = [&](bool adaptive) {
    nlohmann::json arr = nlohmann::json::array();
    double worst = 0.0;
    for (Index i = 1; i <= c.N; ++i) {
      const DetectionSets empty;
      const auto b = adaptive ? asymptotic_bounds_adaptive(i, empty, th.beta, topo, p)
                              : asymptotic_bounds_static(i, empty, th.beta, topo, p);
      worst = std::max({worst, b.a1, b.a2, b.a3});
      arr.push_back({{"i", i},
                     {"alpha_1", number_or_null(b.a1)},
                     {"alpha_2", number_or_null(b.a2)},
                     {"alpha_3", number_or_null(b.a3)},
                     {"applicable", number_or_null(b.applicable(topo.interior(i), false))}});
    }
    nlohmann::json out{{"vehicles", arr}, {"alpha_hat", number_or_null(worst)}};
    if (lb && std::isfinite(worst)) out["performance_bound"] = performance_bound(worst, g, c.N, c.T, c.epsilon).value;
    else out["performance_bound"] = nullptr;
    return out;
  };
  if (std::isfinite(th.beta)) j["asymptotic"] = {{"static", bounds_json(false)}, {"adaptive", bounds_json(true)}};
  else j["asymptotic"] = nullptr;
  return j;
}

// --------------------------------------------------------------- traces

inline void write_trace_csv(std::ostream& os, const Trajectory& tr) {
  const int blocks = 2 * tr.scenario.config.L + 1;
  os << "t,i,s,v,s_hat,v_hat,s_bar,v_bar,s_star,v_star,y_s,y_v,u,rho,lambda,tau,alpha,beta,source,attack_norm,phi,"
        "platoon_phi";
  for (int k = 1; k <= blocks; ++k) os << ",k_" << k;
  os << '\n';
  tr.for_each([&](const StepTrace& s) {
    for (std::size_t n = 0; n < s.v.size(); ++n) {
      const auto& r = s.v[n];
      os << s.t << ',' << n + 1;
      for (const Vec2* v : {&r.x, &r.x_hat, &r.x_bar, &r.x_star, &r.y_abs}) os << ',' << fmt((*v)(0)) << ',' << fmt((*v)(1));
      os << ',' << fmt(r.u) << ',' << fmt(r.rho) << ',' << fmt(r.lambda) << ',' << fmt(r.tau) << ',' << fmt(r.alpha)
         << ',' << fmt(r.beta) << ',' << r.source << ',' << fmt(r.attack_norm) << ',' << fmt(s.phi) << ','
         << fmt(s.platoon_phi);
      for (int k = 0; k < blocks; ++k) {
        os << ',' << fmt(static_cast<std::size_t>(k) < r.gains.size() ? r.gains[static_cast<std::size_t>(k)] : kNaN);
      }
      os << '\n';
    }
  });
}

inline void write_detection_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,i,trusted,attacked,suspected,pairwise,innovation,exhaustion,completion\n";
  tr.for_each([&](const StepTrace& s) {
    for (std::size_t n = 0; n < s.v.size(); ++n) {
      const auto& r = s.v[n];
      os << s.t << ',' << n + 1 << ',' << r.sets.trusted.to_string() << ',' << r.sets.attacked.to_string() << ','
         << r.sets.suspected.to_string() << ',' << r.fired.pairwise << ',' << r.fired.innovation << ','
         << r.fired.exhaustion << ',' << r.fired.completion << '\n';
    }
  });
}

inline nlohmann::json run_summary(const Trajectory& tr) {
  const auto& c = tr.scenario.config;
  const StepTrace& last = tr.steps.empty() ? tr.initial : tr.steps.back();
  nlohmann::json ident = nlohmann::json::array();
  for (Index i = 1; i <= c.N; ++i) {
    std::optional<long> at;
    tr.for_each([&](const StepTrace& s) {
      if (!at && static_cast<int>(s.at(i).sets.attacked.size()) == c.b) at = s.t;
    });
    ident.push_back(at ? nlohmann::json(*at) : nlohmann::json());
  }
  double max_err = 0.0;
  tr.for_each([&](const StepTrace& s) {
    for (const auto& r : s.v) max_err = std::max(max_err, (r.x_hat - r.x).norm());
  });
  return {{"seed", c.seed},
          {"horizon", c.horizon},
          {"phi_initial", tr.initial.phi},
          {"phi_final", last.phi},
          {"platoon_phi_final", last.platoon_phi},
          {"max_estimation_error", max_err},
          {"max_bound_excess", max_bound_excess(tr)},
          {"attack_set_identified_at", ident}};
}

inline void write_monte_carlo_csv(std::ostream& os, const MonteCarloSummary& s) {
  os << "t,i,eta_s,eta_v,zeta_s,zeta_v,phi,platoon_phi\n";
  for (std::size_t t = 0; t < s.phi.size(); ++t) {
    for (std::size_t i = 0; i < s.eta_s[t].size(); ++i) {
      os << t << ',' << i + 1 << ',' << fmt(s.eta_s[t][i]) << ',' << fmt(s.eta_v[t][i]) << ','
         << fmt(s.zeta_s[t][i]) << ',' << fmt(s.zeta_v[t][i]) << ',' << fmt(s.phi[t]) << ','
         << fmt(s.platoon_phi[t]) << '\n';
    }
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

template <class Writer, class... Args>
std::string to_text(Writer w, const Args&... args) {
  std::ostringstream os;
  w(os, args...);
  return os.str();
}

inline nlohmann::json resolved_config_json(const ResolvedScenario& sc) {
  nlohmann::json j = config_to_json(sc.config);
  j["threshold"][sc.config.threshold.mode == ThresholdMode::static_beta ? "beta" : "beta0"] = sc.threshold.beta;
  if (std::isfinite(sc.threshold.omega)) j["threshold"]["omega"] = sc.threshold.omega;
  return j;
}

inline void write_run_directory(const std::filesystem::path& dir, const Trajectory& tr) {
  std::filesystem::create_directories(dir);
  write_json(dir / "scenario.json", resolved_config_json(tr.scenario));
  write_json(dir / "feasibility.json", feasibility_report(tr.scenario));
  write_text(dir / "trace.csv", to_text(write_trace_csv, tr));
  write_text(dir / "detection.csv", to_text(write_detection_csv, tr));
  write_json(dir / "summary.json", run_summary(tr));
}

inline void write_monte_carlo_directory(const std::filesystem::path& dir, const ResolvedScenario& sc,
                                        const MonteCarloSummary& s) {
  std::filesystem::create_directories(dir);
  write_json(dir / "scenario.json", resolved_config_json(sc));
  write_json(dir / "feasibility.json", feasibility_report(sc));
  write_text(dir / "summary.csv", to_text(write_monte_carlo_csv, s));
  const std::size_t last = s.phi.size() - 1;
  write_json(dir / "summary.json", {{"runs", s.runs},
                                    {"base_seed", s.base_seed},
                                    {"horizon", sc.config.horizon},
                                    {"phi_initial", s.phi.front()},
                                    {"phi_final", s.phi[last]},
                                    {"platoon_phi_final", s.platoon_phi[last]},
                                    {"eta_s_final", s.eta_s[last]},
                                    {"eta_v_final", s.eta_v[last]}});
}

}  // namespace platoon
