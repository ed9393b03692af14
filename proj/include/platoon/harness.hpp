#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "platoon/config.hpp"
#include "platoon/controller.hpp"
#include "platoon/core.hpp"
#include "platoon/detector.hpp"
#include "platoon/dynamics.hpp"
#include "platoon/observer.hpp"
#include "platoon/rng.hpp"
#include "platoon/sensing.hpp"

namespace platoon {

// ------------------------------------------------------------------ metrics

inline double performance_phi(const std::vector<Vec2>& xs, const std::vector<Vec2>& x_hats,
                              const std::vector<Vec2>& x_stars) {
  if (xs.size() != x_hats.size() || xs.size() != x_stars.size() || xs.empty()) {
    throw std::invalid_argument("performance_phi: length mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (x_hats[k] - xs[k]).norm() + (xs[k] - x_stars[k]).norm();
  return s / static_cast<double>(xs.size());
}

inline double platoon_phi(const std::vector<Vec2>& xs, const std::vector<Vec2>& x_stars) {
  if (xs.size() != x_stars.size() || xs.empty()) throw std::invalid_argument("platoon_phi: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (xs[k] - x_stars[k]).norm();
  return s / static_cast<double>(xs.size());
}

// -------------------------------------------------------------- scenario

// Validated config plus everything derived from it before the first step.
struct ResolvedScenario {
  ScenarioConfig config;
  BoundParams params;
  ThresholdDesign threshold;
  GainConditionReport gains;
};

// With strict = false an infeasible threshold or gain choice is recorded
// rather than rejected, so it can be reported.
inline ResolvedScenario resolve(ScenarioConfig cfg, bool strict = true) {
  validate(cfg);
  ResolvedScenario r;
  r.params = bound_params(cfg);
  cfg.varpi = r.params.varpi;
  r.threshold = design_threshold(r.params, cfg.threshold.omega, cfg.threshold.beta);
  if (strict && !(r.threshold.beta > 0.0)) {
    throw ConfigError("no feasible observer threshold for this configuration; supply one explicitly");
  }
  r.gains = check_gain_conditions({cfg.g_s, cfg.g_v}, cfg.T, grounded_laplacian(cfg.N));
  if (strict && !r.gains.holds) throw ConfigError("controller gains violate the closed-loop stability conditions");
  r.config = std::move(cfg);
  return r;
}

// ------------------------------------------------------------------ traces

struct VehicleRecord {
  Vec2 x = Vec2::Zero();
  Vec2 x_hat = Vec2::Zero();
  Vec2 x_bar = Vec2::Zero();
  Vec2 x_star = Vec2::Zero();
  Vec2 y_abs = Vec2::Zero();
  double u = 0.0;
  double rho = kNaN;
  double lambda = kNaN;
  double tau = kNaN;
  double alpha = kNaN;
  double beta = kNaN;
  double attack_norm = 0.0;
  Index source = 0;
  std::vector<double> gains;
  DetectionSets sets;
  DetectorFlags fired;
};

struct StepTrace {
  long t = 0;
  Vec2 reference = Vec2::Zero();
  std::vector<VehicleRecord> v;  // vehicle i at v[i-1]
  double phi = 0.0;
  double platoon_phi = 0.0;

  const VehicleRecord& at(Index i) const { return v.at(static_cast<std::size_t>(i - 1)); }
};

struct Trajectory {
  ResolvedScenario scenario;
  StepTrace initial;
  std::vector<StepTrace> steps;  // t = 1..horizon

  template <class F>
  void for_each(F&& f) const {
    f(initial);
    for (const auto& s : steps) f(s);
  }
};

struct SimulationOptions {
  // Returns true when the message from `sender` does not reach `receiver`'s
  // controller at step t. Estimation and detection always see every message.
  std::function<bool(long t, Index sender, Index receiver)> controller_drop;
};

// ---------------------------------------------------------------- simulation

class Simulation {
 public:
  explicit Simulation(ResolvedScenario sc, SimulationOptions opts = {})
      : sc_(std::move(sc)),
        opts_(std::move(opts)),
        topo_(sc_.config.N, sc_.config.L),
        plant_(sc_.config.T),
        formation_(plant_, sc_.config.x0(), sc_.config.delta_x),
        rng_(sc_.config.seed),
        injector_(sc_.config.attack) {
    const auto& c = sc_.config;
    const auto n = static_cast<std::size_t>(c.N + 1);
    xs_.assign(n, Vec2::Zero());
    u_.assign(n, 0.0);
    sets_.assign(n, DetectionSets{});
    fired_.assign(n, DetectorFlags{});
    for (Index i = 1; i <= c.N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      xs_[k] = c.initial_states[k - 1];
      observers_.emplace_back(i, topo_, sc_.params, c.threshold.mode, sc_.threshold.beta, c.T);
      observers_.back().reset(c.initial_estimates[k - 1]);
    }
    frame_ = measure(xs_, 0, c.mu, injector_, rng_);
    messages_ = make_messages(0);
    compute_inputs(0);
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const Topology& topology() const { return topo_; }
  const ResolvedScenario& scenario() const { return sc_; }
  long time() const { return t_; }
  const std::vector<Vec2>& states() const { return xs_; }
  const Observer& observer(Index i) const { return observers_.at(static_cast<std::size_t>(i - 1)); }

  StepTrace snapshot() const {
    StepTrace s;
    s.t = t_;
    s.reference = formation_.reference();
    const auto stars = formation_.desired();
    std::vector<Vec2> x, xh;
    for (Index i = 1; i <= sc_.config.N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const auto& o = observer(i).state();
      VehicleRecord r;
      r.x = xs_[k];
      r.x_hat = o.x_hat;
      r.x_bar = o.x_bar;
      r.x_star = stars[k - 1];
      r.y_abs = frame_.abs[k];
      r.u = u_[k];
      const bool in = topo_.interior(i);
      r.rho = in ? o.rho : kNaN;
      r.lambda = in ? kNaN : o.lambda;
      r.tau = in ? kNaN : o.tau;
      r.alpha = o.alpha;
      r.beta = o.beta;
      r.attack_norm = frame_.attack[k].norm();
      r.source = o.source;
      r.gains = o.gains;
      r.sets = sets_[k];
      r.fired = fired_[k];
      x.push_back(r.x);
      xh.push_back(r.x_hat);
      s.v.push_back(std::move(r));
    }
    s.phi = performance_phi(x, xh, stars);
    s.platoon_phi = platoon_phi(x, stars);
    return s;
  }

  void step() {
    const auto& c = sc_.config;
    const long prev = t_;
    ++t_;
    for (Index i = 1; i <= c.N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      xs_[k] = plant_.advance(xs_[k], u_[k], rng_.bounded_noise(c.epsilon, prev, i, Stream::process));
    }
    formation_.advance();
    frame_ = measure(xs_, t_, c.mu, injector_, rng_);
    for (Index i = 1; i <= c.N; ++i) observers_[static_cast<std::size_t>(i - 1)].predict(u_[static_cast<std::size_t>(i)]);
    messages_ = make_messages(t_);

    std::vector<DetectionSets> next(sets_.size());
    for (Index i = 1; i <= c.N; ++i) {
      const Inbox in(i, t_, topo_, messages_);
      std::vector<DetectionSets> received;
      for (Index j : topo_.neighbors(i)) received.push_back(in.from(j).sets);
      const DetectionSets fused = fuse_sets(in.from(i).sets, received);
      DetectorInput d;
      d.i = i;
      d.N = c.N;
      d.b = c.b;
      d.mu = c.mu;
      d.epsilon = c.epsilon;
      d.normA = plant_.norm();
      if (i >= 2) {
        d.y_rel = in.y_rel(i);
        d.y_abs_prev = in.y_abs(i - 1);
      }
      d.y_abs = in.y_abs(i);
      d.prediction = in.x_bar(i);
      d.bound_prev = in.from(i).alpha;
      auto out = detector_step(d, fused);
      next[static_cast<std::size_t>(i)] = std::move(out.sets);
      fired_[static_cast<std::size_t>(i)] = out.fired;
    }
    sets_ = std::move(next);
    for (Index i = 1; i <= c.N; ++i) {
      const Inbox in(i, t_, topo_, messages_);
      observers_[static_cast<std::size_t>(i - 1)].correct(in, sets_[static_cast<std::size_t>(i)], t_);
    }
    compute_inputs(t_);
  }

  Trajectory run() {
    Trajectory tr;
    tr.scenario = sc_;
    tr.initial = snapshot();
    tr.steps.reserve(static_cast<std::size_t>(sc_.config.horizon));
    while (t_ < sc_.config.horizon) {
      step();
      tr.steps.push_back(snapshot());
    }
    return tr;
  }

 private:
  std::vector<Message> make_messages(long t) const {
    std::vector<Message> m(static_cast<std::size_t>(sc_.config.N + 1));
    for (Index i = 1; i <= sc_.config.N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      auto& msg = m[k];
      msg.sender = i;
      msg.stamp = t;
      if (i >= 2) msg.y_rel = frame_.rel[k];
      msg.y_abs = frame_.abs[k];
      msg.x_bar = observer(i).state().x_bar;
      msg.sets = sets_[k];
      msg.alpha = observer(i).state().alpha;
    }
    return m;
  }

  void compute_inputs(long t) {
    const auto& c = sc_.config;
    const Gains g{c.g_s, c.g_v};
    const bool raw = c.controller == ControllerInput::measurements;
    const auto stars = formation_.desired();
    std::vector<double> next(u_.size(), 0.0);
    for (Index i = 1; i <= c.N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const Inbox in(i, t, topo_, messages_);
      const Vec2 own = raw ? frame_.abs[k] : observer(i).state().x_hat;
      std::vector<NeighborTerm> terms;
      for (Index j : controller_neighbors(i, c.N)) {
        NeighborTerm nt;
        const Vec2 star_j = j == 0 ? formation_.reference() : stars[static_cast<std::size_t>(j - 1)];
        nt.offset = stars[k - 1] - star_j;
        if (j == 0) {
          nt.state = formation_.reference();
        } else if (!(opts_.controller_drop && opts_.controller_drop(t, j, i))) {
          nt.state = raw ? in.y_abs(j) : in.x_bar(j);
        }
        terms.push_back(nt);
      }
      next[k] = control_input_or_hold(own, terms, g, u_[k]);
    }
    u_ = std::move(next);
  }

  ResolvedScenario sc_;
  SimulationOptions opts_;
  Topology topo_;
  Plant plant_;
  Formation formation_;
  CounterRng rng_;
  AttackInjector injector_;
  long t_ = 0;
  std::vector<Vec2> xs_;
  std::vector<double> u_;
  std::vector<DetectionSets> sets_;
  std::vector<DetectorFlags> fired_;
  std::vector<Observer> observers_;
  MeasurementFrame frame_;
  std::vector<Message> messages_;
};

inline Trajectory run_simulation(const ScenarioConfig& cfg, SimulationOptions opts = {}) {
  return Simulation(resolve(cfg), std::move(opts)).run();
}

// Largest ||x_hat - x|| - alpha over the whole run (negative when sound).
inline double max_bound_excess(const Trajectory& tr) {
  double worst = -kInf;
  tr.for_each([&](const StepTrace& s) {
    for (const auto& r : s.v) worst = std::max(worst, (r.x_hat - r.x).norm() - r.alpha);
  });
  return worst;
}

// ------------------------------------------------------------- monte carlo

// Per-step, per-vehicle means over runs. Indexed [t][i-1], t = 0..horizon.
struct MonteCarloSummary {
  int runs = 0;
  std::uint64_t base_seed = 0;
  std::vector<std::vector<double>> eta_s, eta_v, zeta_s, zeta_v;
  std::vector<double> phi, platoon_phi;
};

namespace detail {

struct RunMetrics {
  std::vector<std::vector<double>> es, ev, zs, zv;
  std::vector<double> phi, pphi;
};

inline RunMetrics collect(const Trajectory& tr) {
  RunMetrics m;
  tr.for_each([&](const StepTrace& s) {
    std::vector<double> es, ev, zs, zv;
    for (const auto& r : s.v) {
      es.push_back(std::abs(r.x_hat(0) - r.x(0)));
      ev.push_back(std::abs(r.x_hat(1) - r.x(1)));
      zs.push_back(r.x(0) - s.reference(0));
      zv.push_back(r.x(1) - s.reference(1));
    }
    m.es.push_back(std::move(es));
    m.ev.push_back(std::move(ev));
    m.zs.push_back(std::move(zs));
    m.zv.push_back(std::move(zv));
    m.phi.push_back(s.phi);
    m.pphi.push_back(s.platoon_phi);
  });
  return m;
}

}  // namespace detail

// Run k uses seed base_seed + k. `order` permutes execution (not reduction)
// order; `threads` = 0 picks the hardware concurrency.
inline MonteCarloSummary monte_carlo(const ScenarioConfig& cfg, int runs, std::uint64_t base_seed,
                                     unsigned threads = 0, std::vector<int> order = {}) {
  if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
  const ResolvedScenario base = resolve(cfg);
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(runs));
    std::iota(order.begin(), order.end(), 0);
  }
  std::vector<detail::RunMetrics> per(static_cast<std::size_t>(runs));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(runs));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t n = w; n < order.size(); n += threads) {
        const int k = order[n];
        ResolvedScenario sc = base;
        sc.config.seed = base_seed + static_cast<std::uint64_t>(k);
        per[static_cast<std::size_t>(k)] = detail::collect(Simulation(std::move(sc)).run());
      }
    });
  }
  for (auto& th : pool) th.join();

  MonteCarloSummary s;
  s.runs = runs;
  s.base_seed = base_seed;
  const auto T = per[0].phi.size();
  const auto N = per[0].es[0].size();
  auto zero_grid = [&] { return std::vector<std::vector<double>>(T, std::vector<double>(N, 0.0)); };
  s.eta_s = zero_grid();
  s.eta_v = zero_grid();
  s.zeta_s = zero_grid();
  s.zeta_v = zero_grid();
  s.phi.assign(T, 0.0);
  s.platoon_phi.assign(T, 0.0);
  for (const auto& m : per) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < N; ++i) {
        s.eta_s[t][i] += m.es[t][i];
        s.eta_v[t][i] += m.ev[t][i];
        s.zeta_s[t][i] += m.zs[t][i];
        s.zeta_v[t][i] += m.zv[t][i];
      }
      s.phi[t] += m.phi[t];
      s.platoon_phi[t] += m.pphi[t];
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      s.eta_s[t][i] /= runs;
      s.eta_v[t][i] /= runs;
      s.zeta_s[t][i] /= runs;
      s.zeta_v[t][i] /= runs;
    }
    s.phi[t] /= runs;
    s.platoon_phi[t] /= runs;
  }
  return s;
}

}  // namespace platoon
