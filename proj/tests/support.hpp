#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "platoon/platoon.hpp"

namespace platoon::testing {

// Hand-rolled generator for property tests. Seeded explicitly so a failing
// case can be replayed from the printed seed.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_real(double lo, double hi) { return std::exp(real(std::log(lo), std::log(hi))); }
  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }
  std::uint64_t bits() { return rng_(); }

  Vec2 vec(double scale) { return Vec2(real(-scale, scale), real(-scale, scale)); }

  // Uniform direction, given norm.
  Vec2 direction(double norm) {
    const double th = real(0.0, 2.0 * std::numbers::pi);
    return norm * Vec2(std::cos(th), std::sin(th));
  }

  // Inside the closed ball of the given radius.
  Vec2 in_ball(double radius) { return direction(radius * std::sqrt(real(0.0, 1.0))); }

  // k random distinct labels from 1..n.
  IndexSet subset(int n, int k) {
    std::vector<Index> all;
    for (Index i = 1; i <= n; ++i) all.push_back(i);
    std::shuffle(all.begin(), all.end(), rng_);
    all.resize(static_cast<std::size_t>(k));
    return IndexSet(all);
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))];
  }

 private:
  std::mt19937_64 rng_;
};

struct ConfigRanges {
  int n_lo = 5, n_hi = 9;
  int l_lo = 1, l_hi = 3;
  double t_lo = 0.005, t_hi = 0.02;
  double noise_hi = 0.2;
  bool allow_partial_attack = true;   // |S^a| < b
  bool adversarial = true;            // magnitudes spanning detection thresholds
  double varpi_cap = 0.0;             // > 0: draw varpi from (1.5, cap)
  long horizon = 60;
};

inline AttackSpec random_attack_spec(Gen& g, const ScenarioConfig& c, const ConfigRanges& r) {
  AttackSpec a;
  const int k = r.allow_partial_attack ? g.integer(0, c.b) : c.b;
  a.set = g.subset(c.N, k);
  a.kind = g.pick(std::vector<AttackKind>{AttackKind::random, AttackKind::dos, AttackKind::bias, AttackKind::replay});
  a.start = g.coin(0.5) ? 0 : g.integer(1, 40);
  const double g0 = c.epsilon + c.mu;
  switch (a.kind) {
    case AttackKind::random:
      a.scale = r.adversarial ? g.log_real(1e-4, 10.0) : g.real(0.5, 2.0);
      break;
    case AttackKind::bias: {
      // Mix magnitudes near the pairwise threshold 3 mu, near the innovation
      // threshold at the initial bound, and far outside both.
      double mag;
      switch (g.integer(0, 3)) {
        case 0: mag = 3.0 * c.mu * g.real(0.9, 1.1); break;
        case 1: mag = (g0 + c.q) * g.real(0.9, 1.1); break;
        case 2: mag = g.log_real(1e-3, 1e3); break;
        default: mag = g0 * g.real(0.5, 4.0); break;
      }
      a.offset = g.direction(mag);
      break;
    }
    case AttackKind::replay:
      a.record_len = g.integer(1, 50);
      break;
    case AttackKind::dos:
      break;
  }
  return a;
}

// Random configuration that passes resolve(): feasible threshold and gains.
inline ScenarioConfig random_config(Gen& g, const ConfigRanges& r = {}) {
  for (;;) {
    ScenarioConfig c;
    c.N = g.integer(r.n_lo, r.n_hi);
    c.L = g.integer(r.l_lo, std::min(r.l_hi, (c.N - 1) / 2));
    c.b = g.integer(1, c.L);
    c.T = g.real(r.t_lo, r.t_hi);
    c.q = g.real(50.0, 500.0);
    c.epsilon = g.real(0.0, r.noise_hi);
    c.mu = g.real(0.0, r.noise_hi);
    const double lmax = laplacian_spectrum(grounded_laplacian(c.N)).maxCoeff();
    c.g_s = g.real(1.0, 60.0);
    const double gv_hi = (c.T * c.T * c.g_s + 4.0 / lmax) / (2.0 * c.T);
    const double gv_lo = c.T * c.g_s;
    if (!(gv_hi > gv_lo)) continue;
    c.g_v = g.real(gv_lo + 0.05 * (gv_hi - gv_lo), gv_lo + 0.95 * (gv_hi - gv_lo));
    c.threshold.mode = g.coin() ? ThresholdMode::adaptive : ThresholdMode::static_beta;
    const double normA = Plant(c.T).norm();
    if (r.varpi_cap > 0.0) {
      c.varpi = g.real(1.5, std::min(r.varpi_cap, normA / (normA - 1.0) - 1e-6));
    } else if (g.coin(0.3)) {
      c.varpi = g.real(1.0 + 1e-3, normA / (normA - 1.0) - 1e-3);
    }
    c.horizon = r.horizon;
    c.seed = g.bits();
    c.s0 = g.real(0.0, 500.0);
    c.v0 = g.real(0.0, 30.0);
    c.delta_x.clear();
    for (int k = 1; k < c.N; ++k) c.delta_x.push_back(Vec2(g.real(5.0, 30.0), 0.0));
    c.initial_states.clear();
    Vec2 at = c.x0();
    for (int k = 0; k < c.N; ++k) {
      if (k > 0) at -= c.delta_x[static_cast<std::size_t>(k - 1)];
      c.initial_states.push_back(at + g.vec(10.0));
    }
    c.initial_estimates.clear();
    for (const auto& x : c.initial_states) c.initial_estimates.push_back(x + g.in_ball(0.9 * c.q));
    c.attack = random_attack_spec(g, c, r);
    try {
      (void)resolve(c);
    } catch (const ConfigError&) {
      continue;
    }
    return c;
  }
}

// Frame source over plain vectors (index 1..N), for reconstruction tests.
struct FrameSource {
  const MeasurementFrame* f;
  std::vector<Vec2> xbar;
  const Vec2& y_abs(Index i) const { return f->y_abs(i); }
  const Vec2& y_rel(Index j) const { return f->y_rel(j); }
  const Vec2& x_bar(Index j) const { return xbar.at(static_cast<std::size_t>(j)); }
};

// One-based state vector with an unused slot 0.
inline std::vector<Vec2> one_based(const std::vector<Vec2>& xs) {
  std::vector<Vec2> out{Vec2::Zero()};
  out.insert(out.end(), xs.begin(), xs.end());
  return out;
}

}  // namespace platoon::testing
