#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "platoon/config.hpp"
#include "platoon/core.hpp"
#include "platoon/dynamics.hpp"
#include "platoon/sensing.hpp"

namespace platoon {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Scalars shared by every bound formula.
struct BoundParams {
  int L = 2;
  int b = 1;
  double q = 300.0;
  double epsilon = 0.1;
  double mu = 0.1;
  double normA = 1.0;
  double varpi = 2.0;

  double mu_bar() const { return (L + 1) * mu; }
  double beta0() const { return normA * q + epsilon + mu_bar(); }
  int healthy() const { return 2 * L + 1 - b; }  // 2L+1-b
  double contraction() const { return (varpi - 1.0) * normA / varpi; }
};

inline double default_varpi(double normA) { return (1.0 + normA / (normA - 1.0)) / 2.0; }

inline BoundParams bound_params(const ScenarioConfig& c) {
  BoundParams p;
  p.L = c.L;
  p.b = c.b;
  p.q = c.q;
  p.epsilon = c.epsilon;
  p.mu = c.mu;
  p.normA = Plant(c.T).norm();
  p.varpi = c.varpi.value_or(default_varpi(p.normA));
  return p;
}

// ---------------------------------------------------------------- threshold

struct ThresholdInterval {
  double lo = kNaN;  // beta-bar_1
  double hi = kNaN;  // beta-bar_2
  bool valid() const { return lo > 0.0 && lo < hi; }
  double width() const { return hi - lo; }
};

inline ThresholdInterval static_threshold_interval(double omega, const BoundParams& p) {
  ThresholdInterval r;
  const int Lb = p.healthy();
  if (Lb <= 0) return r;
  const double c = p.epsilon + p.mu_bar();
  const double b0 = p.beta0();
  const double f1 = c * Lb / (2.0 * p.L);
  r.lo = (2.0 * p.L / Lb) * (omega + p.normA - 1.0) * b0 / p.normA;
  r.hi = std::min(b0, (2.0 * p.L / p.b) * (omega * p.q - f1));
  return r;
}

// Both inequalities of the sufficient condition, evaluated literally.
inline bool feasibility_check(double omega, const BoundParams& p) {
  const int Lb = p.healthy();
  if (Lb <= 0 || p.b <= 0) return false;
  const double c = p.epsilon + p.mu_bar();
  const double f1 = c * Lb / (2.0 * p.L);
  const double f2 = (omega * c + (p.normA - 1.0) * p.beta0()) / p.normA;
  const double den = omega * p.q - f1;
  if (!(den > 0.0)) return false;
  const double mid = (omega * p.q + f2) / den;
  const bool first = static_cast<double>(Lb) / p.b > mid && mid > 0.0;
  const bool second = static_cast<double>(Lb) / (2.0 * p.L) > (omega + p.normA - 1.0) / p.normA;
  return first && second;
}

// Exact set of omega in (0, 1) with a nonempty threshold interval. Every
// constraint is linear in omega, so the set is an open interval.
inline std::optional<std::pair<double, double>> feasible_omega_interval(const BoundParams& p) {
  const int Lb = p.healthy();
  if (Lb <= 0) return std::nullopt;
  const double c = p.epsilon + p.mu_bar();
  const double d = p.normA - 1.0;
  const double f1 = c * Lb / (2.0 * p.L);
  double lo = std::max(0.0, f1 / p.q);
  const double slope = (Lb - p.b) * p.q - p.b * c / p.normA;
  const double rhs = Lb * f1 + p.b * d * p.beta0() / p.normA;
  if (p.b > 0) {
    if (!(slope > 0.0)) return std::nullopt;
    lo = std::max(lo, rhs / slope);
  }
  const double hi = std::min(1.0, static_cast<double>(Lb) * p.normA / (2.0 * p.L) - d);
  if (!(lo < hi)) return std::nullopt;
  return std::make_pair(lo, hi);
}

struct ThresholdDesign {
  bool feasible = false;
  double omega = kNaN;
  ThresholdInterval interval;
  double beta = kNaN;  // static beta or adaptive beta_0
  double k0 = kNaN;    // beta / beta_0(q)
};

// Grid search over omega = 0.01..0.99 for the widest interval; beta is its
// midpoint unless given. A fixed omega skips the search.
inline ThresholdDesign design_threshold(const BoundParams& p, std::optional<double> omega = std::nullopt,
                                        std::optional<double> beta = std::nullopt) {
  ThresholdDesign d;
  if (omega) {
    d.omega = *omega;
    d.interval = static_threshold_interval(*omega, p);
    d.feasible = d.interval.valid();
  } else {
    for (int k = 1; k <= 99; ++k) {
      const double w = k / 100.0;
      const auto iv = static_threshold_interval(w, p);
      if (iv.valid() && (!d.feasible || iv.width() > d.interval.width())) {
        d.feasible = true;
        d.omega = w;
        d.interval = iv;
      }
    }
  }
  if (beta) d.beta = *beta;
  else if (d.feasible) d.beta = 0.5 * (d.interval.lo + d.interval.hi);
  d.k0 = d.beta / p.beta0();
  return d;
}

inline double adaptive_threshold(double rho_prev, double k0, const BoundParams& p) {
  return k0 * (p.normA * rho_prev + p.epsilon + p.mu_bar());
}

// ------------------------------------------------------------------ updates

inline Vec2 time_update(const Vec2& x_hat, double u, double T) { return Plant(T).advance(x_hat, u, Vec2::Zero()); }

inline double saturation_gain(const Vec2& eta, Index m, const DetectionSets& sets, double beta) {
  if (sets.attacked.contains(m)) return 0.0;
  if (sets.trusted.contains(m)) return 1.0;
  const double n = eta.norm();
  if (n == 0.0) return 1.0;
  return std::min(1.0, beta / n);
}

struct V1Update {
  Vec2 x_hat;
  std::vector<double> gains;  // one per stacked block
};

inline V1Update measurement_update_v1(const Vec2& x_bar, const StackedMeasurement& z, const DetectionSets& sets,
                                      double beta, int L) {
  V1Update out{x_bar, {}};
  Vec2 acc = Vec2::Zero();
  for (std::size_t s = 0; s < z.origin.size(); ++s) {
    const Vec2 eta = z.z.segment<2>(2 * static_cast<Eigen::Index>(s)) - x_bar;
    const double k = saturation_gain(eta, z.origin[s], sets, beta);
    out.gains.push_back(k);
    acc += k * eta;
  }
  out.x_hat = x_bar + acc / (2.0 * L);
  return out;
}

inline Vec2 measurement_update_v2(const Vec2& x_bar, const Vec2& y, double varpi) {
  return x_bar + (y - x_bar) / varpi;
}

// argmin |j - i| over interior neighbours and trusted sensors; ties go to
// the smaller index.
inline Index nearest_trusted(Index i, const DetectionSets& sets, const Topology& topo) {
  const IndexSet cand = topo.interior_neighbors(i) | sets.trusted;
  if (cand.empty()) throw ConfigError("no interior neighbour or trusted sensor to reconstruct from");
  Index best = cand.front();
  for (Index j : cand) {
    if (std::abs(j - i) < std::abs(best - i)) best = j;
  }
  return best;
}

// --------------------------------------------------------- bound recursions

namespace detail {

// Contraction factor and noise multiplicity for a neighbourhood with
// `trusted_local` confirmed-clean sensors and gain lower bound k. When more
// sensors are trusted than 2L+1-b the factor can turn negative; its magnitude
// and the larger healthy count are used instead.
struct Contraction {
  double m;
  int noise_count;
};

inline Contraction contraction(int trusted_local, double k, const BoundParams& p) {
  const int Lb = p.healthy();
  const int coef = std::max(0, Lb - trusted_local);
  const double m = 1.0 - (trusted_local + coef * k) / (2.0 * p.L);
  return {std::abs(m), std::max(Lb, trusted_local)};
}

}  // namespace detail

struct RhoTerms {
  double k_bar;
  double m_bar;
  double Q_bar;
  double rho;
};

inline RhoTerms rho_update(double rho_prev, int trusted_local, int attacked_count, double beta_t,
                           const BoundParams& p) {
  const double c = p.epsilon + p.mu_bar();
  RhoTerms r{};
  r.k_bar = std::min(1.0, beta_t / (p.normA * rho_prev + c));
  const auto ct = detail::contraction(trusted_local, r.k_bar, p);
  r.m_bar = ct.m;
  r.Q_bar = (c * ct.noise_count + std::max(0, p.b - attacked_count) * beta_t) / (2.0 * p.L);
  r.rho = r.m_bar * p.normA * rho_prev + r.Q_bar;
  return r;
}

inline int trusted_local_count(Index i, const DetectionSets& sets, const Topology& topo) {
  return static_cast<int>((sets.trusted & topo.closed_neighborhood(i)).size());
}

inline double lambda_update(double lambda_prev, const BoundParams& p) {
  return p.contraction() * lambda_prev + (p.epsilon * (p.varpi - 1.0) + p.mu) / p.varpi;
}

// s_prev is the previous bound of the source vehicle j_i.
inline double tau_update(double tau_prev, int hop, double s_prev, const BoundParams& p) {
  return p.contraction() * tau_prev + (p.epsilon * p.varpi + p.mu * hop + p.normA * s_prev) / p.varpi;
}

struct ObserverState {
  Vec2 x_hat = Vec2::Zero();
  Vec2 x_bar = Vec2::Zero();
  double rho = kNaN;
  double lambda = kNaN;
  double tau = kNaN;
  double alpha = kNaN;
  double beta = kNaN;               // threshold in force this step (interior only)
  std::optional<long> trusted_at;   // first step with i in its own trusted set
  Index source = 0;                 // j_i used this step (boundary, untrusted)
  std::vector<double> gains;        // interior only
};

inline ObserverState initial_observer_state(const Vec2& x_hat0, const BoundParams& p) {
  ObserverState s;
  s.x_hat = x_hat0;
  s.x_bar = x_hat0;
  s.rho = s.lambda = s.tau = s.alpha = p.q;
  return s;
}

// Case split of the real-time bound.
inline double realtime_bound(const ObserverState& s, bool interior, bool self_trusted) {
  if (interior) return s.rho;
  return self_trusted ? s.lambda : s.tau;
}

// Per-vehicle observer. Time update, then measurement update and bounds from
// the inbox and this step's detection sets.
class Observer {
 public:
  Observer(Index id, const Topology& topo, const BoundParams& params, ThresholdMode mode, double beta,
           double T)
      : id_(id), topo_(&topo), p_(params), mode_(mode), beta_(beta), plant_(T) {}

  Index id() const { return id_; }
  const ObserverState& state() const { return s_; }
  void reset(const Vec2& x_hat0) { s_ = initial_observer_state(x_hat0, p_); }

  const Vec2& predict(double u_prev) {
    s_.x_bar = plant_.advance(s_.x_hat, u_prev, Vec2::Zero());
    return s_.x_bar;
  }

  // Messages in `in` carry the neighbours' previous bounds in `alpha`.
  void correct(const Inbox& in, const DetectionSets& sets, long t) {
    if (topo_->interior(id_)) {
      const double beta_t = mode_ == ThresholdMode::adaptive ? adaptive_threshold(s_.rho, beta_ / p_.beta0(), p_)
                                                             : beta_;
      const auto z = stack_measurements(in, id_, *topo_);
      auto up = measurement_update_v1(s_.x_bar, z, sets, beta_t, p_.L);
      s_.x_hat = up.x_hat;
      s_.gains = std::move(up.gains);
      s_.beta = beta_t;
      s_.rho = rho_update(s_.rho, trusted_local_count(id_, sets, *topo_), static_cast<int>(sets.attacked.size()),
                          beta_t, p_)
                   .rho;
      s_.alpha = s_.rho;
      return;
    }
    const bool self_trusted = sets.trusted.contains(id_);
    if (self_trusted && !s_.trusted_at) s_.trusted_at = t;
    const Index j = nearest_trusted(id_, sets, *topo_);
    s_.source = j;
    const double s_prev = in.from(j).alpha;
    const double tau_prev = s_.tau;
    s_.tau = tau_update(tau_prev, std::abs(j - id_), s_prev, p_);
    if (self_trusted) {
      s_.x_hat = measurement_update_v2(s_.x_bar, in.y_abs(id_), p_.varpi);
      // lambda starts from tau at the switch, then follows its own recursion.
      s_.lambda = *s_.trusted_at == t ? s_.tau : lambda_update(s_.lambda, p_);
      s_.alpha = s_.lambda;
    } else {
      s_.x_hat = measurement_update_v2(s_.x_bar, estimate_based_measurement(in, id_, j), p_.varpi);
      s_.lambda = s_.tau;
      s_.alpha = s_.tau;
    }
  }

 private:
  Index id_;
  const Topology* topo_;
  BoundParams p_;
  ThresholdMode mode_;
  double beta_;
  Plant plant_;
  ObserverState s_;
};

// ------------------------------------------------------- asymptotic bounds

struct AsymptoticBounds {
  double a1 = kInf;
  double a2 = kInf;
  double a3 = kInf;
  Index j_star = 0;
  bool feasible = false;

  // Bound that applies to vehicle i given its class at the snapshot.
  double applicable(bool interior, bool self_trusted) const {
    if (interior) return a1;
    return self_trusted ? a2 : a3;
  }
};

namespace detail {

inline double static_rho_limit(Index v, const DetectionSets& sets, double beta, const Topology& topo,
                               const BoundParams& p) {
  const double k_star = beta / p.beta0();
  const auto ct = contraction(trusted_local_count(v, sets, topo), k_star, p);
  const int a = static_cast<int>(sets.attacked.size());
  const double Q = ((p.epsilon + p.mu_bar()) * ct.noise_count + std::max(0, p.b - a) * beta) / (2.0 * p.L);
  const double den = 1.0 - ct.m * p.normA;
  return den > 0.0 ? Q / den : kInf;
}

inline double adaptive_rho_limit(Index v, const DetectionSets& sets, double beta0_design, const Topology& topo,
                                 const BoundParams& p) {
  const double k0 = beta0_design / p.beta0();
  const auto ct = contraction(trusted_local_count(v, sets, topo), k0, p);
  const int a = static_cast<int>(sets.attacked.size());
  const double extra = std::max(0, p.b - a) * k0 / (2.0 * p.L);
  const double a1 = ct.m + extra;
  const double a2 = (ct.noise_count / (2.0 * p.L) + extra) * (p.epsilon + p.mu_bar());
  const double den = 1.0 - a1 * p.normA;
  return den > 0.0 ? a2 / den : kInf;
}

template <class RhoLimit>
AsymptoticBounds assemble(Index i, const DetectionSets& sets, const Topology& topo, const BoundParams& p,
                          RhoLimit rho_limit) {
  AsymptoticBounds r;
  const double den = p.varpi - (p.varpi - 1.0) * p.normA;
  r.a2 = den > 0.0 ? (p.epsilon * (p.varpi - 1.0) + p.mu) / den : kInf;
  if (topo.interior(i)) {
    r.a1 = rho_limit(i);
  } else {
    // Worst interior neighbour: any of them may serve as j_i later on.
    double worst = 0.0;
    for (Index v : topo.interior_neighbors(i)) worst = std::max(worst, rho_limit(v));
    r.a1 = worst;
    r.j_star = nearest_trusted(i, sets, topo);
  }
  const int hop = topo.interior(i) ? 0 : std::abs(r.j_star - i);
  r.a3 = den > 0.0 ? (p.epsilon * p.varpi + p.mu * hop + p.normA * std::max(r.a1, r.a2)) / den : kInf;
  r.feasible = std::isfinite(r.a1) && std::isfinite(r.a2) && std::isfinite(r.a3);
  return r;
}

}  // namespace detail

// Limits of the error bound for a static threshold, given the sets vehicle i
// held at some snapshot time.
inline AsymptoticBounds asymptotic_bounds_static(Index i, const DetectionSets& sets, double beta,
                                                 const Topology& topo, const BoundParams& p) {
  return detail::assemble(i, sets, topo, p,
                          [&](Index v) { return detail::static_rho_limit(v, sets, beta, topo, p); });
}

inline AsymptoticBounds asymptotic_bounds_adaptive(Index i, const DetectionSets& sets, double beta0_design,
                                                   const Topology& topo, const BoundParams& p) {
  return detail::assemble(i, sets, topo, p,
                          [&](Index v) { return detail::adaptive_rho_limit(v, sets, beta0_design, topo, p); });
}

}  // namespace platoon
