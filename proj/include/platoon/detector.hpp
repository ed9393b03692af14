#pragma once

#include <optional>
#include <vector>

#include "platoon/core.hpp"

namespace platoon {

// Absolute slack on the strict inequalities so rounding never produces a
// false confirmation.
inline constexpr double kDetectorSlack = 1e-12;

// Fires when sensors i-1 and i disagree beyond what noise explains.
inline bool pairwise_check(const Vec2& y_rel_i, const Vec2& y_abs_prev, const Vec2& y_abs_i, double mu) {
  return (y_rel_i + y_abs_prev - y_abs_i).norm() - kDetectorSlack > 3.0 * mu;
}

// Fires when sensor i's reading is inconsistent with the one-step prediction.
// `prediction` is A x-hat_i(t-1) plus the applied input.
inline bool innovation_check(const Vec2& y_abs_i, const Vec2& prediction, double bound_prev, double epsilon,
                             double mu, double normA) {
  return (y_abs_i - prediction).norm() - kDetectorSlack > epsilon + mu + normA * bound_prev;
}

inline double innovation_threshold(double bound_prev, double epsilon, double mu, double normA) {
  return epsilon + mu + normA * bound_prev;
}

inline std::vector<IndexSet> split_suspicious(const IndexSet& s) {
  std::vector<IndexSet> runs;
  for (Index i : s) {
    if (runs.empty() || runs.back().back() != i - 1) runs.emplace_back();
    runs.back().insert(i);
  }
  return runs;
}

// Lower bound on the attackers inside the runs: one attacker implicates at
// most itself and its two neighbours.
inline int min_attacked_count(const std::vector<IndexSet>& runs) {
  int n = 0;
  for (const auto& r : runs) n += static_cast<int>((r.size() + 2) / 3);
  return n;
}

inline bool saturation_check(int count, int b) { return count == b; }

struct DetectorInput {
  Index i = 1;
  int N = 0;
  int b = 1;
  double mu = 0.0;
  double epsilon = 0.0;
  double normA = 1.0;
  std::optional<Vec2> y_rel;      // y_{i-1,i}
  std::optional<Vec2> y_abs_prev; // y_{i-1,i-1}
  Vec2 y_abs = Vec2::Zero();      // y_{i,i}
  Vec2 prediction = Vec2::Zero();
  double bound_prev = 0.0;        // alpha_i(t-1)
};

struct DetectorFlags {
  bool pairwise = false;
  bool innovation = false;
  bool exhaustion = false;
  bool completion = false;
};

struct DetectorOutput {
  DetectionSets sets;
  DetectorFlags fired;
};

// One pass of the rule sequence over already fused sets.
inline DetectorOutput detector_step(const DetectorInput& in, DetectionSets sets) {
  DetectorOutput out;
  const Index i = in.i;
  if (i >= 2 && in.y_rel && in.y_abs_prev && !sets.attacked.contains(i) && !sets.attacked.contains(i - 1)) {
    if (pairwise_check(*in.y_rel, *in.y_abs_prev, in.y_abs, in.mu)) {
      out.fired.pairwise = true;
      if (sets.trusted.contains(i)) sets.attacked.insert(i - 1);
      else if (sets.trusted.contains(i - 1)) sets.attacked.insert(i);
      else sets.suspected |= IndexSet{i - 1, i};
    }
  }
  if (!sets.attacked.contains(i) && !sets.trusted.contains(i)) {
    if (innovation_check(in.y_abs, in.prediction, in.bound_prev, in.epsilon, in.mu, in.normA)) {
      out.fired.innovation = true;
      sets.attacked.insert(i);
    }
  }
  sets.suspected = sets.suspected - sets.attacked;
  const IndexSet all = IndexSet::range(1, in.N);
  if (saturation_check(min_attacked_count(split_suspicious(sets.suspected | sets.attacked)), in.b)) {
    out.fired.exhaustion = true;
    sets.trusted |= all - sets.suspected - sets.attacked;
  }
  if (static_cast<int>(sets.attacked.size()) == in.b) {
    out.fired.completion = true;
    sets.trusted = all - sets.attacked;
  }
  sets.suspected = sets.suspected - sets.trusted;
  out.sets = std::move(sets);
  return out;
}

}  // namespace platoon
