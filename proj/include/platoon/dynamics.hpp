#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "platoon/core.hpp"

namespace platoon {

// Double-integrator transition A = [[1, T], [0, 1]] with its cached induced
// 2-norm.
class Plant {
 public:
  explicit Plant(double T) : T_(T) {
    if (!(T > 0.0)) throw ConfigError("time step T must be positive");
    A_ << 1.0, T, 0.0, 1.0;
    norm_ = (T + std::sqrt(T * T + 4.0)) / 2.0;
  }

  double step() const { return T_; }
  const Mat2& A() const { return A_; }

  // Largest singular value of A. Strictly greater than one for T > 0.
  double norm() const { return norm_; }

  Vec2 input(double u) const { return Vec2(0.0, T_ * u); }

  // x(t+1) = A x(t) + [0, T u] + d
  Vec2 advance(const Vec2& x, double u, const Vec2& d) const { return A_ * x + input(u) + d; }

 private:
  double T_;
  Mat2 A_;
  double norm_;
};

inline Vec2 step_vehicle(const Vec2& x, double u, const Vec2& d, double T) {
  return Plant(T).advance(x, u, d);
}

inline Vec2 reference_step(const Vec2& x0, double T) { return Plant(T).A() * x0; }

// x_1* = x_0 and x_i* = x_{i-1}* - dx_{i-1,i}. `offsets[k]` holds dx_{k+1,k+2}.
inline std::vector<Vec2> desired_state_chain(const Vec2& x0, const std::vector<Vec2>& offsets,
                                             std::size_t vehicles) {
  if (vehicles == 0 || offsets.size() + 1 != vehicles) {
    throw std::invalid_argument("desired_state_chain: need N-1 offsets for N vehicles");
  }
  std::vector<Vec2> out;
  out.reserve(vehicles);
  out.push_back(x0);
  for (const auto& dx : offsets) out.push_back(out.back() - dx);
  return out;
}

// Reference state, desired offsets and the resulting formation, all advanced
// by A each step.
class Formation {
 public:
  Formation(const Plant& plant, Vec2 x0, std::vector<Vec2> offsets)
      : plant_(&plant), x0_(std::move(x0)), offsets_(std::move(offsets)) {}

  const Vec2& reference() const { return x0_; }
  const std::vector<Vec2>& offsets() const { return offsets_; }

  std::vector<Vec2> desired() const { return desired_state_chain(x0_, offsets_, offsets_.size() + 1); }

  void advance() {
    x0_ = plant_->A() * x0_;
    for (auto& dx : offsets_) dx = plant_->A() * dx;
  }

 private:
  const Plant* plant_;
  Vec2 x0_;
  std::vector<Vec2> offsets_;
};

}  // namespace platoon
