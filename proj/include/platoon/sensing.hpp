#pragma once

#include <cstdlib>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "platoon/config.hpp"
#include "platoon/core.hpp"
#include "platoon/rng.hpp"

namespace platoon {

// One step of sensor outputs. Index 1..N; slot 0 is unused. rel[j] holds the
// secured relative measurement y_{j-1,j}, so rel[1] is unused as well.
struct MeasurementFrame {
  std::vector<Vec2> abs;
  std::vector<Vec2> rel;
  std::vector<Vec2> attack;  // a_i as actually injected

  MeasurementFrame() = default;
  explicit MeasurementFrame(int N)
      : abs(static_cast<std::size_t>(N + 1), Vec2::Zero()),
        rel(static_cast<std::size_t>(N + 1), Vec2::Zero()),
        attack(static_cast<std::size_t>(N + 1), Vec2::Zero()) {}

  int size() const { return static_cast<int>(abs.size()) - 1; }
  const Vec2& y_abs(Index i) const { return abs.at(static_cast<std::size_t>(i)); }
  const Vec2& y_rel(Index j) const {
    if (j < 2) throw std::out_of_range("relative measurement y_{j-1,j} needs j >= 2");
    return rel.at(static_cast<std::size_t>(j));
  }
};

// a = w .* x, with w drawn per component.
inline Vec2 random_attack(const Vec2& x, const Vec2& w, double scale = 1.0) {
  return scale * w.cwiseProduct(x);
}

// Produces attacked absolute measurements. Holds the per-sensor history needed
// by the DoS and replay kinds.
class AttackInjector {
 public:
  AttackInjector() = default;
  explicit AttackInjector(AttackSpec spec) : spec_(std::move(spec)) {}

  const AttackSpec& spec() const { return spec_; }
  bool active(Index i, long t) const { return spec_.set.contains(i) && t >= spec_.start; }

  // Returns y_{i,i}(t) given the clean reading x + n. Must be called once per
  // attacked sensor per step, in increasing t.
  Vec2 apply(Index i, long t, const Vec2& x, const Vec2& clean, const CounterRng& rng) {
    if (!spec_.set.contains(i)) return clean;
    auto& h = history_[i];
    Vec2 y = clean;
    if (t >= spec_.start) {
      switch (spec_.kind) {
        case AttackKind::random: {
          const Vec2 w(rng.normal(t, i, Stream::attack, 0), rng.normal(t, i, Stream::attack, 1));
          y = clean + random_attack(x, w, spec_.scale);
          break;
        }
        case AttackKind::bias:
          y = clean + spec_.offset;
          break;
        case AttackKind::dos:
          if (!h.frozen) h.frozen = h.clean.empty() ? clean : h.clean.rbegin()->second;
          y = *h.frozen;
          break;
        case AttackKind::replay: {
          auto it = h.clean.find(t - spec_.record_len);
          if (it != h.clean.end()) y = it->second;
          break;
        }
      }
    }
    h.clean[t] = clean;
    return y;
  }

 private:
  struct History {
    std::map<long, Vec2> clean;
    std::optional<Vec2> frozen;
  };
  AttackSpec spec_;
  std::map<Index, History> history_;
};

// Samples every absolute and relative sensor for states xs (index 1..N, slot 0
// unused).
inline MeasurementFrame measure(const std::vector<Vec2>& xs, long t, double mu, AttackInjector& attacks,
                                const CounterRng& rng) {
  const int N = static_cast<int>(xs.size()) - 1;
  MeasurementFrame f(N);
  for (Index i = 1; i <= N; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Vec2 clean = xs[k] + rng.bounded_noise(mu, t, i, Stream::sensor_abs);
    f.abs[k] = attacks.apply(i, t, xs[k], clean, rng);
    f.attack[k] = f.abs[k] - clean;
    if (i >= 2) f.rel[k] = xs[k] - xs[k - 1] + rng.bounded_noise(mu, t, i, Stream::sensor_rel);
  }
  return f;
}

// Sum of y_{m-1,m} for m = lo+1..hi, i.e. the measured x_hi - x_lo.
template <class Source>
Vec2 relative_chain(const Source& src, Index lo, Index hi) {
  Vec2 s = Vec2::Zero();
  for (Index m = lo + 1; m <= hi; ++m) s += src.y_rel(m);
  return s;
}

// y_{i|j}: vehicle i's absolute measurement as seen through sensor j.
template <class Source>
Vec2 reconstruct_absolute(const Source& src, Index i, Index j, int L) {
  if (std::abs(i - j) > L) throw std::out_of_range("reconstruct_absolute: j outside the neighbourhood of i");
  if (i == j) return src.y_abs(i);
  if (i > j) return src.y_abs(j) + relative_chain(src, j, i);
  return src.y_abs(j) - relative_chain(src, i, j);
}

struct StackedMeasurement {
  Eigen::VectorXd z;           // 2(2L+1) entries
  std::vector<Index> origin;   // m_1..m_{2L+1}: sensor behind each block
};

// z_i = (y_{i|i-L}, ..., y_{i|i+L}) for an interior vehicle.
template <class Source>
StackedMeasurement stack_measurements(const Source& src, Index i, const Topology& topo) {
  if (!topo.interior(i)) throw std::invalid_argument("stack_measurements: vehicle is not interior");
  const int L = topo.range();
  StackedMeasurement out;
  out.z.resize(2 * (2 * L + 1));
  int k = 0;
  for (Index j = i - L; j <= i + L; ++j, ++k) {
    out.z.segment<2>(2 * k) = reconstruct_absolute(src, i, j, L);
    out.origin.push_back(j);
  }
  return out;
}

// y-hat_{i|j}: vehicle i's state through neighbour j's prediction x-bar_j.
template <class Source>
Vec2 estimate_based_measurement(const Source& src, Index i, Index j) {
  if (j > i) return src.x_bar(j) - relative_chain(src, i, j);
  if (j < i) return src.x_bar(j) + relative_chain(src, j, i);
  return src.x_bar(j);
}

// Read-only view over the messages a vehicle received at one step. Only the
// closed neighbourhood is accessible and every message must carry the
// expected stamp.
class Inbox {
 public:
  Inbox(Index owner, long stamp, const Topology& topo, const std::vector<Message>& messages)
      : owner_(owner), stamp_(stamp), topo_(&topo), messages_(&messages) {}

  Index owner() const { return owner_; }

  const Message& from(Index j) const {
    if (j != owner_ && !topo_->neighbors(owner_).contains(j)) {
      throw std::logic_error("vehicle " + std::to_string(owner_) + " has no link to " + std::to_string(j));
    }
    const Message& m = messages_->at(static_cast<std::size_t>(j));
    if (m.sender != j || m.stamp != stamp_) throw std::logic_error("message consumed out of step");
    return m;
  }

  const Vec2& y_abs(Index j) const { return from(j).y_abs; }
  const Vec2& y_rel(Index j) const {
    const auto& r = from(j).y_rel;
    if (!r) throw std::out_of_range("message carries no relative measurement");
    return *r;
  }
  const Vec2& x_bar(Index j) const { return from(j).x_bar; }

 private:
  Index owner_;
  long stamp_;
  const Topology* topo_;
  const std::vector<Message>* messages_;
};

}  // namespace platoon
