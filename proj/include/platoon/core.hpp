#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace platoon {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Vehicle / sensor label, 1-based.
using Index = int;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when fused detection data contradicts itself (a sensor both trusted
// and confirmed attacked). The run must be aborted.
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sorted, duplicate-free collection of sensor labels.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::initializer_list<Index> items) : items_(items) { normalize(); }
  explicit IndexSet(std::vector<Index> items) : items_(std::move(items)) { normalize(); }

  // {first, ..., last}; empty when last < first.
  static IndexSet range(Index first, Index last) {
    IndexSet s;
    for (Index i = first; i <= last; ++i) s.items_.push_back(i);
    return s;
  }

  bool contains(Index i) const { return std::binary_search(items_.begin(), items_.end(), i); }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  Index front() const { return items_.front(); }
  Index back() const { return items_.back(); }
  const std::vector<Index>& items() const { return items_; }

  void insert(Index i) {
    auto it = std::lower_bound(items_.begin(), items_.end(), i);
    if (it == items_.end() || *it != i) items_.insert(it, i);
  }
  void erase(Index i) {
    auto it = std::lower_bound(items_.begin(), items_.end(), i);
    if (it != items_.end() && *it == i) items_.erase(it);
  }

  IndexSet& operator|=(const IndexSet& o) {
    std::vector<Index> out;
    out.reserve(items_.size() + o.items_.size());
    std::set_union(items_.begin(), items_.end(), o.items_.begin(), o.items_.end(),
                   std::back_inserter(out));
    items_ = std::move(out);
    return *this;
  }
  friend IndexSet operator|(IndexSet a, const IndexSet& b) { return a |= b; }

  friend IndexSet operator&(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.items_));
    return out;
  }
  friend IndexSet operator-(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.items_));
    return out;
  }

  bool includes(const IndexSet& sub) const {
    return std::includes(items_.begin(), items_.end(), sub.begin(), sub.end());
  }
  bool disjoint(const IndexSet& o) const { return (*this & o).empty(); }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

  // "1;2;4" - the CSV cell encoding used by the trace writers.
  std::string to_string(char sep = ';') const {
    std::ostringstream os;
    for (std::size_t k = 0; k < items_.size(); ++k) {
      if (k) os << sep;
      os << items_[k];
    }
    return os.str();
  }

 private:
  void normalize() {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  }

  std::vector<Index> items_;
};

// Per-vehicle classification of the N absolute sensors.
struct DetectionSets {
  IndexSet trusted;    // surely attack-free
  IndexSet attacked;   // surely attacked
  IndexSet suspected;  // possibly attacked

  friend bool operator==(const DetectionSets&, const DetectionSets&) = default;

  bool consistent() const { return trusted.disjoint(attacked) && trusted.disjoint(suspected); }
};

// V1 = {L+1, ..., N-L}: vehicles with a full 2L-neighbourhood. V2 is the rest.
inline std::pair<IndexSet, IndexSet> partition_vehicles(int N, int L) {
  if (N < 3) throw ConfigError("vehicle count N must be at least 3");
  if (L < 1) throw ConfigError("neighbor range L must be at least 1");
  if (2 * L >= N) throw ConfigError("2L >= N leaves no interior vehicle (V1 empty)");
  IndexSet v1 = IndexSet::range(L + 1, N - L);
  IndexSet v2 = IndexSet::range(1, N) - v1;
  return {v1, v2};
}

// Communication neighbours of vehicle i. The tail case is capped at N so the
// graph stays symmetric.
inline IndexSet neighbor_set(Index i, int N, int L) {
  if (i < 1 || i > N) throw std::out_of_range("vehicle index out of range");
  IndexSet s = IndexSet::range(std::max(1, i - L), std::min(N, i + L));
  s.erase(i);
  return s;
}

class Topology {
 public:
  Topology(int N, int L) : N_(N), L_(L) {
    std::tie(v1_, v2_) = partition_vehicles(N, L);
    neighbors_.reserve(static_cast<std::size_t>(N));
    for (Index i = 1; i <= N; ++i) neighbors_.push_back(neighbor_set(i, N, L));
  }

  int size() const { return N_; }
  int range() const { return L_; }
  const IndexSet& v1() const { return v1_; }
  const IndexSet& v2() const { return v2_; }
  bool interior(Index i) const { return v1_.contains(i); }
  const IndexSet& neighbors(Index i) const { return neighbors_.at(static_cast<std::size_t>(i - 1)); }

  IndexSet closed_neighborhood(Index i) const {
    IndexSet s = neighbors(i);
    s.insert(i);
    return s;
  }

  // Interior neighbours of i (the estimate-based reconstruction sources).
  IndexSet interior_neighbors(Index i) const { return neighbors(i) & v1_; }

  IndexSet all() const { return IndexSet::range(1, N_); }

  // Hop distance on the communication graph: ceil(|i-j| / L).
  int distance(Index i, Index j) const { return (std::abs(i - j) + L_ - 1) / L_; }
  int diameter() const { return distance(1, N_); }

 private:
  int N_;
  int L_;
  IndexSet v1_;
  IndexSet v2_;
  std::vector<IndexSet> neighbors_;
};

// Union of own and received sets. A confirmed-attacked label is dropped from
// the suspected set. Throws ConsistencyError if any input trusts a sensor that
// another input has confirmed attacked.
inline DetectionSets fuse_sets(const DetectionSets& own, const std::vector<DetectionSets>& received) {
  DetectionSets out = own;
  for (const auto& r : received) {
    out.trusted |= r.trusted;
    out.attacked |= r.attacked;
    out.suspected |= r.suspected;
  }
  if (!out.trusted.disjoint(out.attacked)) {
    throw ConsistencyError("fused detection sets trust a confirmed-attacked sensor: " +
                           (out.trusted & out.attacked).to_string(','));
  }
  out.suspected = out.suspected - out.attacked;
  out.suspected = out.suspected - out.trusted;
  return out;
}

// Broadcast M_i(t). Stamped with the step it was produced at so consumers can
// assert causality.
struct Message {
  Index sender = 0;
  long stamp = 0;
  std::optional<Vec2> y_rel;  // y_{i-1,i}; absent for the leader
  Vec2 y_abs = Vec2::Zero();  // y_{i,i}
  Vec2 x_bar = Vec2::Zero();  // prediction of x_i at this step
  DetectionSets sets;         // sets from the previous step
  double alpha = 0.0;         // error bound from the previous step
};

}  // namespace platoon
