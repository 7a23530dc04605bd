#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <numeric>
#include <vector>

#include "countfield/errors.hpp"
#include "countfield/grid.hpp"

namespace countfield {

/// Observed event counts over the detector bins of a three-kind layout.
class CountVector {
 public:
  CountVector(DetectorLayout layout, std::vector<std::int64_t> counts)
      : layout_(layout), counts_(std::move(counts)) {
    if (static_cast<int>(counts_.size()) != layout_.size())
      throw DimensionError("CountVector: counts length does not match layout");
    for (auto c : counts_)
      if (c < 0) throw ValidationError("CountVector: negative count");
  }

  static CountVector zeros(DetectorLayout layout) {
    return CountVector(layout, std::vector<std::int64_t>(layout.size(), 0));
  }

  const DetectorLayout& layout() const { return layout_; }
  int size() const { return static_cast<int>(counts_.size()); }

  std::int64_t operator[](int i) const { return counts_[i]; }
  std::int64_t& operator[](int i) { return counts_[i]; }
  const std::vector<std::int64_t>& raw() const { return counts_; }

  std::int64_t total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
  }

  std::int64_t kind_total(DetectorKind k) const {
    auto [lo, hi] = kind_range(k);
    return std::accumulate(counts_.begin() + lo, counts_.begin() + hi, std::int64_t{0});
  }

  /// Kind sub-vector, aligned to the layout's per-kind bin order.
  std::vector<std::int64_t> kind_counts(DetectorKind k) const {
    auto [lo, hi] = kind_range(k);
    return std::vector<std::int64_t>(counts_.begin() + lo, counts_.begin() + hi);
  }

  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(size());
    for (int i = 0; i < size(); ++i) v[i] = static_cast<double>(counts_[i]);
    return v;
  }

  Eigen::VectorXd kind_as_vector(DetectorKind k) const {
    auto [lo, hi] = kind_range(k);
    Eigen::VectorXd v(hi - lo);
    for (int i = lo; i < hi; ++i) v[i - lo] = static_cast<double>(counts_[i]);
    return v;
  }

 private:
  std::pair<int, int> kind_range(DetectorKind k) const {
    switch (k) {
      case DetectorKind::precise:
        return {layout_.kind1_offset(), layout_.kind2_offset()};
      case DetectorKind::self_declared:
        return {layout_.kind2_offset(), layout_.kind3_offset()};
      default:
        return {layout_.kind3_offset(), layout_.size()};
    }
  }

  DetectorLayout layout_;
  std::vector<std::int64_t> counts_;
};

}  // namespace countfield
