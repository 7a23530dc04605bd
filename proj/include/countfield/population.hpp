#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <vector>

#include "countfield/errors.hpp"

namespace countfield {

/// Log population intensity psi_j = log(g_j) over source bins, estimated from
/// the kind-1 overall counts z. Empty bins are floored before the log so psi
/// stays finite.
class PopulationField {
 public:
  static PopulationField from_counts(const std::vector<std::int64_t>& z1,
                                     double floor = 0.5) {
    if (floor <= 0.0) throw ValidationError("PopulationField: floor must be positive");
    PopulationField p;
    p.floor_ = floor;
    p.raw_counts_ = z1;
    p.psi_.resize(static_cast<int>(z1.size()));
    for (int j = 0; j < p.psi_.size(); ++j) {
      if (z1[j] < 0) throw ValidationError("PopulationField: negative count");
      double g = static_cast<double>(z1[j]);
      if (g < floor) {
        g = floor;
        ++p.floored_bins_;
      }
      p.psi_[j] = std::log(g);
    }
    return p;
  }

  /// psi given directly (all entries must be finite).
  static PopulationField from_log_intensity(Eigen::VectorXd psi) {
    for (int j = 0; j < psi.size(); ++j)
      if (!std::isfinite(psi[j]))
        throw ValidationError("PopulationField: non-finite psi");
    PopulationField p;
    p.psi_ = std::move(psi);
    return p;
  }

  const Eigen::VectorXd& psi() const { return psi_; }
  Eigen::VectorXd g() const { return psi_.array().exp().matrix(); }
  int size() const { return static_cast<int>(psi_.size()); }

  // provenance
  const std::vector<std::int64_t>& raw_counts() const { return raw_counts_; }
  double floor() const { return floor_; }
  int floored_bins() const { return floored_bins_; }

 private:
  PopulationField() = default;

  Eigen::VectorXd psi_;
  std::vector<std::int64_t> raw_counts_;
  double floor_ = 0.0;
  int floored_bins_ = 0;
};

}  // namespace countfield
