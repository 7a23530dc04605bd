#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "countfield/errors.hpp"

namespace countfield {

/// The indexed set of n source bins: one bin per (region, time slot).
/// Source bin j = region_index * time_slots + slot.
class SourceGrid {
 public:
  SourceGrid(std::vector<std::string> regions, int time_slots)
      : regions_(std::move(regions)), time_slots_(time_slots) {
    if (regions_.empty()) throw ValidationError("SourceGrid: no regions");
    if (time_slots_ <= 0) throw ValidationError("SourceGrid: time_slots must be positive");
    for (int r = 0; r < static_cast<int>(regions_.size()); ++r) {
      if (!region_index_.emplace(regions_[r], r).second)
        throw ValidationError("SourceGrid: duplicate region code '" + regions_[r] + "'");
    }
  }

  int num_regions() const { return static_cast<int>(regions_.size()); }
  int time_slots() const { return time_slots_; }
  int size() const { return num_regions() * time_slots_; }

  const std::vector<std::string>& regions() const { return regions_; }
  const std::string& region_code(int r) const { return regions_.at(r); }

  int region_index(const std::string& code) const {
    auto it = region_index_.find(code);
    if (it == region_index_.end())
      throw ValidationError("SourceGrid: unknown region '" + code + "'");
    return it->second;
  }

  bool has_region(const std::string& code) const {
    return region_index_.count(code) != 0;
  }

  int bin(int region, int slot) const {
    check(region, slot);
    return region * time_slots_ + slot;
  }

  std::pair<int, int> region_slot(int bin) const {
    if (bin < 0 || bin >= size()) throw ValidationError("SourceGrid: bin out of range");
    return {bin / time_slots_, bin % time_slots_};
  }

 private:
  void check(int region, int slot) const {
    if (region < 0 || region >= num_regions())
      throw ValidationError("SourceGrid: region index out of range");
    if (slot < 0 || slot >= time_slots_)
      throw ValidationError("SourceGrid: slot out of range");
  }

  std::vector<std::string> regions_;
  int time_slots_;
  std::unordered_map<std::string, int> region_index_;
};

enum class DetectorKind { precise = 1, self_declared = 2, no_location = 3 };

/// The three-kind detector layout over a source grid:
///   kind 1 (precise)       one bin per (region, slot)
///   kind 2 (self-declared) one bin per (region, slot)
///   kind 3 (no location)   one bin per slot, shared across regions
/// so m = (2 * |regions| + 1) * time_slots. Bins are laid out kind-major.
class DetectorLayout {
 public:
  explicit DetectorLayout(const SourceGrid& grid)
      : num_regions_(grid.num_regions()), time_slots_(grid.time_slots()) {}

  DetectorLayout(int num_regions, int time_slots)
      : num_regions_(num_regions), time_slots_(time_slots) {
    if (num_regions <= 0 || time_slots <= 0)
      throw ValidationError("DetectorLayout: counts must be positive");
  }

  int num_regions() const { return num_regions_; }
  int time_slots() const { return time_slots_; }
  int size() const { return (2 * num_regions_ + 1) * time_slots_; }

  int kind1_offset() const { return 0; }
  int kind2_offset() const { return num_regions_ * time_slots_; }
  int kind3_offset() const { return 2 * num_regions_ * time_slots_; }
  int kind_size(DetectorKind k) const {
    return k == DetectorKind::no_location ? time_slots_ : num_regions_ * time_slots_;
  }

  int precise_bin(int region, int slot) const {
    check(region, slot);
    return region * time_slots_ + slot;
  }
  int self_declared_bin(int region, int slot) const {
    check(region, slot);
    return kind2_offset() + region * time_slots_ + slot;
  }
  int no_location_bin(int slot) const {
    check(0, slot);
    return kind3_offset() + slot;
  }

  DetectorKind kind_of(int bin) const {
    if (bin < 0 || bin >= size()) throw ValidationError("DetectorLayout: bin out of range");
    if (bin < kind2_offset()) return DetectorKind::precise;
    if (bin < kind3_offset()) return DetectorKind::self_declared;
    return DetectorKind::no_location;
  }

  /// Region of a bin; kind-3 bins carry no region (-1).
  int region_of(int bin) const {
    switch (kind_of(bin)) {
      case DetectorKind::precise: return bin / time_slots_;
      case DetectorKind::self_declared: return (bin - kind2_offset()) / time_slots_;
      default: return -1;
    }
  }

  int slot_of(int bin) const {
    switch (kind_of(bin)) {
      case DetectorKind::precise: return bin % time_slots_;
      case DetectorKind::self_declared: return (bin - kind2_offset()) % time_slots_;
      default: return bin - kind3_offset();
    }
  }

 private:
  void check(int region, int slot) const {
    if (region < 0 || region >= num_regions_)
      throw ValidationError("DetectorLayout: region index out of range");
    if (slot < 0 || slot >= time_slots_)
      throw ValidationError("DetectorLayout: slot out of range");
  }

  int num_regions_;
  int time_slots_;
};

}  // namespace countfield
