#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "countfield/counts.hpp"
#include "countfield/csv.hpp"
#include "countfield/errors.hpp"
#include "countfield/grid.hpp"

namespace countfield {

struct EventRecord {
  std::string timestamp;  // ISO-8601 UTC, e.g. 2012-01-09T14:30:00Z
  DetectorKind kind = DetectorKind::no_location;
  std::string region;  // empty iff kind == no_location
  bool is_target = false;
};

struct UtcTime {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
};

/// Strict ISO-8601 parser for the form YYYY-MM-DDTHH:MM:SSZ.
inline UtcTime parse_iso8601_utc(const std::string& s) {
  auto fail = [&] { throw ValidationError("bad timestamp: " + s); };
  if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
      s[16] != ':' || s[19] != 'Z')
    fail();
  auto num = [&](int lo, int hi) {
    int v = 0;
    for (int i = lo; i < hi; ++i) {
      if (s[i] < '0' || s[i] > '9') fail();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  UtcTime t;
  t.year = num(0, 4);
  t.month = num(5, 7);
  t.day = num(8, 10);
  t.hour = num(11, 13);
  t.minute = num(14, 16);
  t.second = num(17, 19);
  if (t.month < 1 || t.month > 12 || t.hour > 23 || t.minute > 59 || t.second > 59) fail();
  static constexpr int days_in[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (t.year % 4 == 0 && t.year % 100 != 0) || t.year % 400 == 0;
  const int dmax = (t.month == 2 && leap) ? 29 : days_in[t.month - 1];
  if (t.day < 1 || t.day > dmax) fail();
  return t;
}

/// Maps a wall-clock instant to a slot by hour of day after shifting into the
/// configured timezone. Slots must divide the day evenly.
struct SlotMapping {
  int time_slots = 24;
  int timezone_offset_minutes = 0;

  void validate() const {
    if (time_slots <= 0 || time_slots > 1440 || 1440 % time_slots != 0)
      throw ValidationError("SlotMapping: time_slots must divide a 1440-minute day");
    if (timezone_offset_minutes <= -1440 || timezone_offset_minutes >= 1440)
      throw ValidationError("SlotMapping: timezone offset must be within one day");
  }

  int slot_of(const UtcTime& t) const {
    const int local = ((t.hour * 60 + t.minute + timezone_offset_minutes) % 1440 + 1440) % 1440;
    return local / (1440 / time_slots);
  }
};

enum class BinFilter { target, population };

struct RejectedLine {
  std::int64_t line = 0;  // 1-based position in the input
  std::string reason;
};

struct BinReport {
  std::int64_t input_records = 0;
  std::int64_t accepted = 0;  // parsed and valid (binned or filtered out)
  std::int64_t binned = 0;
  std::int64_t filtered_out = 0;
  std::int64_t rejected = 0;
  std::vector<RejectedLine> rejections;
};

inline EventRecord parse_event_fields(const std::vector<std::string>& fields) {
  if (fields.size() != 4)
    throw ValidationError("expected 4 fields (timestamp,kind,region,is_target)");
  EventRecord rec;
  rec.timestamp = fields[0];
  if (fields[1] == "1") rec.kind = DetectorKind::precise;
  else if (fields[1] == "2") rec.kind = DetectorKind::self_declared;
  else if (fields[1] == "3") rec.kind = DetectorKind::no_location;
  else throw ValidationError("kind must be 1, 2 or 3, got '" + fields[1] + "'");
  rec.region = fields[2];
  if (rec.kind == DetectorKind::no_location) {
    if (!rec.region.empty())
      throw ValidationError("region must be empty when kind is 3");
  } else if (rec.region.empty()) {
    throw ValidationError("region required when kind is 1 or 2");
  }
  if (fields[3] == "1") rec.is_target = true;
  else if (fields[3] == "0") rec.is_target = false;
  else throw ValidationError("is_target must be 0 or 1, got '" + fields[3] + "'");
  return rec;
}

/// Optional correction for systematic over-collection of no-location events:
/// multiplies every kind-3 count by the given factor, rounding to nearest.
inline void apply_kind3_scale(CountVector& counts, double scale) {
  if (!(scale > 0.0)) throw ValidationError("apply_kind3_scale: scale must be positive");
  if (scale == 1.0) return;
  const DetectorLayout& layout = counts.layout();
  for (int i = layout.kind3_offset(); i < layout.size(); ++i)
    counts[i] = std::llround(static_cast<double>(counts[i]) * scale);
}

/// Streams event CSV lines (timestamp,kind,region,is_target; a header line
/// is recognized and skipped) into detector-bin counts. With the target
/// filter, target records of every kind are binned; with the population
/// filter, all records are considered but only precise ones are retained.
/// Malformed lines are reported with their position, never silently dropped.
inline std::pair<CountVector, BinReport> bin_events(std::istream& in,
                                                    const SourceGrid& grid,
                                                    const DetectorLayout& layout,
                                                    const SlotMapping& mapping,
                                                    BinFilter filter) {
  mapping.validate();
  if (layout.time_slots() != mapping.time_slots ||
      layout.num_regions() != grid.num_regions() ||
      layout.time_slots() != grid.time_slots())
    throw DimensionError("bin_events: grid, layout and slot mapping disagree");

  CountVector counts = CountVector::zeros(layout);
  BinReport report;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = csv::trim(line);
    if (stripped.empty()) continue;
    if (line_no == 1 && stripped.rfind("timestamp", 0) == 0) continue;
    ++report.input_records;
    try {
      const EventRecord rec = parse_event_fields(csv::split(stripped));
      const UtcTime t = parse_iso8601_utc(rec.timestamp);
      const int slot = mapping.slot_of(t);

      bool keep;
      if (filter == BinFilter::target) keep = rec.is_target;
      else keep = rec.kind == DetectorKind::precise;

      int bin = -1;
      if (keep) {
        switch (rec.kind) {
          case DetectorKind::precise:
            bin = layout.precise_bin(grid.region_index(rec.region), slot);
            break;
          case DetectorKind::self_declared:
            bin = layout.self_declared_bin(grid.region_index(rec.region), slot);
            break;
          case DetectorKind::no_location:
            bin = layout.no_location_bin(slot);
            break;
        }
      } else if (!rec.region.empty()) {
        grid.region_index(rec.region);  // still validate the region code
      }

      ++report.accepted;
      if (keep) {
        ++counts[bin];
        ++report.binned;
      } else {
        ++report.filtered_out;
      }
    } catch (const ValidationError& e) {
      ++report.rejected;
      report.rejections.push_back({line_no, e.what()});
    }
  }
  return {std::move(counts), report};
}

}  // namespace countfield
