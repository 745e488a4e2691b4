#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "btrads/core.hpp"

namespace btrads {

/// Percent change between two compartment volumes. A zero baseline has no
/// defined ratio and is carried as one of two explicit states instead.
struct PercentChange {
  enum class Kind { Value, NewFromZero, BothZero };

  Kind kind = Kind::BothZero;
  double percent = 0.0;  // meaningful only for Kind::Value

  static PercentChange value(double p) { return {Kind::Value, p}; }
  static PercentChange new_from_zero() { return {Kind::NewFromZero, 0.0}; }
  static PercentChange both_zero() { return {Kind::BothZero, 0.0}; }

  bool is_value() const noexcept { return kind == Kind::Value; }
  bool operator==(const PercentChange&) const = default;
};

enum class Trend { Improved, Stable, Worse, MajorWorse };

std::string_view to_string(Trend t) noexcept;
std::optional<Trend> trend_from_string(std::string_view s) noexcept;

inline bool is_worsening(Trend t) noexcept { return t == Trend::Worse || t == Trend::MajorWorse; }

struct TrendThresholds {
  double stable_pct = 20.0;  // |p| <= stable_pct is Stable
  double major_pct = 40.0;   // p > major_pct is MajorWorse
};

struct VolumetricChange {
  PercentChange flair_change;
  PercentChange enh_change;
  Trend flair_trend = Trend::Stable;
  Trend enh_trend = Trend::Stable;

  bool operator==(const VolumetricChange&) const = default;
};

/// Throws Error(InvalidVolume) for negative or non-finite input.
PercentChange percent_change(double baseline_ml, double followup_ml);

Trend classify_trend(const PercentChange& change, const TrendThresholds& thresholds = {});

/// Throws Error(DomainError) without a baseline; propagates InvalidVolume.
VolumetricChange compute_case_volumetrics(const CaseRecord& c,
                                          const TrendThresholds& thresholds = {});

// Standalone volumetrics table (delimited text: exam_id, flair_ml, enh_ml, qc_pass).

struct VolumetricsRow {
  std::string exam_id;
  double flair_ml = 0.0;
  double enh_ml = 0.0;
  bool qc_pass = true;
};

/// Tab- or comma-delimited, header row required. Throws Error(ParseError).
std::vector<VolumetricsRow> read_volumetrics_table(std::istream& in);
void write_volumetrics_table(std::ostream& out, const std::vector<VolumetricsRow>& rows);

/// Fills follow-up volumes from the row keyed by case_id and baseline volumes
/// from the row keyed by baseline_exam_id. Any referenced row with
/// qc_pass=false marks the case qc_pass=false. Returns the number of cases
/// that received table values.
std::size_t apply_volumetrics_table(std::vector<CaseRecord>& cases,
                                    const std::vector<VolumetricsRow>& rows);

}  // namespace btrads
