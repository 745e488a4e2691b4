#pragma once

// Synthetic reference cohort of 509 cases. 17 are excluded by eligibility
// (9 without a baseline, 8 QC failures) and the
// remaining 492 carry reference labels, initial reads and adjudications.
// Each case is built so the pattern extractor and scorer land on a designed
// category; the generator checks this for every case and throws
// std::logic_error if it does not hold.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "btrads/core.hpp"
#include "btrads/volumetrics.hpp"
#include "json.hpp"

namespace btrads {

struct FixtureSet {
  std::vector<CaseRecord> cases;
  std::vector<VolumetricsRow> volumetrics;
  nlohmann::json config;
  /// Designed system category per case (aligned with `cases`); absent for
  /// cases that eligibility excludes.
  std::vector<std::optional<Category>> designed_prediction;
};

inline constexpr std::uint64_t kReferenceCohortSeed = 509;

/// Deterministic for a given seed.
FixtureSet generate_reference_cohort(std::uint64_t seed = kReferenceCohortSeed);

/// Writes cases.jsonl, volumetrics.tsv and config.json into dir (created if
/// needed). Throws Error(IoError).
void write_fixture_set(const FixtureSet& set, const std::filesystem::path& dir);

}  // namespace btrads
