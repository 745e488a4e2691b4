#include "btrads/volumetrics.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace btrads {

std::string_view to_string(Trend t) noexcept {
  switch (t) {
    case Trend::Improved: return "improved";
    case Trend::Stable: return "stable";
    case Trend::Worse: return "worse";
    case Trend::MajorWorse: return "major_worse";
  }
  return "stable";
}

std::optional<Trend> trend_from_string(std::string_view s) noexcept {
  for (Trend t : {Trend::Improved, Trend::Stable, Trend::Worse, Trend::MajorWorse}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

PercentChange percent_change(double baseline_ml, double followup_ml) {
  if (!std::isfinite(baseline_ml) || !std::isfinite(followup_ml) || baseline_ml < 0.0 ||
      followup_ml < 0.0) {
    throw Error(ErrorCode::InvalidVolume, "volumes must be finite and non-negative");
  }
  if (baseline_ml > 0.0) {
    return PercentChange::value(100.0 * (followup_ml - baseline_ml) / baseline_ml);
  }
  return followup_ml > 0.0 ? PercentChange::new_from_zero() : PercentChange::both_zero();
}

Trend classify_trend(const PercentChange& change, const TrendThresholds& thresholds) {
  switch (change.kind) {
    case PercentChange::Kind::BothZero: return Trend::Stable;
    case PercentChange::Kind::NewFromZero: return Trend::MajorWorse;
    case PercentChange::Kind::Value: break;
  }
  const double p = change.percent;
  if (p < -thresholds.stable_pct) return Trend::Improved;
  if (p <= thresholds.stable_pct) return Trend::Stable;
  if (p <= thresholds.major_pct) return Trend::Worse;
  return Trend::MajorWorse;
}

VolumetricChange compute_case_volumetrics(const CaseRecord& c, const TrendThresholds& thresholds) {
  if (!c.has_baseline()) throw Error(ErrorCode::DomainError, "case " + c.case_id + " has no baseline examination");
  VolumetricChange v;
  v.flair_change = percent_change(c.baseline_flair_ml, c.followup_flair_ml);
  v.enh_change = percent_change(c.baseline_enh_ml, c.followup_enh_ml);
  v.flair_trend = classify_trend(v.flair_change, thresholds);
  v.enh_trend = classify_trend(v.enh_change, thresholds);
  return v;
}

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(0, 1);
    out.push_back(field);
  }
  return out;
}

double parse_volume(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError,
                "volumetrics table line " + std::to_string(line_no) + ": bad volume '" + s + "'");
  }
}

}  // namespace

std::vector<VolumetricsRow> read_volumetrics_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "volumetrics table is empty");
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  const auto header = split(line, delim);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* name : {"exam_id", "flair_ml", "enh_ml", "qc_pass"}) {
    if (!col.count(name)) {
      throw Error(ErrorCode::ParseError, std::string("volumetrics table missing column ") + name);
    }
  }
  std::vector<VolumetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line, delim);
    if (f.size() < header.size()) {
      throw Error(ErrorCode::ParseError,
                  "volumetrics table line " + std::to_string(line_no) + ": too few fields");
    }
    VolumetricsRow r;
    r.exam_id = f[col["exam_id"]];
    r.flair_ml = parse_volume(f[col["flair_ml"]], line_no);
    r.enh_ml = parse_volume(f[col["enh_ml"]], line_no);
    const std::string& qc = f[col["qc_pass"]];
    if (qc == "true") {
      r.qc_pass = true;
    } else if (qc == "false") {
      r.qc_pass = false;
    } else {
      throw Error(ErrorCode::ParseError,
                  "volumetrics table line " + std::to_string(line_no) + ": qc_pass must be true/false");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_volumetrics_table(std::ostream& out, const std::vector<VolumetricsRow>& rows) {
  out << "exam_id\tflair_ml\tenh_ml\tqc_pass\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.exam_id << '\t';
    std::snprintf(buf, sizeof buf, "%.3f\t%.3f", r.flair_ml, r.enh_ml);
    out << buf << '\t' << (r.qc_pass ? "true" : "false") << '\n';
  }
}

std::size_t apply_volumetrics_table(std::vector<CaseRecord>& cases,
                                    const std::vector<VolumetricsRow>& rows) {
  std::unordered_map<std::string, const VolumetricsRow*> by_id;
  for (const auto& r : rows) by_id[r.exam_id] = &r;
  std::size_t applied = 0;
  for (auto& c : cases) {
    bool touched = false;
    if (auto it = by_id.find(c.case_id); it != by_id.end()) {
      c.followup_flair_ml = it->second->flair_ml;
      c.followup_enh_ml = it->second->enh_ml;
      c.qc_pass = c.qc_pass && it->second->qc_pass;
      touched = true;
    }
    if (c.baseline_exam_id) {
      if (auto it = by_id.find(*c.baseline_exam_id); it != by_id.end()) {
        c.baseline_flair_ml = it->second->flair_ml;
        c.baseline_enh_ml = it->second->enh_ml;
        c.qc_pass = c.qc_pass && it->second->qc_pass;
        touched = true;
      }
    }
    if (touched) ++applied;
  }
  return applied;
}

}  // namespace btrads
