#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <span>

#include "btrads/extractor.hpp"

namespace btrads {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Abbreviations whose trailing period does not end a sentence.
bool is_abbreviation(std::string_view text, std::size_t dot) {
  static constexpr std::array<std::string_view, 17> kAbbrev = {
      "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
      "oct", "nov", "dec", "dr",  "mr",  "ms",  "mrs", "approx"};
  std::size_t b = dot;
  while (b > 0 && std::isalpha(static_cast<unsigned char>(text[b - 1]))) --b;
  const std::string word = lower(text.substr(b, dot - b));
  return std::find(kAbbrev.begin(), kAbbrev.end(), word) != kAbbrev.end();
}

/// Positions of whole-word occurrences of `term` in lowercase text.
std::vector<std::size_t> find_words(const std::string& text, std::string_view term) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while ((pos = text.find(term, pos)) != std::string::npos) {
    const bool left = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + term.size();
    const bool right = end >= text.size() || !is_word_char(text[end]);
    if (left && right) out.push_back(pos);
    pos += 1;
  }
  return out;
}

std::optional<std::size_t> first_word(const std::string& text,
                                      std::span<const std::string_view> terms) {
  std::optional<std::size_t> best;
  for (auto t : terms) {
    auto hits = find_words(text, t);
    if (!hits.empty() && (!best || hits.front() < *best)) best = hits.front();
  }
  return best;
}

constexpr std::string_view kSteroidTerms[] = {
    "dexamethasone", "decadron", "dex",          "prednisone",      "prednisolone",
    "methylprednisolone", "hydrocortisone", "steroid", "steroids", "corticosteroid",
    "corticosteroids"};

constexpr std::string_view kBevacizumabTerms[] = {
    "bevacizumab", "avastin", "mvasi", "zirabev", "bev"};

constexpr std::string_view kRadiationTerms[] = {
    "radiation", "radiotherapy", "chemoradiation", "chemoradiotherapy", "chemort",
    "rt",        "xrt",          "imrt",           "proton"};

constexpr std::string_view kActiveCues[] = {
    "continues", "continue", "continued", "continuing", "on",      "taking",
    "takes",     "receiving", "receives", "started",    "starting", "restarted",
    "resumed",   "currently", "remains",  "maintained", "ongoing",  "increased",
    "initiated"};

constexpr std::string_view kRecentCues[] = {
    "tapered", "taper",    "tapering", "weaned",  "weaning", "discontinued", "discontinue",
    "stopped", "held",     "holding",  "hold",    "off",     "completed",    "finished",
    "ceased",  "no longer"};

constexpr std::string_view kNegationCues[] = {
    "no", "not", "never", "denies", "without", "none"};

struct Cue {
  std::size_t pos;
  MedicationStatus status;
};

std::vector<Cue> collect_cues(const std::string& s) {
  std::vector<Cue> cues;
  for (auto t : kActiveCues) {
    for (auto p : find_words(s, t)) cues.push_back({p, MedicationStatus::Active});
  }
  for (auto t : kRecentCues) {
    for (auto p : find_words(s, t)) cues.push_back({p, MedicationStatus::Recent});
  }
  std::sort(cues.begin(), cues.end(), [](const Cue& a, const Cue& b) { return a.pos < b.pos; });
  return cues;
}

bool negated_before(const std::string& s, std::size_t drug_pos) {
  for (auto t : kNegationCues) {
    for (auto p : find_words(s, t)) {
      if (p >= drug_pos) continue;
      if (t == "no" && s.compare(p, 9, "no longer") == 0) continue;
      return true;
    }
  }
  return false;
}

MedicationStatus sentence_status(const std::string& s, std::size_t drug_pos) {
  const auto cues = collect_cues(s);
  const bool any_recent = std::any_of(cues.begin(), cues.end(), [](const Cue& c) {
    return c.status == MedicationStatus::Recent;
  });
  if (negated_before(s, drug_pos)) {
    return any_recent ? MedicationStatus::Recent : MedicationStatus::None;
  }
  if (cues.empty()) return MedicationStatus::Active;
  return cues.back().status;
}

struct Sentence {
  std::size_t start;
  std::size_t end;
  std::string lowered;
};

void resolve_medication(std::string_view note, const std::vector<Sentence>& sentences,
                        std::span<const std::string_view> terms, Variable variable,
                        MedicationStatus& status_out, ClinicalVariables& vars) {
  std::optional<MedicationStatus> last;
  const Sentence* last_sentence = nullptr;
  bool conflict = false;
  for (const auto& sent : sentences) {
    auto drug = first_word(sent.lowered, terms);
    if (!drug) continue;
    const MedicationStatus s = sentence_status(sent.lowered, *drug);
    if (last && *last != s) conflict = true;
    last = s;
    last_sentence = &sent;
  }
  if (!last) return;
  status_out = *last;
  vars.evidence_for(variable) = EvidenceSpan{
      last_sentence->start, last_sentence->end,
      std::string(note.substr(last_sentence->start, last_sentence->end - last_sentence->start))};
  if (conflict) vars.conflicting_cues.push_back(variable);
}

int month_from_name(const std::string& name) {
  static constexpr std::array<std::string_view, 12> kMonths = {
      "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"};
  const std::string l = lower(name);
  for (std::size_t i = 0; i < kMonths.size(); ++i) {
    if (l.rfind(kMonths[i], 0) == 0) return static_cast<int>(i) + 1;
  }
  return 0;
}

std::optional<Date> first_date_in(std::string_view sentence) {
  static const std::regex kIso(R"((?:^|[^\d])(\d{4})-(\d{2})-(\d{2})(?![\d]))");
  static const std::regex kMonthName(
      R"(\b(January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec)\.?\s+(\d{1,2}),?\s+(\d{4})(?![\d]))",
      std::regex::icase);
  static const std::regex kSlash(R"((?:^|[^\d/])(\d{1,2})/(\d{1,2})/(\d{4})(?![\d/]))");

  struct Hit {
    std::ptrdiff_t pos;
    Date date;
  };
  std::optional<Hit> best;
  const std::string s(sentence);
  auto consider = [&](const std::regex& re, auto&& make) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
      if (auto d = make(*it)) {
        const auto pos = it->position(1);
        if (!best || pos < best->pos) best = Hit{pos, *d};
        break;
      }
    }
  };
  consider(kIso, [](const std::smatch& m) {
    return Date::from_ymd(std::stoi(m[1]), static_cast<unsigned>(std::stoi(m[2])),
                          static_cast<unsigned>(std::stoi(m[3])));
  });
  consider(kMonthName, [](const std::smatch& m) {
    return Date::from_ymd(std::stoi(m[3]), static_cast<unsigned>(month_from_name(m[1])),
                          static_cast<unsigned>(std::stoi(m[2])));
  });
  consider(kSlash, [](const std::smatch& m) {
    return Date::from_ymd(std::stoi(m[3]), static_cast<unsigned>(std::stoi(m[1])),
                          static_cast<unsigned>(std::stoi(m[2])));
  });
  if (!best) return std::nullopt;
  return best->date;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> split_sentences(std::string_view note) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  auto push = [&](std::size_t b, std::size_t e) {
    while (b < e && std::isspace(static_cast<unsigned char>(note[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(note[e - 1]))) --e;
    if (b < e) out.emplace_back(b, e);
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < note.size(); ++i) {
    const char c = note[i];
    if (c == '\n') {
      push(start, i);
      start = i + 1;
      continue;
    }
    if (c != '.' && c != '!' && c != '?' && c != ';') continue;
    const bool at_end = i + 1 >= note.size();
    const bool before_space = !at_end && std::isspace(static_cast<unsigned char>(note[i + 1]));
    if (!at_end && !before_space) continue;  // decimals, "e.g.x"
    if (c == '.' && is_abbreviation(note, i)) continue;
    push(start, i + 1);
    start = i + 1;
  }
  push(start, note.size());
  return out;
}

ClinicalVariables pattern_rules(std::string_view note) {
  std::vector<Sentence> sentences;
  for (auto [b, e] : split_sentences(note)) {
    sentences.push_back({b, e, lower(note.substr(b, e - b))});
  }

  ClinicalVariables vars;
  resolve_medication(note, sentences, kSteroidTerms, Variable::Steroid, vars.steroid_status, vars);
  resolve_medication(note, sentences, kBevacizumabTerms, Variable::Bevacizumab,
                     vars.bevacizumab_status, vars);

  for (const auto& sent : sentences) {
    if (!first_word(sent.lowered, kRadiationTerms)) continue;
    auto date = first_date_in(note.substr(sent.start, sent.end - sent.start));
    if (!date) continue;
    vars.radiation_completion_date = *date;
    vars.evidence_for(Variable::RadiationDate) =
        EvidenceSpan{sent.start, sent.end, std::string(note.substr(sent.start, sent.end - sent.start))};
    break;
  }
  return vars;
}

}  // namespace btrads
