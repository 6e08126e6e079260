#include "survrisk/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"

namespace survrisk::cohort {

using nlohmann::json;

std::string_view to_string(TCategory t) {
  switch (t) {
    case TCategory::T2:
      return "T2";
    case TCategory::T3:
      return "T3";
    case TCategory::T4:
      return "T4";
  }
  return "";
}

std::optional<TCategory> parse_t_category(std::string_view s) {
  if (s == "T2") return TCategory::T2;
  if (s == "T3") return TCategory::T3;
  if (s == "T4") return TCategory::T4;
  return std::nullopt;
}

std::optional<bool> Case::t_stage_high() const {
  if (!t_category) return std::nullopt;
  return *t_category != TCategory::T2;
}

std::optional<std::string> validate_case(const Case& c) {
  if (c.case_id.empty()) return "empty case_id";
  for (double p : {c.pct_gp3, c.pct_gp4, c.pct_gp5}) {
    if (!std::isfinite(p) || p < 0.0 || p > 100.0) return "percentage out of range";
  }
  if (c.tumor_present &&
      std::abs(c.pct_gp3 + c.pct_gp4 + c.pct_gp5 - 100.0) > kPatternSumTolerance) {
    return "pattern sum violation";
  }
  if (!std::isfinite(c.followup_years) || c.followup_years <= 0.0) return "non-positive follow-up";
  if (c.pathologist_gg && (*c.pathologist_gg < 1 || *c.pathologist_gg > 5)) {
    return "grade group out of range";
  }
  if (c.dss_event && c.os_event && !*c.os_event) return "disease-specific death without death";
  return std::nullopt;
}

Cohort::Cohort(std::vector<Case> cases, std::string label, std::vector<Exclusion> exclusion_log)
    : cases_(std::move(cases)), label_(std::move(label)), exclusion_log_(std::move(exclusion_log)) {
  std::sort(cases_.begin(), cases_.end(),
            [](const Case& a, const Case& b) { return a.case_id < b.case_id; });
  auto dup = std::adjacent_find(cases_.begin(), cases_.end(), [](const Case& a, const Case& b) {
    return a.case_id == b.case_id;
  });
  if (dup != cases_.end()) throw DataError("duplicate case_id '" + dup->case_id + "'");
}

std::optional<std::size_t> Cohort::find(std::string_view case_id) const {
  auto it = std::lower_bound(cases_.begin(), cases_.end(), case_id,
                             [](const Case& c, std::string_view id) { return c.case_id < id; });
  if (it == cases_.end() || it->case_id != case_id) return std::nullopt;
  return static_cast<std::size_t>(it - cases_.begin());
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "case_id",   "surgery_year", "pct_gp3",        "pct_gp4",   "pct_gp5", "tumor_present",
      "gg",        "t_category",   "followup_years", "dss_event", "os_event"};
  return cols;
}

namespace {

struct RowParseError {
  std::string reason;
};

double parse_double(const std::string& s, const char* field) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw RowParseError{std::string("non-numeric ") + field};
  }
  return v;
}

int parse_int(const std::string& s, const char* field) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw RowParseError{std::string("non-integer ") + field};
  }
  return v;
}

bool parse_bool(const std::string& s, const char* field) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw RowParseError{std::string("invalid boolean ") + field};
}

std::string sidecar_path(const std::string& path) { return path + ".json"; }

}  // namespace

LoadResult load_cohort(const std::string& path, std::string_view schema_version) {
  if (schema_version != kSchemaVersion) {
    throw DataError("unsupported cohort schema version '" + std::string(schema_version) + "'");
  }
  const csv::Table table = csv::read_file(path);
  std::array<int, 11> idx{};
  for (std::size_t i = 0; i < csv_columns().size(); ++i) {
    idx[i] = table.column(csv_columns()[i]);
    if (idx[i] < 0) {
      throw DataError(path + ": missing required column '" + csv_columns()[i] + "'");
    }
  }

  LoadResult result;
  std::vector<Case> cases;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    std::string id = row.empty() ? std::string() : row[0];
    try {
      if (row.size() != table.header.size()) throw RowParseError{"wrong field count"};
      auto f = [&](int k) -> const std::string& { return row[static_cast<std::size_t>(idx[k])]; };
      Case c;
      c.case_id = f(0);
      id = c.case_id;
      c.surgery_year = parse_int(f(1), "surgery_year");
      c.pct_gp3 = parse_double(f(2), "pct_gp3");
      c.pct_gp4 = parse_double(f(3), "pct_gp4");
      c.pct_gp5 = parse_double(f(4), "pct_gp5");
      c.tumor_present = parse_bool(f(5), "tumor_present");
      if (!f(6).empty()) c.pathologist_gg = parse_int(f(6), "gg");
      if (!f(7).empty()) {
        c.t_category = parse_t_category(f(7));
        if (!c.t_category) throw RowParseError{"invalid t_category"};
      }
      c.followup_years = parse_double(f(8), "followup_years");
      c.dss_event = parse_bool(f(9), "dss_event");
      if (!f(10).empty()) c.os_event = parse_bool(f(10), "os_event");
      if (auto bad = validate_case(c)) throw RowParseError{*bad};
      if (!seen.insert(c.case_id).second) {
        throw DataError(path + ":" + std::to_string(line) + ": duplicate case_id '" + c.case_id +
                        "'");
      }
      cases.push_back(std::move(c));
    } catch (const RowParseError& e) {
      result.row_errors.push_back({line, id, e.reason});
    }
  }
  if (!table.rows.empty() && cases.empty()) {
    throw DataError(path + ": every row is malformed (first: line " +
                    std::to_string(result.row_errors.front().line) + ", " +
                    result.row_errors.front().reason + ")");
  }

  std::string label = std::filesystem::path(path).stem().string();
  std::vector<Exclusion> log;
  if (std::ifstream side(sidecar_path(path)); side) {
    try {
      json j = json::parse(side);
      label = j.at("label").get<std::string>();
      for (const auto& e : j.at("exclusion_log")) {
        log.push_back({e.at("case_id").get<std::string>(), e.at("reason").get<std::string>()});
      }
    } catch (const json::exception& e) {
      throw DataError(sidecar_path(path) + ": " + e.what());
    }
  }
  result.cohort = Cohort(std::move(cases), std::move(label), std::move(log));
  return result;
}

void write_cohort(const std::string& path, const Cohort& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  csv::write_row(out, csv_columns());
  for (const Case& c : cohort.cases()) {
    csv::write_row(out, {c.case_id, std::to_string(c.surgery_year), csv::format_double(c.pct_gp3),
                         csv::format_double(c.pct_gp4), csv::format_double(c.pct_gp5),
                         c.tumor_present ? "1" : "0",
                         c.pathologist_gg ? std::to_string(*c.pathologist_gg) : "",
                         c.t_category ? std::string(to_string(*c.t_category)) : "",
                         csv::format_double(c.followup_years), c.dss_event ? "1" : "0",
                         c.os_event ? (*c.os_event ? "1" : "0") : ""});
  }
  json side;
  side["schema_version"] = std::string(kSchemaVersion);
  side["label"] = cohort.label();
  side["exclusion_log"] = json::array();
  for (const auto& e : cohort.exclusion_log()) {
    side["exclusion_log"].push_back({{"case_id", e.case_id}, {"reason", e.reason}});
  }
  std::ofstream sout(sidecar_path(path), std::ios::binary);
  if (!sout) throw DataError("cannot write " + sidecar_path(path));
  sout << side.dump(2) << '\n';
}

Cohort apply_exclusions(const Cohort& cohort) {
  std::vector<Case> kept;
  std::vector<Exclusion> log = cohort.exclusion_log();
  for (const Case& c : cohort.cases()) {
    const bool died = c.dss_event || c.os_event.value_or(false);
    if (died && c.followup_years < kEarlyDeathYears) {
      log.push_back({c.case_id, std::string(kReasonEarlyDeath)});
    } else if (!c.tumor_present) {
      log.push_back({c.case_id, std::string(kReasonNoTumor)});
    } else {
      kept.push_back(c);
    }
  }
  return Cohort(std::move(kept), cohort.label(), std::move(log));
}

Cohort select_validation_set(const Cohort& cohort, ValidationSet which, int min_year) {
  if (which == ValidationSet::V1) return cohort;
  std::vector<Case> kept;
  for (const Case& c : cohort.cases()) {
    if (c.surgery_year >= min_year && c.pathologist_gg) kept.push_back(c);
  }
  return Cohort(std::move(kept), cohort.label(), cohort.exclusion_log());
}

}  // namespace survrisk::cohort
