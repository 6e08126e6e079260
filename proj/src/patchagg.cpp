#include "survrisk/patchagg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"

namespace survrisk::patchagg {

namespace {
constexpr double kProbSumTolerance = 1e-6;
}

PatchGrid::PatchGrid(std::string slide_id, std::size_t rows, std::size_t cols)
    : slide_id_(std::move(slide_id)), rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) throw DataError("patch grid '" + slide_id_ + "' has zero extent");
  probs_.assign(rows * cols, ClassProbs{1.0, 0.0, 0.0, 0.0});
  tissue_.assign(rows * cols, 0.0);
}

void PatchGrid::set(std::size_t r, std::size_t c, const ClassProbs& p, double tissue_score) {
  if (r >= rows_ || c >= cols_) throw DataError("patch index outside grid '" + slide_id_ + "'");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("class probability outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw DataError("class probabilities do not sum to 1 in slide '" + slide_id_ + "'");
  }
  if (!(tissue_score >= 0.0 && tissue_score <= 1.0)) {
    throw DataError("tissue score outside [0,1] in slide '" + slide_id_ + "'");
  }
  probs_[r * cols_ + c] = p;
  tissue_[r * cols_ + c] = tissue_score;
}

void validate(const ClassWeights& weights) {
  for (double w : weights.w) {
    if (!(std::isfinite(w) && w > 0.0)) throw ConfigError("class weights must be positive");
  }
}

TissueThreshold select_tissue_threshold(std::span<const ScoredTissue> scores,
                                        double target_precision) {
  if (!(target_precision > 0.0 && target_precision <= 1.0)) {
    throw ConfigError("target precision must lie in (0, 1]");
  }
  std::vector<ScoredTissue> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredTissue& a, const ScoredTissue& b) { return a.score < b.score; });
  std::size_t total_pos = 0;
  for (const auto& s : sorted) {
    if (!std::isfinite(s.score)) throw DataError("non-finite tissue score");
    if (s.label == TissueLabel::Prostatic) ++total_pos;
  }
  if (total_pos == 0) throw DataError("threshold selection needs at least one prostatic label");

  // Walk cut points upward; tp/fp count everything at or above the cut.
  std::size_t tp = total_pos;
  std::size_t fp = sorted.size() - total_pos;
  for (std::size_t i = 0; i < sorted.size();) {
    const double cut = sorted[i].score;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (precision >= target_precision) {
      return {cut, precision, static_cast<double>(tp) / static_cast<double>(total_pos)};
    }
    for (; i < sorted.size() && sorted[i].score == cut; ++i) {
      if (sorted[i].label == TissueLabel::Prostatic) {
        --tp;
      } else {
        --fp;
      }
    }
    if (tp == 0) break;
  }
  throw NumericError("unattainable precision: no tissue threshold reaches " +
                     std::to_string(target_precision));
}

std::vector<PatchClass> classify_patches(const PatchGrid& grid, const ClassWeights& weights,
                                         double tissue_threshold) {
  validate(weights);
  std::vector<PatchClass> out(grid.size());
  const auto probs = grid.probs();
  const auto tissue = grid.tissue_scores();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (tissue[i] < tissue_threshold) {
      out[i] = PatchClass::Masked;
      continue;
    }
    int best = 0;
    double best_val = weights.w[0] * probs[i][0];
    for (int k = 1; k < 4; ++k) {
      const double v = weights.w[k] * probs[i][k];
      if (v > best_val) {
        best = k;
        best_val = v;
      }
    }
    out[i] = static_cast<PatchClass>(best);
  }
  return out;
}

ClassCounts& ClassCounts::operator+=(const ClassCounts& o) {
  masked += o.masked;
  nontumor += o.nontumor;
  gp3 += o.gp3;
  gp4 += o.gp4;
  gp5 += o.gp5;
  return *this;
}

ClassCounts count_classes(std::span<const PatchClass> classes) {
  ClassCounts c;
  for (PatchClass k : classes) {
    switch (k) {
      case PatchClass::Masked:
        ++c.masked;
        break;
      case PatchClass::NonTumor:
        ++c.nontumor;
        break;
      case PatchClass::GP3:
        ++c.gp3;
        break;
      case PatchClass::GP4:
        ++c.gp4;
        break;
      case PatchClass::GP5:
        ++c.gp5;
        break;
    }
  }
  return c;
}

PatternPercentages pattern_percentages(const ClassCounts& pooled) {
  const std::size_t tumor = pooled.tumor();
  if (tumor == 0) return {};
  const double denom = static_cast<double>(tumor);
  PatternPercentages p;
  p.pct_gp3 = 100.0 * static_cast<double>(pooled.gp3) / denom;
  p.pct_gp4 = 100.0 * static_cast<double>(pooled.gp4) / denom;
  p.pct_gp5 = 100.0 * static_cast<double>(pooled.gp5) / denom;
  p.tumor_present = true;
  return p;
}

PatternPercentages pattern_percentages(std::span<const ClassCounts> slides) {
  ClassCounts pooled;
  for (const auto& s : slides) pooled += s;
  return pattern_percentages(pooled);
}

namespace {

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(where + ": invalid number '" + s + "'");
  }
  return v;
}

}  // namespace

std::map<std::string, PatchGrid> read_patch_file(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  static const char* cols[] = {"slide_id", "row",     "col",     "p_nontumor",
                               "p_gp3",    "p_gp4",   "p_gp5",   "tissue_score"};
  int idx[8];
  for (int k = 0; k < 8; ++k) {
    idx[k] = t.column(cols[k]);
    if (idx[k] < 0) throw DataError(path + ": missing required column '" + cols[k] + "'");
  }
  struct Cell {
    std::size_t r, c;
    ClassProbs p;
    double tissue;
    std::string where;
  };
  std::map<std::string, std::vector<Cell>> by_slide;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
    if (row.size() != t.header.size()) throw DataError(where + ": wrong field count");
    auto f = [&](int k) -> const std::string& { return row[static_cast<std::size_t>(idx[k])]; };
    Cell cell{parse_number<std::size_t>(f(1), where),
              parse_number<std::size_t>(f(2), where),
              {parse_number<double>(f(3), where), parse_number<double>(f(4), where),
               parse_number<double>(f(5), where), parse_number<double>(f(6), where)},
              parse_number<double>(f(7), where),
              where};
    by_slide[f(0)].push_back(std::move(cell));
  }
  std::map<std::string, PatchGrid> grids;
  for (auto& [slide, cells] : by_slide) {
    std::size_t rows = 0, cols_n = 0;
    for (const auto& c : cells) {
      rows = std::max(rows, c.r + 1);
      cols_n = std::max(cols_n, c.c + 1);
    }
    PatchGrid grid(slide, rows, cols_n);
    for (const auto& c : cells) {
      try {
        grid.set(c.r, c.c, c.p, c.tissue);
      } catch (const DataError& e) {
        throw DataError(c.where + ": " + e.what());
      }
    }
    grids.emplace(slide, std::move(grid));
  }
  return grids;
}

std::map<std::string, std::string> read_slide_manifest(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int s = t.column("slide_id");
  const int c = t.column("case_id");
  if (s < 0 || c < 0) throw DataError(path + ": manifest needs slide_id and case_id columns");
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != t.header.size()) {
      throw DataError(path + ":" + std::to_string(t.line_numbers[i]) + ": wrong field count");
    }
    const auto& slide = row[static_cast<std::size_t>(s)];
    if (!out.emplace(slide, row[static_cast<std::size_t>(c)]).second) {
      throw DataError(path + ": slide '" + slide + "' listed twice");
    }
  }
  return out;
}

std::vector<CaseAggregate> aggregate_cases(const std::map<std::string, PatchGrid>& grids,
                                           const std::map<std::string, std::string>& manifest,
                                           const ClassWeights& weights, double tissue_threshold) {
  std::map<std::string, CaseAggregate> by_case;
  for (const auto& [slide, grid] : grids) {
    auto it = manifest.find(slide);
    if (it == manifest.end()) throw DataError("slide '" + slide + "' missing from manifest");
    const auto classes = classify_patches(grid, weights, tissue_threshold);
    CaseAggregate& agg = by_case[it->second];
    agg.case_id = it->second;
    ++agg.n_slides;
    agg.counts += count_classes(classes);
  }
  std::vector<CaseAggregate> out;
  out.reserve(by_case.size());
  for (auto& [id, agg] : by_case) {
    agg.pct = pattern_percentages(agg.counts);
    out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace survrisk::patchagg
