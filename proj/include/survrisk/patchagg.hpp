#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace survrisk::patchagg {

// Class order of every probability vector.
enum class PatchClass { Masked = -1, NonTumor = 0, GP3 = 1, GP4 = 2, GP5 = 3 };

using ClassProbs = std::array<double, 4>;

// Row-major grid of per-patch class probabilities for one slide.
class PatchGrid {
 public:
  PatchGrid(std::string slide_id, std::size_t rows, std::size_t cols);

  const std::string& slide_id() const noexcept { return slide_id_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return probs_.size(); }

  const ClassProbs& probs(std::size_t r, std::size_t c) const { return probs_[r * cols_ + c]; }
  double tissue_score(std::size_t r, std::size_t c) const { return tissue_[r * cols_ + c]; }
  std::span<const ClassProbs> probs() const noexcept { return probs_; }
  std::span<const double> tissue_scores() const noexcept { return tissue_; }

  // Throws DataError if the vector is not a distribution or the score is
  // outside [0,1].
  void set(std::size_t r, std::size_t c, const ClassProbs& p, double tissue_score);

 private:
  std::string slide_id_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<ClassProbs> probs_;
  std::vector<double> tissue_;
};

struct ClassWeights {
  ClassProbs w{1.0, 1.0, 1.0, 1.0};
};

void validate(const ClassWeights& weights);

enum class TissueLabel { Prostatic, Extraprostatic };

struct ScoredTissue {
  double score;
  TissueLabel label;
};

struct TissueThreshold {
  double threshold;
  double precision;
  double recall;
};

// Smallest threshold t (taken from the observed scores) such that calling
// score >= t prostatic reaches target_precision. Throws DataError on missing
// positives, NumericError when no cut point reaches the target.
TissueThreshold select_tissue_threshold(std::span<const ScoredTissue> scores,
                                        double target_precision);

// Per-cell classes, row-major. Cells scoring below the tissue threshold are
// masked; the rest take the argmax of weighted probabilities with ties going
// to the lower-risk class.
std::vector<PatchClass> classify_patches(const PatchGrid& grid, const ClassWeights& weights,
                                         double tissue_threshold);

struct ClassCounts {
  std::size_t masked = 0;
  std::size_t nontumor = 0;
  std::size_t gp3 = 0;
  std::size_t gp4 = 0;
  std::size_t gp5 = 0;

  ClassCounts& operator+=(const ClassCounts& o);
  std::size_t tumor() const noexcept { return gp3 + gp4 + gp5; }
};

ClassCounts count_classes(std::span<const PatchClass> classes);

struct PatternPercentages {
  double pct_gp3 = 0.0;
  double pct_gp4 = 0.0;
  double pct_gp5 = 0.0;
  bool tumor_present = false;
};

// Case-level percentages over tumor cells pooled from every slide.
PatternPercentages pattern_percentages(std::span<const ClassCounts> slides);
PatternPercentages pattern_percentages(const ClassCounts& pooled);

// Patch file: slide_id,row,col,p_nontumor,p_gp3,p_gp4,p_gp5,tissue_score.
// Grid extents are inferred per slide; cells absent from the file stay at
// tissue score 0 (always masked).
std::map<std::string, PatchGrid> read_patch_file(const std::string& path);

// Manifest: slide_id,case_id.
std::map<std::string, std::string> read_slide_manifest(const std::string& path);

struct CaseAggregate {
  std::string case_id;
  std::size_t n_slides = 0;
  ClassCounts counts;
  PatternPercentages pct;
};

// Classifies every slide and pools counts per case, ordered by case_id.
// Slides missing from the manifest raise DataError.
std::vector<CaseAggregate> aggregate_cases(const std::map<std::string, PatchGrid>& grids,
                                           const std::map<std::string, std::string>& manifest,
                                           const ClassWeights& weights, double tissue_threshold);

}  // namespace survrisk::patchagg
