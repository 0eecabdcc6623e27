#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ocuflow/core/json_io.hpp"
#include "ocuflow/orchestrator/trace.hpp"

namespace ocuflow::eval {

// ---- tool usage

struct ToolGroundTruth {
  std::string case_id;
  std::set<std::string> expected_tools;  // non-empty
};

struct CaseToolUsage {
  std::string case_id;
  std::set<std::string> invoked_tools;
};

struct ToolUsageCase {
  std::string case_id;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t extra = 0;
  std::vector<std::string> missed;
};

struct ToolUsageScore {
  std::size_t correct = 0;
  std::size_t incorrect = 0;  // expected but never invoked
  std::size_t extra = 0;      // invoked but not expected; outside the denominator
  double accuracy = 0.0;      // correct / (correct + incorrect)
  std::vector<ToolUsageCase> cases;
};

// Every usage case needs a ground-truth entry (MissingGroundTruth). Ground
// truths without a matching usage are ignored.
ToolUsageScore tool_usage_accuracy(std::span<const CaseToolUsage> usage,
                                   std::span<const ToolGroundTruth> gts);

// Tools with an invocation event in the trace, whatever the status.
CaseToolUsage usage_from_trace(const TraceHeader& header, std::span<const TraceEvent> events);

Json to_json(const ToolUsageScore& s);

// ---- diagnosis matching

// Exact match after normalization (lowercase, whitespace collapsed, hyphens
// and underscores as spaces) and an alias table mapping synonyms onto one
// canonical spelling. Subtype or grade differences stay mismatches.
class DiagnosisMatcher {
 public:
  DiagnosisMatcher();  // seeded with the standard alias table
  static DiagnosisMatcher without_aliases();

  void add_alias(std::string_view alias, std::string_view canonical);
  std::string canonical(std::string_view label) const;
  bool matches(std::string_view predicted, std::string_view truth) const;

 private:
  struct Empty {};
  explicit DiagnosisMatcher(Empty) {}
  std::map<std::string, std::string> aliases_;
};

struct LabelledCase {
  std::string case_id;
  std::string label;
};

struct DiagnosticCase {
  std::string case_id;
  std::string predicted;
  std::string truth;
  bool correct = false;
};

struct DiagnosticScore {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<DiagnosticCase> cases;
};

// Every prediction needs a ground truth (MissingGroundTruth); ground truths
// without a prediction count as missing too, so the case sets must align.
DiagnosticScore diagnostic_accuracy(std::span<const LabelledCase> predictions,
                                    std::span<const LabelledCase> truths,
                                    const DiagnosisMatcher& matcher = DiagnosisMatcher());

// ---- expert ratings

enum class Dimension { Accuracy, Completeness, Safety, Reasoning, Interpretability };
inline constexpr std::array<Dimension, 5> kDimensions{Dimension::Accuracy, Dimension::Completeness,
                                                      Dimension::Safety, Dimension::Reasoning,
                                                      Dimension::Interpretability};
inline constexpr int kMaxTotalScore = 15;

std::string_view to_string(Dimension d) noexcept;
std::optional<Dimension> parse_dimension(std::string_view s) noexcept;

struct RatingRecord {
  std::string case_id;
  std::string rater_id;
  std::map<Dimension, int> scores;  // each in {1, 2, 3}
  std::string subgroup;             // e.g. modality; empty groups under "all"
};

RatingRecord rating_from_json(const Json& doc);

struct DimensionSummary {
  std::size_t n = 0;
  std::size_t at_least_2 = 0;
  std::size_t at_least_3 = 0;
  double pct_at_least_2 = 0.0;  // percent, 0..100
  double pct_at_least_3 = 0.0;
  double mean = 0.0;
};

struct RatingSummary {
  std::map<std::string, std::map<Dimension, int>> consensus;  // case_id -> lower score per dimension
  std::map<Dimension, DimensionSummary> dimensions;
  std::map<std::string, double> mean_total_by_subgroup;
  double mean_total = 0.0;
};

// Exactly two raters per case, each scoring all five dimensions in {1,2,3};
// otherwise RaterCountMismatch. Consensus is the lower of the two scores.
RatingSummary aggregate_ratings(std::span<const RatingRecord> records);

Json to_json(const RatingSummary& s);

// ---- checklist

struct ChecklistItem {
  std::string item_id;
  std::string section;
  std::string description;
  std::vector<std::string> applicable_conditions;  // empty: applies to every report
};

class ChecklistRubric {
 public:
  static constexpr std::size_t kReferenceSize = 197;

  // {"items": [{item_id, description, section?, applicable_conditions?}]}.
  // Throws SchemaViolation on duplicate or missing ids.
  static ChecklistRubric from_json(const Json& doc);
  static ChecklistRubric load(const std::filesystem::path& path);

  void add(ChecklistItem item);
  const std::vector<ChecklistItem>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool contains(std::string_view item_id) const;
  std::set<std::string> all_ids() const;
  // Generic items plus those listing `condition` (case-insensitive).
  std::set<std::string> applicable_for(std::string_view condition) const;

 private:
  std::vector<ChecklistItem> items_;
  std::set<std::string, std::less<>> ids_;
};

// |hits| / |applicable|. UnknownItemId when an id is not in the rubric;
// InvalidArgument when a hit is outside `applicable` or `applicable` is empty.
double score_checklist(const std::set<std::string>& hits, const ChecklistRubric& rubric,
                       const std::set<std::string>& applicable);

// ---- statistics

// Standard normal quantile (Acklam's rational approximation plus one Halley
// step against erfc; about 1e-15 relative error).
double normal_quantile(double p);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval. InvalidCounts unless 0 <= successes <= n, n >= 1,
// and 0 < level < 1.
Interval wilson_interval(long long successes, long long n, double level = 0.95);

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  bool degenerate = false;  // p_e == 1: kappa undefined, reported as NaN
};

// InvalidCounts unless the table is square, non-negative, and non-empty.
KappaResult cohen_kappa(const std::vector<std::vector<double>>& table);

}  // namespace ocuflow::eval
