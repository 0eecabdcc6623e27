#include "ocuflow/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow::eval {

// ---------------------------------------------------------------- tool usage

ToolUsageScore tool_usage_accuracy(std::span<const CaseToolUsage> usage, std::span<const ToolGroundTruth> gts) {
  std::map<std::string, const ToolGroundTruth*> by_case;
  for (const auto& g : gts) {
    if (g.expected_tools.empty()) throw Error(ErrorCode::InvalidArgument, "empty expected_tools for " + g.case_id);
    by_case[g.case_id] = &g;
  }
  ToolUsageScore score;
  for (const auto& u : usage) {
    auto it = by_case.find(u.case_id);
    if (it == by_case.end()) throw Error(ErrorCode::MissingGroundTruth, u.case_id);
    const auto& expected = it->second->expected_tools;
    ToolUsageCase c;
    c.case_id = u.case_id;
    for (const auto& t : expected) {
      if (u.invoked_tools.contains(t)) {
        ++c.correct;
      } else {
        ++c.incorrect;
        c.missed.push_back(t);
      }
    }
    for (const auto& t : u.invoked_tools) {
      if (!expected.contains(t)) ++c.extra;
    }
    score.correct += c.correct;
    score.incorrect += c.incorrect;
    score.extra += c.extra;
    score.cases.push_back(std::move(c));
  }
  const auto denom = score.correct + score.incorrect;
  score.accuracy = denom == 0 ? 0.0 : static_cast<double>(score.correct) / static_cast<double>(denom);
  return score;
}

CaseToolUsage usage_from_trace(const TraceHeader& header, std::span<const TraceEvent> events) {
  CaseToolUsage u{header.case_id, {}};
  for (const auto& e : events) {
    if (e.kind == EventKind::Invocation) u.invoked_tools.insert(e.payload.at("tool_id").get<std::string>());
  }
  return u;
}

Json to_json(const ToolUsageScore& s) {
  Json cases = Json::array();
  for (const auto& c : s.cases) {
    cases.push_back(Json{{"case_id", c.case_id},
                         {"correct", c.correct},
                         {"incorrect", c.incorrect},
                         {"extra", c.extra},
                         {"missed", c.missed}});
  }
  return Json{{"correct", s.correct},
              {"incorrect", s.incorrect},
              {"extra", s.extra},
              {"accuracy", s.accuracy},
              {"cases", std::move(cases)}};
}

// ---------------------------------------------------------------- diagnosis

namespace {

std::string normalize_label(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c == '-' || c == '_') c = ' ';
  }
  return text::normalize(out);
}

}  // namespace

DiagnosisMatcher::DiagnosisMatcher() {
  static const std::pair<const char*, const char*> kAliases[] = {
      {"wet amd", "neovascular amd"},
      {"exudative amd", "neovascular amd"},
      {"nvamd", "neovascular amd"},
      {"neovascular age-related macular degeneration", "neovascular amd"},
      {"dry amd", "non-neovascular amd"},
      {"amd", "age-related macular degeneration"},
      {"dr", "diabetic retinopathy"},
      {"pdr", "proliferative diabetic retinopathy"},
      {"npdr", "non-proliferative diabetic retinopathy"},
      {"dme", "diabetic macular edema"},
      {"diabetic macular oedema", "diabetic macular edema"},
      {"ci-dme", "center-involved diabetic macular edema"},
      {"rvo", "retinal vein occlusion"},
      {"crvo", "central retinal vein occlusion"},
      {"brvo", "branch retinal vein occlusion"},
      {"csc", "central serous chorioretinopathy"},
      {"cscr", "central serous chorioretinopathy"},
      {"central serous retinopathy", "central serous chorioretinopathy"},
      {"erm", "epiretinal membrane"},
      {"macular pucker", "epiretinal membrane"},
      {"ftmh", "full-thickness macular hole"},
      {"ga", "geographic atrophy"},
      {"pcv", "polypoidal choroidal vasculopathy"},
      {"rrd", "rhegmatogenous retinal detachment"},
      {"no abnormality", "normal"},
      {"no abnormality detected", "normal"},
  };
  for (const auto& [alias, canonical] : kAliases) add_alias(alias, canonical);
}

DiagnosisMatcher DiagnosisMatcher::without_aliases() { return DiagnosisMatcher(Empty{}); }

void DiagnosisMatcher::add_alias(std::string_view alias, std::string_view canonical) {
  aliases_[normalize_label(alias)] = normalize_label(canonical);
}

std::string DiagnosisMatcher::canonical(std::string_view label) const {
  auto n = normalize_label(label);
  auto it = aliases_.find(n);
  return it == aliases_.end() ? n : it->second;
}

bool DiagnosisMatcher::matches(std::string_view predicted, std::string_view truth) const {
  auto p = canonical(predicted);
  return !p.empty() && p == canonical(truth);
}

DiagnosticScore diagnostic_accuracy(std::span<const LabelledCase> predictions, std::span<const LabelledCase> truths,
                                    const DiagnosisMatcher& matcher) {
  std::map<std::string, std::string> truth_by_case;
  for (const auto& t : truths) truth_by_case[t.case_id] = t.label;
  std::set<std::string> predicted_cases;
  DiagnosticScore score;
  for (const auto& p : predictions) {
    auto it = truth_by_case.find(p.case_id);
    if (it == truth_by_case.end()) throw Error(ErrorCode::MissingGroundTruth, p.case_id);
    predicted_cases.insert(p.case_id);
    DiagnosticCase c{p.case_id, p.label, it->second, matcher.matches(p.label, it->second)};
    score.correct += c.correct ? 1 : 0;
    score.cases.push_back(std::move(c));
  }
  for (const auto& [case_id, _] : truth_by_case) {
    if (!predicted_cases.contains(case_id)) throw Error(ErrorCode::MissingGroundTruth, "no prediction for " + case_id);
  }
  score.n = score.cases.size();
  score.accuracy = score.n == 0 ? 0.0 : static_cast<double>(score.correct) / static_cast<double>(score.n);
  return score;
}

// ---------------------------------------------------------------- ratings

std::string_view to_string(Dimension d) noexcept {
  switch (d) {
    case Dimension::Accuracy: return "accuracy";
    case Dimension::Completeness: return "completeness";
    case Dimension::Safety: return "safety";
    case Dimension::Reasoning: return "reasoning";
    case Dimension::Interpretability: return "interpretability";
  }
  return "accuracy";
}

std::optional<Dimension> parse_dimension(std::string_view s) noexcept {
  for (auto d : kDimensions) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

RatingRecord rating_from_json(const Json& doc) {
  RatingRecord r;
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "rating");
  if (!doc.contains("case_id") || !doc["case_id"].is_string()) throw Error(ErrorCode::SchemaViolation, "case_id");
  if (!doc.contains("rater_id") || !doc["rater_id"].is_string()) throw Error(ErrorCode::SchemaViolation, "rater_id");
  if (!doc.contains("scores") || !doc["scores"].is_object()) throw Error(ErrorCode::SchemaViolation, "scores");
  r.case_id = doc["case_id"].get<std::string>();
  r.rater_id = doc["rater_id"].get<std::string>();
  r.subgroup = doc.value("subgroup", std::string());
  for (const auto& [k, v] : doc["scores"].items()) {
    auto d = parse_dimension(k);
    if (!d) throw Error(ErrorCode::SchemaViolation, "scores/" + k);
    if (!v.is_number_integer()) throw Error(ErrorCode::SchemaViolation, "scores/" + k);
    r.scores[*d] = v.get<int>();
  }
  return r;
}

RatingSummary aggregate_ratings(std::span<const RatingRecord> records) {
  std::map<std::string, std::vector<const RatingRecord*>> by_case;
  for (const auto& r : records) by_case[r.case_id].push_back(&r);

  RatingSummary s;
  std::map<std::string, std::pair<double, std::size_t>> subgroup_totals;
  double grand_total = 0.0;
  for (const auto& [case_id, rs] : by_case) {
    if (rs.size() != 2 || rs[0]->rater_id == rs[1]->rater_id) {
      throw Error(ErrorCode::RaterCountMismatch, case_id + ": expected two distinct raters, got " +
                                                     std::to_string(rs.size()) + " records");
    }
    auto& consensus = s.consensus[case_id];
    int total = 0;
    for (auto d : kDimensions) {
      int lower = 0;
      for (const auto* r : rs) {
        auto it = r->scores.find(d);
        if (it == r->scores.end()) {
          throw Error(ErrorCode::RaterCountMismatch,
                      case_id + ": rater " + r->rater_id + " missing " + std::string(to_string(d)));
        }
        if (it->second < 1 || it->second > 3) {
          throw Error(ErrorCode::InvalidArgument, case_id + ": score out of range for " + std::string(to_string(d)));
        }
        lower = lower == 0 ? it->second : std::min(lower, it->second);
      }
      consensus[d] = lower;
      total += lower;
      auto& dim = s.dimensions[d];
      ++dim.n;
      if (lower >= 2) ++dim.at_least_2;
      if (lower >= 3) ++dim.at_least_3;
      dim.mean += lower;
    }
    grand_total += total;
    const auto& group = rs[0]->subgroup.empty() ? std::string("all") : rs[0]->subgroup;
    subgroup_totals[group].first += total;
    ++subgroup_totals[group].second;
  }
  for (auto& [d, dim] : s.dimensions) {
    const double n = static_cast<double>(dim.n);
    dim.pct_at_least_2 = 100.0 * static_cast<double>(dim.at_least_2) / n;
    dim.pct_at_least_3 = 100.0 * static_cast<double>(dim.at_least_3) / n;
    dim.mean /= n;
  }
  for (const auto& [g, t] : subgroup_totals) s.mean_total_by_subgroup[g] = t.first / static_cast<double>(t.second);
  if (!by_case.empty()) s.mean_total = grand_total / static_cast<double>(by_case.size());
  return s;
}

Json to_json(const RatingSummary& s) {
  Json dims = Json::object();
  for (const auto& [d, dim] : s.dimensions) {
    dims[std::string(to_string(d))] = Json{{"n", dim.n},
                                           {"at_least_2", dim.at_least_2},
                                           {"at_least_3", dim.at_least_3},
                                           {"pct_at_least_2", dim.pct_at_least_2},
                                           {"pct_at_least_3", dim.pct_at_least_3},
                                           {"mean", dim.mean}};
  }
  Json consensus = Json::object();
  for (const auto& [case_id, scores] : s.consensus) {
    Json c = Json::object();
    for (const auto& [d, v] : scores) c[std::string(to_string(d))] = v;
    consensus[case_id] = std::move(c);
  }
  return Json{{"dimensions", std::move(dims)},
              {"consensus", std::move(consensus)},
              {"mean_total", s.mean_total},
              {"mean_total_by_subgroup", s.mean_total_by_subgroup},
              {"max_total", kMaxTotalScore}};
}

// ---------------------------------------------------------------- checklist

ChecklistRubric ChecklistRubric::from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("items") || !doc["items"].is_array()) {
    throw Error(ErrorCode::SchemaViolation, "items");
  }
  ChecklistRubric rubric;
  std::size_t i = 0;
  for (const auto& it : doc["items"]) {
    const auto path = "items/" + std::to_string(i++);
    if (!it.is_object() || !it.contains("item_id") || !it["item_id"].is_string() ||
        it["item_id"].get<std::string>().empty()) {
      throw Error(ErrorCode::SchemaViolation, path + "/item_id");
    }
    ChecklistItem item;
    item.item_id = it["item_id"].get<std::string>();
    item.description = it.value("description", std::string());
    item.section = it.value("section", std::string());
    item.applicable_conditions = it.value("applicable_conditions", std::vector<std::string>{});
    rubric.add(std::move(item));
  }
  return rubric;
}

ChecklistRubric ChecklistRubric::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open rubric " + path.string());
  return from_json(Json::parse(in));
}

void ChecklistRubric::add(ChecklistItem item) {
  if (!ids_.insert(item.item_id).second) throw Error(ErrorCode::SchemaViolation, "duplicate item_id " + item.item_id);
  items_.push_back(std::move(item));
}

bool ChecklistRubric::contains(std::string_view item_id) const { return ids_.contains(item_id); }

std::set<std::string> ChecklistRubric::all_ids() const { return {ids_.begin(), ids_.end()}; }

std::set<std::string> ChecklistRubric::applicable_for(std::string_view condition) const {
  std::set<std::string> out;
  for (const auto& item : items_) {
    bool applies = item.applicable_conditions.empty();
    for (const auto& c : item.applicable_conditions) applies = applies || text::iequals(c, condition);
    if (applies) out.insert(item.item_id);
  }
  return out;
}

double score_checklist(const std::set<std::string>& hits, const ChecklistRubric& rubric,
                       const std::set<std::string>& applicable) {
  for (const auto& id : applicable) {
    if (!rubric.contains(id)) throw Error(ErrorCode::UnknownItemId, id);
  }
  for (const auto& id : hits) {
    if (!rubric.contains(id)) throw Error(ErrorCode::UnknownItemId, id);
    if (!applicable.contains(id)) throw Error(ErrorCode::InvalidArgument, "hit outside the applicable set: " + id);
  }
  if (applicable.empty()) throw Error(ErrorCode::InvalidArgument, "empty applicable set");
  return static_cast<double>(hits.size()) / static_cast<double>(applicable.size());
}

// ---------------------------------------------------------------- statistics

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile probability must be in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  for (int i = 0; i < 2; ++i) {
    double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
  }
  return x;
}

Interval wilson_interval(long long successes, long long n, double level) {
  if (n < 1 || successes < 0 || successes > n) {
    throw Error(ErrorCode::InvalidCounts, std::to_string(successes) + "/" + std::to_string(n));
  }
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidCounts, "level " + std::to_string(level));
  const double z = normal_quantile(0.5 + level / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Interval iv{center - half, center + half};
  if (successes == 0) iv.lo = 0.0;
  if (successes == n) iv.hi = 1.0;
  iv.lo = std::clamp(iv.lo, 0.0, p);
  iv.hi = std::clamp(iv.hi, p, 1.0);
  return iv;
}

KappaResult cohen_kappa(const std::vector<std::vector<double>>& table) {
  const std::size_t k = table.size();
  if (k == 0) throw Error(ErrorCode::InvalidCounts, "empty table");
  double total = 0.0;
  std::vector<double> rows(k, 0.0), cols(k, 0.0);
  double diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (table[i].size() != k) throw Error(ErrorCode::InvalidCounts, "table is not square");
    for (std::size_t j = 0; j < k; ++j) {
      const double v = table[i][j];
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidCounts, "negative or non-finite cell");
      total += v;
      rows[i] += v;
      cols[j] += v;
      if (i == j) diag += v;
    }
  }
  if (total <= 0.0) throw Error(ErrorCode::InvalidCounts, "table total is zero");
  KappaResult r;
  r.observed = diag / total;
  for (std::size_t i = 0; i < k; ++i) r.expected += (rows[i] / total) * (cols[i] / total);
  if (std::fabs(1.0 - r.expected) < 1e-15) {
    r.degenerate = true;
    r.kappa = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.kappa = diag == total ? 1.0 : (r.observed - r.expected) / (1.0 - r.expected);
  return r;
}

}  // namespace ocuflow::eval
