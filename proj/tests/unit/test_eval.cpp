#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "ocuflow/eval/ablation.hpp"
#include "ocuflow/eval/metrics.hpp"
#include "support/support.hpp"

using namespace ocuflow;
using namespace ocuflow::eval;
using ocuflow::test::error_code_of;

namespace {

Interval wilson_oracle(double s, double n, double level) {
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
  const double p = s / n;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {centre - half, centre + half};
}

double kappa_oracle(const std::vector<std::vector<double>>& t) {
  const std::size_t k = t.size();
  double total = 0.0, agree = 0.0;
  std::vector<double> rows(k, 0.0), cols(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      total += t[i][j];
      rows[i] += t[i][j];
      cols[j] += t[i][j];
    }
    agree += t[i][i];
  }
  double pe = 0.0;
  for (std::size_t i = 0; i < k; ++i) pe += (rows[i] / total) * (cols[i] / total);
  const double po = agree / total;
  return (po - pe) / (1.0 - pe);
}

RatingRecord rating(const std::string& c, const std::string& rater, std::array<int, 5> s,
                    const std::string& subgroup = "") {
  RatingRecord r{c, rater, {}, subgroup};
  for (std::size_t i = 0; i < kDimensions.size(); ++i) r.scores[kDimensions[i]] = s[i];
  return r;
}

ChecklistRubric rubric_of(std::size_t n) {
  ChecklistRubric r;
  for (std::size_t i = 0; i < n; ++i) r.add({"I" + std::to_string(1000 + i), "s", "d", {}});
  return r;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("tool usage set algebra") {
    std::vector<ToolGroundTruth> gts{{"c", {"A", "B"}}};
    std::vector<CaseToolUsage> usage{{"c", {"A", "C"}}};
    auto s = tool_usage_accuracy(usage, gts);
    CHECK(s.correct == 1);
    CHECK(s.incorrect == 1);
    CHECK(s.extra == 1);
    CHECK(s.accuracy == 0.5);
    REQUIRE(s.cases.size() == 1);
    CHECK(s.cases[0].missed == std::vector<std::string>{"B"});

    std::vector<CaseToolUsage> exact{{"c", {"A", "B"}}};
    auto perfect = tool_usage_accuracy(exact, gts);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.extra == 0);

    std::vector<CaseToolUsage> orphan{{"zzz", {"A"}}};
    CHECK(error_code_of([&] { tool_usage_accuracy(orphan, gts); }) == ErrorCode::MissingGroundTruth);
  }

  TEST_CASE("tool usage is permutation invariant and ignores extras") {
    std::mt19937 rng(4);
    std::vector<ToolGroundTruth> gts;
    std::vector<CaseToolUsage> usage;
    for (int c = 0; c < 40; ++c) {
      ToolGroundTruth gt{"c" + std::to_string(c), {}};
      CaseToolUsage u{gt.case_id, {}};
      for (int t = 0; t < 8; ++t) {
        const auto id = "t" + std::to_string(t);
        if (rng() % 2 || gt.expected_tools.empty()) gt.expected_tools.insert(id);
        if (rng() % 2) u.invoked_tools.insert(id);
      }
      gts.push_back(gt);
      usage.push_back(u);
    }
    auto base = tool_usage_accuracy(usage, gts);
    CHECK(base.accuracy >= 0.0);
    CHECK(base.accuracy <= 1.0);
    auto shuffled = usage;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto perm = tool_usage_accuracy(shuffled, gts);
    CHECK(perm.correct == base.correct);
    CHECK(perm.incorrect == base.incorrect);
    CHECK(perm.accuracy == base.accuracy);

    auto extra = usage;
    for (auto& u : extra) u.invoked_tools.insert("never_expected_" + std::to_string(rng() % 5));
    auto with_extra = tool_usage_accuracy(extra, gts);
    CHECK(with_extra.accuracy == base.accuracy);
    CHECK(with_extra.extra > base.extra);
  }

  TEST_CASE("usage from a trace counts every invoked tool") {
    ReasoningTrace t(TraceHeader{"c", 0, "h", 5});
    t.append(EventKind::Invocation, Json{{"tool_id", "a"}, {"result", {{"status", "ok"}}}}, 1);
    t.append(EventKind::Invocation, Json{{"tool_id", "b"}, {"result", {{"status", "timeout"}}}}, 2);
    t.append(EventKind::StepSkipped, Json{{"tool_id", "c"}}, 3);
    auto events = t.events();
    auto u = usage_from_trace(t.header(), events);
    CHECK(u.case_id == "c");
    CHECK(u.invoked_tools == std::set<std::string>{"a", "b"});
  }

  TEST_CASE("diagnostic accuracy with exact normalized matching") {
    std::vector<LabelledCase> preds, truths;
    for (int i = 0; i < 30; ++i) {
      const auto id = "c" + std::to_string(i);
      truths.push_back({id, "Retinal Vein Occlusion"});
      preds.push_back({id, i < 28 ? "retinal  vein-occlusion" : "glaucoma"});
    }
    auto s = diagnostic_accuracy(preds, truths);
    CHECK(s.correct == 28);
    CHECK(s.accuracy == doctest::Approx(0.9333).epsilon(5e-5));

    DiagnosisMatcher m;
    CHECK(m.matches("wet AMD", "neovascular amd"));
    CHECK_FALSE(m.matches("PDR", "DR stage 2"));
    CHECK_FALSE(m.matches("DR stage 2", "DR stage 3"));
    CHECK_FALSE(DiagnosisMatcher::without_aliases().matches("wet AMD", "neovascular amd"));

    std::vector<LabelledCase> short_truths(truths.begin(), truths.end() - 1);
    CHECK(error_code_of([&] { diagnostic_accuracy(preds, short_truths); }) == ErrorCode::MissingGroundTruth);
    std::vector<LabelledCase> short_preds(preds.begin(), preds.end() - 1);
    CHECK(error_code_of([&] { diagnostic_accuracy(short_preds, truths); }) == ErrorCode::MissingGroundTruth);
  }

  TEST_CASE("single-case ablation accuracy is 0 or 1") {
    const auto& rt = test::reference_runtime();
    std::vector<ClinicalCase> corpus{test::reference_case("crvo_uwf")};
    std::vector<int> tiers{1};
    auto r = run_ablation(corpus, tiers, *rt.orchestrator);
    REQUIRE(r.tiers.size() == 1);
    CHECK((r.tiers[0].accuracy == 0.0 || r.tiers[0].accuracy == 1.0));
    CHECK(r.tiers[0].tool_count == 5);

    std::vector<int> bad{0};
    CHECK(error_code_of([&] { run_ablation(corpus, bad, *rt.orchestrator); }) == ErrorCode::TierOutOfRange);
    std::vector<ClinicalCase> no_gt{test::reference_case("text_only_csc")};
    CHECK(error_code_of([&] { run_ablation(no_gt, tiers, *rt.orchestrator); }) == ErrorCode::MissingGroundTruth);
  }

  TEST_CASE("ablation is deterministic across parallelism") {
    const auto& rt = test::reference_runtime();
    auto corpus = gateway::load_corpus(test::data_dir() / "corpus.jsonl", rt.registry->modalities());
    std::vector<int> tiers{1, 3, 5};
    auto serial = run_ablation(corpus, tiers, *rt.orchestrator, {.parallelism = 1});
    auto parallel = run_ablation(corpus, tiers, *rt.orchestrator, {.parallelism = 4});
    CHECK(to_json(serial) == to_json(parallel));
    CHECK(serial.containment_violations.empty());
    for (const auto& t : serial.tiers) {
      CHECK(t.n_correct <= t.n_cases);
      CHECK(t.accuracy >= 0.0);
      CHECK(t.accuracy <= 1.0);
      std::size_t n = 0;
      for (const auto& [m, b] : t.per_modality) n += b.n_cases;
      CHECK(n == t.n_cases);
    }
    auto table = format_table(serial);
    CHECK(std::count(table.begin(), table.end(), '\n') >= 4);
  }

  TEST_CASE("ratings consensus takes the lower score") {
    std::vector<RatingRecord> recs{rating("c1", "r1", {3, 3, 3, 3, 3}), rating("c1", "r2", {2, 3, 1, 3, 2})};
    auto s = aggregate_ratings(recs);
    CHECK(s.consensus["c1"][Dimension::Accuracy] == 2);
    CHECK(s.consensus["c1"][Dimension::Safety] == 1);
    CHECK(s.consensus["c1"][Dimension::Completeness] == 3);
    CHECK(s.mean_total == 11.0);
    CHECK(s.mean_total <= kMaxTotalScore);
  }

  TEST_CASE("ratings errors") {
    std::vector<RatingRecord> one{rating("c1", "r1", {3, 3, 3, 3, 3})};
    CHECK(error_code_of([&] { aggregate_ratings(one); }) == ErrorCode::RaterCountMismatch);

    auto missing = rating("c1", "r2", {3, 3, 3, 3, 3});
    missing.scores.erase(Dimension::Safety);
    std::vector<RatingRecord> partial{rating("c1", "r1", {3, 3, 3, 3, 3}), missing};
    CHECK(error_code_of([&] { aggregate_ratings(partial); }) == ErrorCode::RaterCountMismatch);

    std::vector<RatingRecord> three{rating("c1", "r1", {3, 3, 3, 3, 3}), rating("c1", "r2", {3, 3, 3, 3, 3}),
                                    rating("c1", "r3", {3, 3, 3, 3, 3})};
    CHECK(error_code_of([&] { aggregate_ratings(three); }) == ErrorCode::RaterCountMismatch);

    std::vector<RatingRecord> out_of_range{rating("c1", "r1", {4, 3, 3, 3, 3}), rating("c1", "r2", {3, 3, 3, 3, 3})};
    CHECK(error_code_of([&] { aggregate_ratings(out_of_range); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("ratings percentages and subgroup means") {
    std::vector<RatingRecord> recs;
    // Accuracy consensus: 1, 2, 3, 3 -> 75% at least 2, 50% at least 3.
    const std::array<std::pair<int, int>, 4> acc{{{1, 3}, {2, 2}, {3, 3}, {3, 3}}};
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const auto id = "c" + std::to_string(i);
      const auto group = i < 2 ? "CFP" : "OCT";
      recs.push_back(rating(id, "a", {acc[i].first, 3, 3, 3, 3}, group));
      recs.push_back(rating(id, "b", {acc[i].second, 2, 3, 3, 3}, group));
    }
    auto s = aggregate_ratings(recs);
    const auto& a = s.dimensions.at(Dimension::Accuracy);
    CHECK(a.n == 4);
    CHECK(a.at_least_2 == 3);
    CHECK(a.pct_at_least_2 == 75.0);
    CHECK(a.pct_at_least_3 == 50.0);
    CHECK(s.dimensions.at(Dimension::Completeness).pct_at_least_3 == 0.0);
    // Totals: c0 = 1+2+9, c1 = 2+2+9, c2 = c3 = 3+2+9.
    CHECK(s.mean_total_by_subgroup.at("CFP") == 12.5);
    CHECK(s.mean_total_by_subgroup.at("OCT") == 14.0);
    CHECK(s.mean_total == 13.25);
  }

  TEST_CASE("checklist scoring") {
    auto rubric = ChecklistRubric::load(test::data_dir() / "rubric.json");
    CHECK(rubric.size() == ChecklistRubric::kReferenceSize);
    auto all = rubric.all_ids();
    CHECK(score_checklist(all, rubric, all) == 1.0);
    CHECK(score_checklist({}, rubric, all) == 0.0);

    std::set<std::string> hits;
    for (const auto& id : all) {
      if (hits.size() == 160) break;
      hits.insert(id);
    }
    CHECK(score_checklist(hits, rubric, all) == doctest::Approx(160.0 / 197.0));
    CHECK(std::abs(score_checklist(hits, rubric, all) - 0.8122) <= 1e-4);

    CHECK(error_code_of([&] { score_checklist({"NOPE"}, rubric, all); }) == ErrorCode::UnknownItemId);
    CHECK(error_code_of([&] { score_checklist({}, rubric, {}); }) == ErrorCode::InvalidArgument);

    auto dr = rubric.applicable_for("Diabetic Retinopathy");
    CHECK(dr.size() > rubric.applicable_for("no such condition").size());
    CHECK(error_code_of([&] { score_checklist({"C010"}, rubric, rubric.applicable_for("glaucoma")); }) ==
          ErrorCode::InvalidArgument);

    Json dup{{"items", {{{"item_id", "x"}, {"description", "a"}}, {{"item_id", "x"}, {"description", "b"}}}}};
    CHECK(error_code_of([&] { ChecklistRubric::from_json(dup); }) == ErrorCode::SchemaViolation);
  }

  TEST_CASE("checklist score is monotone in hits") {
    auto rubric = rubric_of(50);
    auto all = rubric.all_ids();
    std::vector<std::string> order(all.begin(), all.end());
    std::mt19937 rng(8);
    for (int iter = 0; iter < 20; ++iter) {
      std::shuffle(order.begin(), order.end(), rng);
      std::set<std::string> hits;
      double prev = score_checklist(hits, rubric, all);
      for (const auto& id : order) {
        hits.insert(id);
        double cur = score_checklist(hits, rubric, all);
        CHECK(cur >= prev);
        prev = cur;
      }
      CHECK(prev == 1.0);
    }
  }

  TEST_CASE("normal quantile agrees with boost") {
    for (double p : {1e-10, 1e-4, 0.01, 0.025, 0.2, 0.5, 0.8, 0.975, 0.99, 0.9999}) {
      CHECK(normal_quantile(p) == doctest::Approx(boost::math::quantile(boost::math::normal(), p)).epsilon(1e-12));
    }
  }

  TEST_CASE("Wilson interval against an independent oracle") {
    for (auto [s, n] : std::vector<std::pair<long long, long long>>{{942, 1005}, {1, 2}, {3, 17}, {50, 51}, {7, 1000}}) {
      for (double level : {0.8, 0.9, 0.95, 0.99}) {
        auto got = wilson_interval(s, n, level);
        auto want = wilson_oracle(double(s), double(n), level);
        CHECK(std::abs(got.lo - want.lo) <= 1e-9);
        CHECK(std::abs(got.hi - want.hi) <= 1e-9);
        const double p = double(s) / double(n);
        CHECK(got.lo <= p);
        CHECK(p <= got.hi);
        CHECK(got.lo >= 0.0);
        CHECK(got.hi <= 1.0);
      }
    }
    CHECK(wilson_interval(0, 10).lo == 0.0);
    CHECK(wilson_interval(10, 10).hi == 1.0);
    CHECK(error_code_of([] { wilson_interval(11, 10); }) == ErrorCode::InvalidCounts);
    CHECK(error_code_of([] { wilson_interval(0, 0); }) == ErrorCode::InvalidCounts);
    CHECK(error_code_of([] { wilson_interval(-1, 10); }) == ErrorCode::InvalidCounts);
    CHECK(error_code_of([] { wilson_interval(1, 10, 1.0); }) == ErrorCode::InvalidCounts);
  }

  TEST_CASE("Wilson bounds are monotone in successes") {
    for (long long n : {1, 7, 30, 1005}) {
      Interval prev = wilson_interval(0, n);
      for (long long s = 1; s <= n; ++s) {
        auto cur = wilson_interval(s, n);
        CHECK(cur.lo >= prev.lo);
        CHECK(cur.hi >= prev.hi);
        prev = cur;
      }
    }
  }

  TEST_CASE("Cohen's kappa against an independent oracle") {
    std::vector<std::vector<double>> t{{20, 5}, {10, 15}};
    auto k = cohen_kappa(t);
    CHECK(std::abs(k.kappa - kappa_oracle(t)) <= 1e-9);
    CHECK(std::abs(k.kappa - 0.4) <= 1e-12);  // p_o = 0.7, p_e = 0.5
    CHECK(k.observed == doctest::Approx(0.7));
    CHECK(k.expected == doctest::Approx(0.5));

    CHECK(cohen_kappa({{10, 0}, {0, 10}}).kappa == 1.0);
    CHECK(cohen_kappa({{25, 25}, {25, 25}}).kappa == 0.0);

    auto degenerate = cohen_kappa({{10, 0}, {0, 0}});
    CHECK(degenerate.degenerate);
    CHECK(std::isnan(degenerate.kappa));

    CHECK(error_code_of([] { cohen_kappa({{1, 2}}); }) == ErrorCode::InvalidCounts);
    CHECK(error_code_of([] { cohen_kappa({{1, -2}, {1, 1}}); }) == ErrorCode::InvalidCounts);
    CHECK(error_code_of([] { cohen_kappa({{0, 0}, {0, 0}}); }) == ErrorCode::InvalidCounts);
    CHECK(error_code_of([] { cohen_kappa({}); }) == ErrorCode::InvalidCounts);
  }

  TEST_CASE("kappa is invariant under simultaneous row and column permutation") {
    std::mt19937 rng(12);
    for (int iter = 0; iter < 200; ++iter) {
      const std::size_t k = 2 + rng() % 4;
      std::vector<std::vector<double>> t(k, std::vector<double>(k));
      for (auto& row : t)
        for (auto& v : row) v = double(rng() % 20);
      t[0][0] += 1.0;
      std::vector<std::size_t> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<std::vector<double>> p(k, std::vector<double>(k));
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) p[i][j] = t[perm[i]][perm[j]];
      auto a = cohen_kappa(t), b = cohen_kappa(p);
      CHECK(a.degenerate == b.degenerate);
      if (!a.degenerate) {
        CHECK(std::abs(a.kappa - b.kappa) <= 1e-12);
        CHECK(std::abs(a.kappa - kappa_oracle(t)) <= 1e-9);
      }
    }
  }
}
