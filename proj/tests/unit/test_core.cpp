#include <doctest.h>

#include <algorithm>
#include <random>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/json_io.hpp"
#include "ocuflow/core/model.hpp"
#include "support/support.hpp"

using namespace ocuflow;
using ocuflow::test::error_code_of;

TEST_SUITE("core") {
  TEST_CASE("rank_predictions keeps labels above threshold in order") {
    auto out = rank_predictions({{"RVO", 0.936}, {"CRVO", 0.878}, {"normal", 0.01}}, 0.3);
    REQUIRE(out.predictions().size() == 2);
    CHECK(out.predictions()[0] == RankedPrediction{"RVO", 0.936});
    CHECK(out.predictions()[1] == RankedPrediction{"CRVO", 0.878});
    CHECK(out.threshold_used() == 0.3);
  }

  TEST_CASE("rank_predictions single certain label") {
    auto out = rank_predictions({{"normal", 1.0}}, 0.3);
    REQUIRE(out.predictions().size() == 1);
    CHECK(out.top() == RankedPrediction{"normal", 1.0});
  }

  TEST_CASE("rank_predictions keeps sub-threshold top-1 and breaks ties by label") {
    auto out = rank_predictions({{"A", 0.2}, {"B", 0.2}, {"C", 0.1}}, 0.3);
    REQUIRE(out.predictions().size() == 1);
    CHECK(out.top() == RankedPrediction{"A", 0.2});
  }

  TEST_CASE("rank_predictions errors") {
    CHECK(error_code_of([] { rank_predictions({}, 0.3); }) == ErrorCode::EmptyInput);
    CHECK(error_code_of([] { rank_predictions({{"a", 1.2}}, 0.3); }) == ErrorCode::InvalidProbability);
    CHECK(error_code_of([] { rank_predictions({{"a", -0.1}}, 0.3); }) == ErrorCode::InvalidProbability);
  }

  TEST_CASE("rank_predictions matches a brute-force sorter") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> prob(0.0, 1.0);
    for (int iter = 0; iter < 500; ++iter) {
      std::map<std::string, double> raw;
      const int n = 1 + static_cast<int>(rng() % 8);
      for (int i = 0; i < n; ++i) {
        // Coarse grid so ties actually occur.
        raw["L" + std::to_string(rng() % 12)] = std::round(prob(rng) * 10.0) / 10.0;
      }
      const double threshold = std::round(prob(rng) * 10.0) / 10.0;

      std::vector<std::pair<std::string, double>> all(raw.begin(), raw.end());
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      std::vector<RankedPrediction> expected;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (i == 0 || all[i].second >= threshold) expected.push_back({all[i].first, all[i].second});
      }
      auto out = rank_predictions(raw, threshold);
      REQUIRE(out.predictions() == expected);
      for (std::size_t i = 1; i < out.predictions().size(); ++i) {
        CHECK(out.predictions()[i - 1].probability >= out.predictions()[i].probability);
        CHECK(out.predictions()[i].probability >= threshold);
      }
    }
  }

  TEST_CASE("ClassificationOutput rejects unordered or sub-threshold tails") {
    CHECK_THROWS_AS(ClassificationOutput({}, 0.3), Error);
    CHECK_THROWS_AS(ClassificationOutput({{"a", 0.4}, {"b", 0.5}}, 0.3), Error);
    CHECK_THROWS_AS(ClassificationOutput({{"a", 0.5}, {"b", 0.2}}, 0.3), Error);
    CHECK_NOTHROW(ClassificationOutput({{"a", 0.1}}, 0.3));
  }

  TEST_CASE("lesion_stats summarizes areas") {
    std::vector<double> fluid{1.0, 572.5, 12.0, 40.5, 3.0, 88.0, 150.25, 9.0, 61.0, 2.5, 300.0, 17.0};
    auto s = lesion_stats("retinal fluid", fluid);
    CHECK(s.count == 12);
    CHECK(*s.area_min == 1.0);
    CHECK(*s.area_max == 572.5);
    CHECK(*s.area_min <= *s.area_mean);
    CHECK(*s.area_mean <= *s.area_max);

    auto mh = lesion_stats("MH", {19829.0});
    CHECK(mh.count == 1);
    CHECK(*mh.area_min == 19829.0);
    CHECK(*mh.area_max == 19829.0);
    CHECK(*mh.area_mean == 19829.0);

    auto none = lesion_stats("drusen", {});
    CHECK(none.count == 0);
    CHECK_FALSE(none.area_min.has_value());
    CHECK_FALSE(none.area_max.has_value());
    CHECK_FALSE(none.area_mean.has_value());

    CHECK(error_code_of([] { lesion_stats("x", {1.0, -0.5}); }) == ErrorCode::NegativeArea);
  }

  TEST_CASE("lesion_stats is permutation invariant") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> area(0.0, 5000.0);
    for (int iter = 0; iter < 200; ++iter) {
      std::vector<double> areas(1 + rng() % 30);
      for (auto& a : areas) a = std::round(area(rng) * 4.0) / 4.0;
      auto base = lesion_stats("hemorrhage", areas);
      std::shuffle(areas.begin(), areas.end(), rng);
      CHECK(lesion_stats("hemorrhage", areas) == base);
    }
  }

  TEST_CASE("VesselMetrics enforces the ratio invariant") {
    auto m = VesselMetrics::from_calibers(9.16, 17.53, 14.43, 1.746);
    CHECK(m.avr() == doctest::Approx(9.16 / 17.53).epsilon(1e-12));
    CHECK(m.avr_reported() == doctest::Approx(0.523).epsilon(1e-12));
    CHECK_NOTHROW(VesselMetrics(9.16, 17.53, 0.523, 14.43, 1.746, std::nullopt));
    CHECK_THROWS_AS(VesselMetrics(9.16, 17.53, 0.53, 14.43, 1.746, std::nullopt), Error);
    CHECK(error_code_of([] { VesselMetrics::from_calibers(1.0, 0.0, 10.0, 1.5); }) ==
          ErrorCode::ZeroVenularCaliber);
    CHECK_THROWS_AS(VesselMetrics::from_calibers(1.0, 2.0, 120.0, 1.5), Error);
  }

  TEST_CASE("modality catalog parses unknown codes explicitly") {
    const auto& cat = ModalityCatalog::standard();
    CHECK(cat.parse("cfp").code() == "CFP");
    CHECK(cat.parse("UWF-SLO").code() == "UWF-SLO");
    CHECK(cat.parse("thermal").is_unknown());
    CHECK(cat.parse("thermal").display() == "Unknown");

    ModalityCatalog extended;
    extended.extend("OCTA", {"oct angiography"});
    CHECK(extended.parse("OCT Angiography").code() == "OCTA");
    CHECK_THROWS_AS(extended.extend("OCTA"), Error);
    while (extended.size() < ModalityCatalog::kMaxModalities) extended.extend("X" + std::to_string(extended.size()));
    CHECK_THROWS_AS(extended.extend("overflow"), Error);
  }

  TEST_CASE("parse_case accepts a minimal case and reports schema paths") {
    Json doc{{"case_id", "c1"},
             {"query", "What is the diagnosis?"},
             {"images", {{{"image_id", "img1"}, {"uri", "fixture://c1/img1"}, {"modality_hint", "CFP"}}}}};
    auto c = parse_case(doc);
    CHECK(c.case_id == "c1");
    REQUIRE(c.images.size() == 1);
    CHECK(c.images[0].modality_hint->code() == "CFP");

    Json missing = doc;
    missing.erase("case_id");
    try {
      parse_case(missing);
      FAIL("expected SchemaViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaViolation);
      CHECK(e.detail().find("case_id") != std::string::npos);
    }

    Json dup = doc;
    dup["images"].push_back({{"image_id", "img1"}, {"uri", "fixture://c1/other"}});
    CHECK(error_code_of([&] { parse_case(dup); }) == ErrorCode::DuplicateImageId);

    Json odd = doc;
    odd["images"][0]["modality_hint"] = "thermal";
    CHECK(parse_case(odd).images[0].modality_hint->is_unknown());

    Json empty{{"case_id", "c2"}, {"query", ""}, {"images", Json::array()}};
    CHECK(error_code_of([&] { parse_case(empty); }) == ErrorCode::SchemaViolation);
  }

  TEST_CASE("case documents round-trip") {
    Json doc{{"case_id", "c1"},
             {"query", "q"},
             {"images", {{{"image_id", "i"}, {"uri", "u"}, {"laterality_hint", "OS"}}}},
             {"ground_truth", {{"diagnosis", "glaucoma"}, {"expected_tools", {"a", "b"}}, {"modality", "CFP"}}}};
    auto c = parse_case(doc);
    auto again = parse_case(to_json(c));
    CHECK(to_json(again) == to_json(c));
    CHECK(again.images[0].laterality_hint == Laterality::OS);
    CHECK(again.ground_truth->expected_tools == std::vector<std::string>{"a", "b"});
  }

  TEST_CASE("structured reports round-trip losslessly") {
    StructuredReport r;
    r.modality = "SLO (98.8%)";
    r.image_quality = "gradable";
    r.laterality = "OS (87.1%)";
    r.diagnosis = "central retinal vein occlusion (87.8%)";
    r.evidence = {{"s05", "retinal vein occlusion", {{"vascular", "vascular#0000"}}}, {"s06", "hemorrhage n=4", {}}};
    r.recommendations = "refer";
    r.flags = {"low_confidence"};
    CHECK_NOTHROW(validate_report(r));
    CHECK(report_from_json(to_json(r)) == r);

    auto broken = to_json(r);
    broken["laterality"] = "";
    CHECK(error_code_of([&] { report_from_json(broken); }) == ErrorCode::SchemaViolation);
  }
}
