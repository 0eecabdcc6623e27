#include <doctest.h>

#include <algorithm>
#include <random>

#include "ocuflow/registry/registry.hpp"
#include "support/support.hpp"

using namespace ocuflow;
using ocuflow::test::error_code_of;

namespace {

const Json& reference_catalog() {
  static const Json doc = test::read_json(test::data_dir() / "catalog.json");
  return doc;
}

Json reference_tool(const std::string& id) {
  for (const auto& t : reference_catalog()["tools"]) {
    if (t["tool_id"] == id) return t;
  }
  throw std::runtime_error("no tool " + id);
}

Json catalog_of(std::vector<Json> tools) {
  return Json{{"schema_version", "1.0"}, {"tools", std::move(tools)}};
}

Json tool_at(const std::string& base, const std::string& id, int tier) {
  auto t = reference_tool(base);
  t["tool_id"] = id;
  t["tier"] = tier;
  return t;
}

std::vector<std::string> ids(const std::vector<ToolPtr>& tools) {
  std::vector<std::string> out;
  for (const auto& t : tools) out.push_back(t->tool_id);
  return out;
}

}  // namespace

TEST_SUITE("registry") {
  TEST_CASE("reference catalog tier cardinalities") {
    auto reg = Registry::load_catalog(reference_catalog());
    CHECK(reg.size() == 53);
    auto sizes = reg.tier_sizes();
    CHECK(std::vector<std::size_t>(sizes.begin(), sizes.end()) == std::vector<std::size_t>{5, 14, 35, 46, 53});
    CHECK(reg.tier_subset(5).size() == reg.size());
    CHECK(reg.tier_subset(1).ids() ==
          std::vector<std::string>{"general_screener", "laterality_classifier", "modality_classifier",
                                   "quality_assessor", "referral_triage"});
    CHECK(error_code_of([&] { reg.tier_subset(0); }) == ErrorCode::TierOutOfRange);
    CHECK(error_code_of([&] { reg.tier_subset(6); }) == ErrorCode::TierOutOfRange);
  }

  TEST_CASE("tier subsets are nested and sorted") {
    auto reg = Registry::load_catalog(reference_catalog());
    for (int t = kMinTier; t < kMaxTier; ++t) {
      auto lower = reg.tier_subset(t).ids();
      auto upper = reg.tier_subset(t + 1).ids();
      CHECK(std::is_sorted(lower.begin(), lower.end()));
      CHECK(std::includes(upper.begin(), upper.end(), lower.begin(), lower.end()));
    }
  }

  TEST_CASE("loader rejects duplicates, gaps, malformed descriptors, and unknown versions") {
    std::vector<Json> tools;
    for (int t = 1; t <= 5; ++t) tools.push_back(tool_at("dr_grader", "tool" + std::to_string(t), t));
    CHECK_NOTHROW(Registry::load_catalog(catalog_of(tools)));

    auto dup = tools;
    dup.push_back(tool_at("dr_grader", "tool1", 2));
    CHECK(error_code_of([&] { Registry::load_catalog(catalog_of(dup)); }) == ErrorCode::DuplicateToolId);

    auto single = catalog_of({tool_at("dr_grader", "dr_grader", 1)});
    CHECK(error_code_of([&] { Registry::load_catalog(single); }) == ErrorCode::TierGap);
    auto sparse = Registry::load_catalog(single, LoadOptions{.allow_sparse_tiers = true});
    CHECK(sparse.size() == 1);
    for (int t = 1; t <= 5; ++t) CHECK(sparse.tier_subset(t).size() == 1);

    auto bad_tier = tools;
    bad_tier[0]["tier"] = 7;
    CHECK(error_code_of([&] { Registry::load_catalog(catalog_of(bad_tier)); }) == ErrorCode::MalformedDescriptor);

    auto no_modalities = tools;
    no_modalities[0]["modalities"] = Json::array();
    CHECK(error_code_of([&] { Registry::load_catalog(catalog_of(no_modalities)); }) ==
          ErrorCode::MalformedDescriptor);

    auto bad_schema = tools;
    bad_schema[0]["output_schema"] = Json{{"type", "tensor"}};
    try {
      Registry::load_catalog(catalog_of(bad_schema));
      FAIL("expected MalformedDescriptor");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedDescriptor);
      CHECK(e.detail().rfind("tool1", 0) == 0);
    }

    auto empty_locator = tools;
    empty_locator[0]["backend"]["locator"] = "";
    CHECK(error_code_of([&] { Registry::load_catalog(catalog_of(empty_locator)); }) ==
          ErrorCode::MalformedDescriptor);

    auto v2 = catalog_of(tools);
    v2["schema_version"] = "2.0";
    CHECK(error_code_of([&] { Registry::load_catalog(v2); }) == ErrorCode::UnsupportedSchemaVersion);
  }

  TEST_CASE("resolve orders by specificity then id") {
    auto reg = Registry::load_catalog(reference_catalog());
    const auto& mods = reg.modalities();

    auto dr = ids(reg.resolve({.modality = mods.parse("CFP"), .condition = "diabetic retinopathy"}));
    REQUIRE(dr.size() >= 5);
    CHECK(dr.front() == "dr_grader");
    for (const char* seg : {"cfp_ma_seg", "cfp_hemorrhage_seg", "cfp_exudate_seg", "cfp_cws_seg"}) {
      auto it = std::find(dr.begin(), dr.end(), seg);
      CHECK(it != dr.end());
    }

    auto unknown = ids(reg.resolve({.modality = Modality::unknown()}));
    CHECK(unknown == std::vector<std::string>{"modality_classifier"});

    auto cvd = ids(reg.resolve({.task = TaskType::Regression, .condition = "cardiovascular risk"}));
    REQUIRE_FALSE(cvd.empty());
    CHECK(cvd.front() == "cvd_risk_regressor");
    CHECK(std::find(cvd.begin(), cvd.end(), "cvd_risk_regressor") != cvd.end());

    CHECK(reg.resolve({.condition = "no such condition"}).empty());
  }

  TEST_CASE("resolve is deterministic and every hit satisfies the query") {
    auto reg = Registry::load_catalog(reference_catalog());
    const auto& mods = reg.modalities();
    const std::vector<std::string> mod_codes{"CFP", "OCT", "FFA", "ICGA", "UWF-SLO", "SLO", "FAF"};
    const std::vector<std::string> conditions{"diabetic retinopathy", "glaucoma", "retinal vein occlusion",
                                              "macular hole", "cardiovascular risk"};
    std::mt19937 rng(5);
    for (int i = 0; i < 200; ++i) {
      ResolveQuery q;
      if (rng() % 2) q.modality = mods.parse(mod_codes[rng() % mod_codes.size()]);
      if (rng() % 2) q.condition = conditions[rng() % conditions.size()];
      if (rng() % 3 == 0) q.task = static_cast<TaskType>(rng() % 6);
      auto a = reg.resolve(q);
      CHECK(ids(a) == ids(reg.resolve(q)));
      for (const auto& t : a) {
        if (q.modality) CHECK(t->accepts_modality(*q.modality));
        if (q.condition) CHECK(t->addresses(*q.condition));
        if (q.task) CHECK(t->task == *q.task);
      }
    }
  }

  TEST_CASE("validate_io reports field paths") {
    auto reg = Registry::load_catalog(reference_catalog());
    const auto& screener = *reg.find("general_screener");

    auto missing = validate_io(screener, Json{{"threshold_used", 0.3}}, Direction::Output);
    CHECK_FALSE(missing.ok);
    REQUIRE_FALSE(missing.violations.empty());
    CHECK(missing.violations[0].path == "predictions");

    Json high{{"predictions", {{{"label", "x"}, {"probability", 1.2}}}}, {"threshold_used", 0.3}};
    auto range = validate_io(screener, high, Direction::Output);
    CHECK_FALSE(range.ok);
    REQUIRE_FALSE(range.violations.empty());
    CHECK(range.violations[0].message == "probability out of [0,1]");

    Json mh{{"lesions", {{{"lesion_type", "macular hole"}, {"count", 1}, {"areas", {19829.0}}}}}};
    auto ok = validate_io(*reg.find("oct_mh_seg"), mh, Direction::Output);
    CHECK(ok.ok);
    CHECK(ok.violations.empty());

    Json inconsistent{{"lesions", {{{"lesion_type", "macular hole"}, {"count", 2}, {"areas", {19829.0}}}}}};
    CHECK_FALSE(validate_io(*reg.find("oct_mh_seg"), inconsistent, Direction::Output).ok);

    CHECK(validate_io(screener, Json{{"image_id", "a"}}, Direction::Input).ok);
    CHECK_FALSE(validate_io(screener, Json{{"image_id", ""}}, Direction::Input).ok);
  }

  TEST_CASE("validate_io is total and accepted payloads re-validate after serialization") {
    auto reg = Registry::load_catalog(reference_catalog());
    std::mt19937_64 rng(17);
    auto random_json = [&](auto&& self, int depth) -> Json {
      switch (rng() % (depth > 2 ? 5 : 8)) {
        case 0: return nullptr;
        case 1: return static_cast<double>(static_cast<int>(rng() % 400) - 100) / 100.0;
        case 2: return static_cast<int>(rng() % 20) - 5;
        case 3: return std::string(rng() % 3, 'a');
        case 4: return rng() % 2 == 0;
        case 5: {
          Json a = Json::array();
          for (int i = 0, n = rng() % 4; i < n; ++i) a.push_back(self(self, depth + 1));
          return a;
        }
        default: {
          static const std::vector<std::string> keys{"predictions", "label", "probability", "threshold_used",
                                                     "lesions", "count", "areas", "lesion_type", "crae",
                                                     "crve", "value", "quantity", "hits"};
          Json o = Json::object();
          for (int i = 0, n = rng() % 4; i < n; ++i) o[keys[rng() % keys.size()]] = self(self, depth + 1);
          return o;
        }
      }
    };
    std::size_t accepted = 0;
    for (int i = 0; i < 3000; ++i) {
      const auto& tool = *reg.tools()[rng() % reg.size()];
      auto payload = random_json(random_json, 0);
      ValidationResult r;
      REQUIRE_NOTHROW(r = validate_io(tool, payload, Direction::Output));
      CHECK(r.ok == r.violations.empty());
      if (r.ok) {
        ++accepted;
        auto again = validate_io(tool, Json::parse(r.normalized.dump()), Direction::Output);
        CHECK(again.ok);
        CHECK(again.normalized == r.normalized);
      }
    }
    CHECK(accepted > 0);
  }

  TEST_CASE("usage conditions evaluate three-valued") {
    UsageCondition known{"modality", UsageCondition::Op::Known, {}};
    UsageCondition is_cfp{"modality", UsageCondition::Op::Equals, {"CFP"}};
    UsageCondition not_oct{"modality", UsageCondition::Op::NotIn, {"OCT"}};
    CHECK(known.evaluate({}) == Truth::Unknown);
    CHECK(known.evaluate({{"modality", "CFP"}}) == Truth::True);
    CHECK(is_cfp.evaluate({{"modality", "OCT"}}) == Truth::False);
    CHECK(not_oct.evaluate({{"modality", "CFP"}}) == Truth::True);
    CHECK(evaluate_all({known, is_cfp}, {{"modality", "CFP"}}) == Truth::True);
    CHECK(evaluate_all({known, is_cfp}, {{"modality", "OCT"}}) == Truth::False);
    CHECK(evaluate_all({is_cfp}, {}) == Truth::Unknown);
  }

  TEST_CASE("descriptors round-trip through their document form") {
    for (const auto& t : reference_catalog()["tools"]) {
      auto d = parse_descriptor(t);
      auto again = parse_descriptor(to_json(d));
      CHECK(to_json(again) == to_json(d));
    }
  }

  TEST_CASE("catalog hash is stable and content sensitive") {
    auto a = Registry::load_catalog(reference_catalog());
    auto b = Registry::load_catalog(reference_catalog());
    CHECK(a.catalog_hash() == b.catalog_hash());
    auto changed = reference_catalog();
    changed["tools"][0]["display_name"] = "renamed";
    CHECK(Registry::load_catalog(changed).catalog_hash() != a.catalog_hash());
  }
}
