#include <doctest.h>

#include <algorithm>
#include <set>

#include "ocuflow/orchestrator/orchestrator.hpp"
#include "support/support.hpp"

using namespace ocuflow;
using ocuflow::test::error_code_of;

namespace {

const Orchestrator& reference() { return *test::reference_runtime().orchestrator; }

std::vector<std::string> invoked_sequence(const ReasoningTrace& trace) {
  std::vector<std::string> out;
  for (const auto& e : trace.events()) {
    if (e.kind == EventKind::Invocation) out.push_back(e.payload["tool_id"]);
  }
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string evidence_text(const StructuredReport& r) {
  std::string all;
  for (const auto& e : r.evidence) all += e.text + "\n";
  return all;
}

// Orchestrator over the reference catalog with a caller-supplied fixture store.
struct CustomStack {
  std::shared_ptr<const Registry> registry = test::reference_runtime().registry;
  std::shared_ptr<FixtureStore> store;
  std::shared_ptr<const ToolInvoker> invoker;
  std::unique_ptr<Orchestrator> orchestrator;

  explicit CustomStack(std::shared_ptr<FixtureStore> s, std::shared_ptr<PlannerProvider> planner = nullptr,
                       OrchestratorConfig config = {})
      : store(std::move(s)) {
    auto backends = make_standard_backends(store);
    kb::register_knowledge_backend(*backends, test::reference_runtime().index);
    invoker = std::make_shared<const ToolInvoker>(backends);
    orchestrator = std::make_unique<Orchestrator>(registry, invoker, config, std::move(planner));
  }
};

Json classification(std::vector<std::pair<std::string, double>> preds) {
  Json p = Json::array();
  for (auto& [l, v] : preds) p.push_back({{"label", l}, {"probability", v}});
  return Json{{"predictions", p}, {"threshold_used", 0.3}};
}

ClinicalCase single_image_case(const std::string& id, const std::string& query = "What is the diagnosis?") {
  ClinicalCase c;
  c.case_id = id;
  c.query = query;
  c.images.push_back({id + "_img", "fixture://" + id, std::nullopt, std::nullopt});
  return c;
}

// Checks the structural trace invariants every completed run must satisfy.
void check_trace_invariants(const RunOutcome& out, const Toolset& toolset, int max_rounds) {
  auto events = out.trace->events();
  REQUIRE_FALSE(events.empty());
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i);
  for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i - 1].ts <= events[i].ts);

  std::vector<std::string> stages;
  std::size_t terminal = 0;
  for (const auto& e : events) {
    if (e.kind == EventKind::StageEnter) stages.push_back(e.payload["stage"]);
    if (is_terminal(e.kind)) ++terminal;
    if (e.kind == EventKind::Invocation) {
      CHECK(e.payload.contains("result"));
      CHECK(toolset.contains(e.payload["tool_id"].get<std::string>()));
    }
  }
  CHECK(terminal == 1);
  CHECK(is_terminal(events.back().kind));
  if (out.report) {
    CHECK(events.back().kind == EventKind::FinalReport);
    CHECK(stages == std::vector<std::string>{"interpret", "plan", "execute", "integrate", "respond"});
    validate_report(*out.report);
    for (const auto& ev : out.report->evidence) {
      const auto* rec = out.state.find(ev.step_id);
      REQUIRE_MESSAGE(rec != nullptr, ev.step_id);
      CHECK(rec->ok());
      for (const auto& cit : ev.citations) CHECK(test::reference_runtime().index->find(cit.passage_id) != nullptr);
    }
  }
  CHECK(out.revision_rounds <= max_rounds);
  CHECK(out.plan.is_dag());

  // No step ran before its binding sources succeeded; skipped steps stay out of provenance.
  std::set<std::string> finished_ok;
  for (const auto& rec : out.state.records) {
    if (rec.state != StepState::Skipped) {
      for (const auto& dep : rec.step.dependencies()) CHECK(finished_ok.contains(dep));
    }
    if (rec.ok()) finished_ok.insert(rec.step.step_id);
  }
  for (const auto& d : out.findings.diagnosis) {
    const auto* rec = out.state.find(d.step_id);
    REQUIRE(rec != nullptr);
    CHECK(rec->ok());
  }
  for (const auto& l : out.findings.lesions) CHECK(out.state.find(l.step_id)->ok());
}

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("interpret_query maps keywords onto workflows") {
    auto drusen = interpret_query(single_image_case("d", "Count, label, and measure the diameter of all the drusen"));
    CHECK(drusen.workflow == Workflow::QuantitativeAnalysis);
    CHECK(drusen.param("lesion") == "drusen");

    auto cvd = interpret_query(single_image_case(
        "c", "predict the risk of developing cardiovascular disease within the next 5 years"));
    CHECK(cvd.workflow == Workflow::CrossSpecialtyLongitudinal);
    CHECK(cvd.param("horizon") == "5y");

    auto empty = interpret_query(single_image_case("e", ""));
    CHECK(empty.workflow == Workflow::HierarchicalDecision);

    auto globe = interpret_query(single_image_case("g", "what does the eyeball look like (generate the 3D eye shape)?"));
    CHECK(globe.workflow == Workflow::MedicalEducation);
    CHECK(globe.param("generate") == "3d");

    auto claim = interpret_query(single_image_case("m", "I have macular disease. What should I do?"));
    CHECK(claim.param("claimed_condition").has_value());
  }

  TEST_CASE("initial plan for the CRVO case is the screening chain") {
    const auto& rt = test::reference_runtime();
    auto c = test::reference_case("crvo_uwf");
    auto intent = interpret_query(c);
    auto toolset = rt.registry->tier_subset(5);
    OrchestratorConfig cfg;
    auto plan = build_plan(PlanningContext{c, intent, toolset, cfg, rt.registry->modalities()});
    REQUIRE(plan.size() >= 4);
    std::vector<std::string> head;
    for (std::size_t i = 0; i < 4; ++i) head.push_back(plan.steps()[i].tool_id);
    CHECK(head == std::vector<std::string>{"modality_classifier", "quality_assessor", "laterality_classifier",
                                           "general_screener"});
    CHECK(plan.is_dag());
    for (const auto& s : plan.steps()) {
      CHECK(s.origin == StepOrigin::Initial);
      auto tool = toolset.find(s.tool_id);
      REQUIRE(tool);
      CHECK(tool->function != ToolFunction::Specialist);
      CHECK(tool->function != ToolFunction::Segmentation);
    }
  }

  TEST_CASE("education intent plans generation and retrieval") {
    const auto& rt = test::reference_runtime();
    auto c = test::reference_case("myopia_cfp");
    auto intent = interpret_query(c);
    auto toolset = rt.registry->tier_subset(5);
    OrchestratorConfig cfg;
    auto plan = build_plan(PlanningContext{c, intent, toolset, cfg, rt.registry->modalities()});
    std::vector<std::string> tools;
    for (const auto& s : plan.steps()) tools.push_back(s.tool_id);
    CHECK(contains(tools, "eye_globe_3d"));
    CHECK(contains(tools, "textbook_rag"));
  }

  TEST_CASE("text-only query plans retrieval only") {
    const auto& rt = test::reference_runtime();
    auto c = test::reference_case("text_only_csc");
    auto intent = interpret_query(c);
    auto toolset = rt.registry->tier_subset(5);
    OrchestratorConfig cfg;
    auto plan = build_plan(PlanningContext{c, intent, toolset, cfg, rt.registry->modalities()});
    REQUIRE(plan.size() == 1);
    CHECK(plan.steps()[0].tool_id == "textbook_rag");

    auto out = reference().run(c, 5);
    REQUIRE(out.report);
    CHECK(invoked_sequence(*out.trace) == std::vector<std::string>{"textbook_rag"});
    check_trace_invariants(out, toolset, 2);
  }

  TEST_CASE("empty toolset raises NoApplicableTools; missing workflow tools degrade with a warning") {
    const auto& rt = test::reference_runtime();
    auto c = test::reference_case("drusen_cfp");
    auto intent = interpret_query(c);
    OrchestratorConfig cfg;
    Toolset empty;
    CHECK(error_code_of([&] { build_plan(PlanningContext{c, intent, empty, cfg, rt.registry->modalities()}); }) ==
          ErrorCode::NoApplicableTools);

    auto tier1 = rt.registry->tier_subset(1);
    auto plan = build_plan(PlanningContext{c, intent, tier1, cfg, rt.registry->modalities()});
    CHECK_FALSE(plan.warnings.empty());

    auto out = reference().run(c, 1);
    REQUIRE(out.report);
    CHECK(out.trace->count(EventKind::Warning) >= 1);
    check_trace_invariants(out, tier1, 2);
  }

  TEST_CASE("CRVO run surfaces modality, laterality, and refined diagnosis") {
    auto c = test::reference_case("crvo_uwf");
    auto out = reference().run(c, 5);
    REQUIRE(out.report);
    const auto& f = out.findings;
    REQUIRE(f.modality);
    CHECK(f.modality->top.label == "SLO");
    CHECK(f.modality->top.probability == doctest::Approx(0.988));
    REQUIRE(f.laterality);
    CHECK(f.laterality->top.label == "OS");
    CHECK(f.laterality->top.probability == doctest::Approx(0.871));
    REQUIRE_FALSE(f.diagnosis.empty());
    CHECK(f.diagnosis[0].label == "central retinal vein occlusion");
    CHECK(f.diagnosis[0].probability == doctest::Approx(0.878));
    CHECK(f.diagnosis[0].tool_id == "rvo_classifier");
    CHECK(f.diagnosis[0].refines == "retinal vein occlusion");
    CHECK(f.conflicts.empty());

    auto seq = invoked_sequence(*out.trace);
    auto pos = [&](const std::string& t) { return std::find(seq.begin(), seq.end(), t) - seq.begin(); };
    CHECK(pos("modality_classifier") < pos("quality_assessor"));
    CHECK(pos("quality_assessor") < pos("laterality_classifier"));
    CHECK(pos("laterality_classifier") < pos("general_screener"));
    CHECK(pos("general_screener") < pos("rvo_classifier"));
    CHECK(pos("rvo_classifier") < pos("uwf_hemorrhage_seg"));
    check_trace_invariants(out, test::reference_runtime().registry->tier_subset(5), 2);
  }

  TEST_CASE("identical inputs give byte-identical traces") {
    for (const auto* name : {"crvo_uwf", "pdr_cfp", "conflict_amd_cfp", "cvd_cfp"}) {
      auto c = test::reference_case(name);
      auto a = reference().run(c, 5);
      auto b = reference().run(c, 5);
      CHECK(a.trace->serialize() == b.trace->serialize());
    }
  }

  TEST_CASE("specialist rule on DR screening") {
    auto out = reference().run(test::reference_case("npdr_cfp"), 5);
    auto seq = invoked_sequence(*out.trace);
    for (const auto* t : {"dr_grader", "cfp_ma_seg", "cfp_hemorrhage_seg", "cfp_exudate_seg"}) CHECK(contains(seq, t));
    for (const auto& rec : out.state.records) {
      if (rec.step.tool_id == "dr_grader") CHECK(rec.step.origin == StepOrigin::Revision);
    }
  }

  TEST_CASE("PDR specialist agrees with DR screening: no conflict, lesion evidence reported") {
    auto out = reference().run(test::reference_case("pdr_cfp"), 5);
    REQUIRE(out.report);
    CHECK(out.findings.conflicts.empty());
    CHECK(out.trace->count(EventKind::ConflictDetected) == 0);
    REQUIRE_FALSE(out.findings.diagnosis.empty());
    CHECK(out.findings.diagnosis[0].label == "proliferative diabetic retinopathy");
    CHECK(out.findings.diagnosis[0].probability == doctest::Approx(0.637));

    auto text = evidence_text(*out.report);
    for (const auto* needle : {"microaneurysm (n=17", "hemorrhage (n=27", "hard exudate (n=18", "cotton wool spot (n=3"}) {
      CHECK_MESSAGE(text.find(needle) != std::string::npos, needle);
    }
    // Segmenters on the generated FFA image run once each.
    std::map<std::pair<std::string, std::string>, int> runs;
    for (const auto& rec : out.state.records) ++runs[{rec.step.tool_id, rec.image_id}];
    for (const auto& [key, n] : runs) {
      if (key.first != "textbook_rag") CHECK_MESSAGE(n == 1, std::string(key.first + "@" + key.second));
    }
  }

  TEST_CASE("misleading claim triggers the verification panel and a normal report") {
    auto out = reference().run(test::reference_case("misleading_cfp"), 5);
    REQUIRE(out.report);
    auto seq = invoked_sequence(*out.trace);
    for (const auto* t : {"amd_stager", "dr_grader", "glaucoma_risk"}) CHECK(contains(seq, t));
    CHECK(out.findings.diagnosis[0].label == "normal");
    CHECK(out.report->diagnosis.find("normal") == 0);
    CHECK(out.report->diagnosis.find("macular disease") != std::string::npos);
    CHECK(out.report->recommendations.find("routine follow-up; consult if symptomatic") != std::string::npos);
  }

  TEST_CASE("artifact-laden image stays gradable with 68 artifacts and a normal diagnosis") {
    auto out = reference().run(test::reference_case("artifact_cfp"), 5);
    REQUIRE(out.findings.quality);
    CHECK(out.findings.quality->label == "gradable_with_artifacts");
    CHECK(out.findings.quality->gradable);
    CHECK(out.findings.quality->artifact_count == 68u);
    CHECK(out.findings.diagnosis[0].label == "normal");
  }

  TEST_CASE("ungradable image is annotated, not halted") {
    auto out = reference().run(test::reference_case("ungradable_cfp"), 5);
    REQUIRE(out.report);
    REQUIRE(out.findings.quality);
    CHECK_FALSE(out.findings.quality->gradable);
    CHECK(out.findings.has_flag("low_confidence"));
    CHECK(contains(invoked_sequence(*out.trace), "general_screener"));
  }

  TEST_CASE("CVD report carries risk level and AVR") {
    auto out = reference().run(test::reference_case("cvd_cfp"), 5);
    REQUIRE(out.report);
    auto text = evidence_text(*out.report);
    CHECK(text.find("AVR 0.523") != std::string::npos);
    CHECK(text.find("Level 4") != std::string::npos);
    REQUIRE(out.findings.vessels);
    CHECK(out.findings.vessels->metrics.avr_reported() == doctest::Approx(0.523));
  }

  TEST_CASE("conflict rule records parties and resolves after verification") {
    for (const auto* name : {"conflict_amd_cfp", "conflict_dr_cfp"}) {
      auto out = reference().run(test::reference_case(name), 5);
      REQUIRE(out.report);
      REQUIRE(out.findings.conflicts.size() == 1);
      const auto& k = out.findings.conflicts[0];
      CHECK(k.parties.size() >= 2);
      CHECK(k.resolution.has_value());
      CHECK_FALSE(k.rescreen_step.empty());
      CHECK(out.trace->count(EventKind::ConflictDetected) == 1);
      CHECK(std::abs(k.parties[0].probability - k.parties[1].probability) <= 1.0);
      check_trace_invariants(out, test::reference_runtime().registry->tier_subset(5), 2);
    }
  }

  TEST_CASE("conflict without a generator in the toolset is escalated") {
    auto out = reference().run(test::reference_case("conflict_amd_cfp"), 3);
    REQUIRE(out.findings.conflicts.size() == 1);
    CHECK(out.findings.conflicts[0].rescreen_step.empty());
    CHECK(out.findings.conflicts[0].resolution.has_value());
  }

  TEST_CASE("revision rounds stay within the configured bound") {
    for (int k : {0, 1, 2}) {
      OrchestratorConfig cfg = test::reference_runtime().orchestrator->config();
      cfg.revision_rounds = k;
      Orchestrator orch(test::reference_runtime().registry, test::reference_runtime().invoker, cfg);
      for (const auto* name : {"pdr_cfp", "conflict_dr_cfp", "crvo_uwf"}) {
        auto out = orch.run(test::reference_case(name), 5);
        CHECK(out.revision_rounds <= k);
        check_trace_invariants(out, test::reference_runtime().registry->tier_subset(5), k);
      }
    }
  }

  TEST_CASE("every corpus case satisfies the trace invariants at every tier") {
    const auto& rt = test::reference_runtime();
    auto corpus = gateway::load_corpus(test::data_dir() / "corpus.jsonl", rt.registry->modalities());
    for (int tier = 1; tier <= 5; ++tier) {
      auto toolset = rt.registry->tier_subset(tier);
      for (const auto& c : corpus) {
        auto out = reference().run(c, tier);
        CAPTURE(c.case_id);
        CAPTURE(tier);
        CHECK(out.report.has_value());
        check_trace_invariants(out, toolset, rt.orchestrator->config().revision_rounds);
      }
    }
  }

  TEST_CASE("unreachable screening step times out and its dependents are skipped") {
    auto store = std::make_shared<FixtureStore>(*test::reference_runtime().fixtures);
    auto c = single_image_case("net");
    store->add("modality_classifier", "net_img", classification({{"CFP", 0.99}}));
    store->add("quality_assessor", "net_img", classification({{"gradable", 0.95}}));
    store->add("laterality_classifier", "net_img", classification({{"OD", 0.9}}));
    store->add_failure("general_screener", "net_img", TransportResult::Kind::TransportFailure, "connection reset");
    CustomStack stack(store);
    auto out = stack.orchestrator->run(c, 5);

    const StepRecord* screening = nullptr;
    for (const auto& rec : out.state.records) {
      if (rec.step.tool_id == "general_screener") screening = &rec;
    }
    REQUIRE(screening);
    REQUIRE(screening->result);
    CHECK(screening->result->status == InvocationStatus::Timeout);
    CHECK(screening->result->attempts == 3);
    CHECK(out.trace->count(EventKind::StepSkipped) >= 1);
    for (const auto& rec : out.state.records) {
      if (rec.step.dependencies().contains(screening->step.step_id)) CHECK(rec.state == StepState::Skipped);
    }
    check_trace_invariants(out, test::reference_runtime().registry->tier_subset(5), 2);
  }

  TEST_CASE("no successful invocations yields an insufficiency report") {
    auto store = std::make_shared<FixtureStore>();
    CustomStack stack(store);
    auto out = stack.orchestrator->run(single_image_case("void"), 5);
    REQUIRE(out.report);
    CHECK(out.report->modality == "Unknown");
    CHECK(out.report->laterality == "Unknown");
    CHECK(out.findings.has_flag("insufficient_evidence"));
    CHECK(std::find(out.report->flags.begin(), out.report->flags.end(), "insufficient_evidence") !=
          out.report->flags.end());
  }

  TEST_CASE("empty plan produces stage events and an empty-findings report") {
    struct EmptyPlanner final : PlannerProvider {
      std::string_view name() const noexcept override { return "empty"; }
      ToolPlan propose_plan(const PlanningContext&) override { return {}; }
      RevisionProposal propose_revision(const RevisionContext&) override { return {}; }
    };
    CustomStack stack(std::make_shared<FixtureStore>(*test::reference_runtime().fixtures),
                      std::make_shared<EmptyPlanner>());
    auto out = stack.orchestrator->run(test::reference_case("crvo_uwf"), 5);
    REQUIRE(out.report);
    CHECK(out.trace->count(EventKind::Invocation) == 0);
    CHECK(out.trace->count(EventKind::StageEnter) == 5);
    CHECK(out.findings.diagnosis.empty());
    CHECK(out.findings.has_flag("insufficient_evidence"));
  }

  TEST_CASE("recorded planner replays plans and revisions") {
    const Json rec = Json::parse(R"({
      "plans": {"crvo_uwf": [
        {"step_id": "s01", "tool_id": "modality_classifier",
         "input_bindings": {"image_id": {"case_image": "crvo_uwf_img1"}}},
        {"step_id": "s02", "tool_id": "general_screener",
         "input_bindings": {"image_id": {"case_image": "crvo_uwf_img1"}}}]},
      "revisions": {"crvo_uwf": [[
        {"step_id": "s03", "tool_id": "rvo_classifier",
         "input_bindings": {"image_id": {"case_image": "crvo_uwf_img1"}}}]]}
    })");
    CustomStack stack(std::make_shared<FixtureStore>(*test::reference_runtime().fixtures),
                      std::make_shared<RecordedPlanner>(rec));
    auto out = stack.orchestrator->run(test::reference_case("crvo_uwf"), 5);
    REQUIRE(out.report);
    CHECK(invoked_sequence(*out.trace) ==
          std::vector<std::string>{"modality_classifier", "general_screener", "rvo_classifier", "textbook_rag"});
    CHECK(out.findings.diagnosis[0].label == "central retinal vein occlusion");
  }

  TEST_CASE("schema violations become validation_failure events and dependents are skipped") {
    auto store = std::make_shared<FixtureStore>(*test::reference_runtime().fixtures);
    store->add("modality_classifier", "bad_img", classification({{"CFP", 0.99}}));
    store->add("quality_assessor", "bad_img", classification({{"gradable", 0.95}}));
    store->add("laterality_classifier", "bad_img", classification({{"OD", 0.9}}));
    store->add("general_screener", "bad_img", Json{{"predictions", {{{"label", "glaucoma"}, {"probability", 1.4}}}},
                                                   {"threshold_used", 0.3}});
    CustomStack stack(store);
    auto c = single_image_case("bad");
    auto out = stack.orchestrator->run(c, 5);
    REQUIRE(out.trace->count(EventKind::ValidationFailure) >= 1);
    for (const auto& e : out.trace->events()) {
      if (e.kind == EventKind::ValidationFailure) {
        CHECK(e.payload["raw_payload"]["predictions"][0]["probability"] == 1.4);
        CHECK_FALSE(e.payload["violations"].empty());
      }
    }
    for (const auto& d : out.findings.diagnosis) CHECK(d.tool_id != "general_screener");
  }

  TEST_CASE("trace lines round-trip and late subscribers replay every event") {
    ReasoningTrace trace(TraceHeader{"c", 7, "abc", 5});
    trace.append(EventKind::StageEnter, Json{{"stage", "interpret"}}, 0);
    trace.append(EventKind::Warning, Json{{"message", "x"}}, 5);
    trace.append(EventKind::Warning, Json{{"message", "clamped"}}, 2);
    auto events = trace.events();
    CHECK(events[2].ts == 5);

    for (const auto& e : events) {
      auto again = parse_event(serialize_event(e));
      CHECK(again.seq == e.seq);
      CHECK(again.ts == e.ts);
      CHECK(again.kind == e.kind);
      CHECK(again.payload == e.payload);
      CHECK(serialize_event(again) == serialize_event(e));
    }
    auto h = parse_header(serialize_header(trace.header()));
    CHECK(h.case_id == "c");
    CHECK(h.seed == 7);
    CHECK(h.tier == 5);
    CHECK(serialize_event(events[0]).rfind("{\"seq\":0,\"ts\":0,\"kind\":\"stage_enter\",\"payload\":", 0) == 0);

    std::vector<std::uint64_t> seen;
    trace.subscribe([&](const TraceEvent& e) { seen.push_back(e.seq); });
    trace.append(EventKind::FinalReport, Json::object(), 9);
    CHECK(seen == std::vector<std::uint64_t>{0, 1, 2, 3});
  }

  TEST_CASE("plans reject forward references") {
    ToolPlan plan;
    PlanStep a{"s01", "modality_classifier", {{"image_id", Binding::image("i")}}};
    PlanStep b{"s02", "general_screener", {{"image_id", Binding::image("i")}, {"m", Binding::output("s01")}}};
    PlanStep bad{"s03", "general_screener", {{"m", Binding::output("s09")}}};
    plan.add(a);
    plan.add(b);
    CHECK(plan.is_dag());
    CHECK(plan.edges() == std::vector<std::pair<std::string, std::string>>{{"s01", "s02"}});
    CHECK_THROWS_AS(plan.add(bad), Error);
    CHECK_THROWS_AS(plan.add(a), Error);
    CHECK(make_step_id(3) == "s03");
  }
}
