#include <doctest.h>
#include <httplib.h>

#include <sys/wait.h>

#include <cstdlib>

#include "ocuflow/gateway/feedback.hpp"
#include "ocuflow/gateway/service.hpp"
#include "ocuflow/gateway/store.hpp"
#include "support/support.hpp"

using namespace ocuflow;
using namespace ocuflow::gateway;
using ocuflow::test::error_code_of;

namespace {

Json valid_feedback(const std::string& case_id = "c1") {
  return Json{{"case_id", case_id},
              {"reader_id", "reader-1"},
              {"confidence_before", 2},
              {"confidence_after", 4},
              {"adoption_percent", 75},
              {"adopted_components", {"diagnostic_evidence"}}};
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(OCUFLOW_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string case_body(const std::string& name, std::optional<int> tier = std::nullopt) {
  Json body{{"case", test::read_json(test::data_dir() / "cases" / (name + ".json"))}};
  if (tier) body["tier"] = *tier;
  return body.dump();
}

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("feedback validation enforces enumerations") {
    auto ok = validate_feedback(valid_feedback());
    REQUIRE(ok.ok());
    CHECK(ok.record->adoption_percent == 75);
    CHECK(ok.record->adopted_components == std::set<std::string>{"diagnostic_evidence"});
    CHECK(validate_feedback(to_json(*ok.record)).ok());

    for (int level : {0, 25, 50, 75, 100}) {
      auto doc = valid_feedback();
      doc["adoption_percent"] = level;
      CHECK(validate_feedback(doc).ok());
    }

    auto bad = valid_feedback();
    bad["adoption_percent"] = 30;
    bad["confidence_after"] = 6;
    bad["adopted_components"] = {"diagnosis", "vibes"};
    bad["extra"] = true;
    auto v = validate_feedback(bad);
    CHECK_FALSE(v.ok());
    std::set<std::string> fields;
    for (const auto& e : v.errors) fields.insert(e.field);
    CHECK(fields == std::set<std::string>{"adoption_percent", "confidence_after", "adopted_components/1", "extra"});
    for (const auto& e : v.errors) {
      if (e.field == "adoption_percent") CHECK(e.allowed == Json{0, 25, 50, 75, 100});
    }

    auto missing = valid_feedback();
    missing.erase("reader_id");
    CHECK_FALSE(validate_feedback(missing).ok());
    CHECK_FALSE(validate_feedback(Json::array()).ok());
  }

  TEST_CASE("store persists feedback and traces across reopen") {
    test::TempDir dir("store");
    const auto path = (dir.path() / "agent.db").string();
    {
      Store store(path);
      store.put_case("c1", 5, Json{{"case_id", "c1"}});
      store.append_event_line("c1", -1, "{\"header\":1}");
      store.append_event_line("c1", 0, "{\"seq\":0}");
      store.put_report("c1", Json{{"diagnosis", "x"}});
      store.set_status("c1", "completed");
      auto rec = validate_feedback(valid_feedback());
      CHECK(store.add_feedback(*rec.record) == 1);
      CHECK(store.add_feedback(*rec.record) == 2);
    }
    Store reopened(path);
    CHECK(reopened.status("c1") == "completed");
    CHECK(reopened.event_lines("c1") == std::vector<std::string>{"{\"header\":1}", "{\"seq\":0}"});
    CHECK((*reopened.report("c1"))["diagnosis"] == "x");
    CHECK(reopened.feedback("c1").size() == 2);
    CHECK(reopened.feedback().size() == 2);
    CHECK_FALSE(reopened.status("nope").has_value());
  }

  TEST_CASE("run config validation names the offending flag") {
    auto cfg = test::reference_config();
    CHECK_NOTHROW(cfg.validate());
    auto bad = cfg;
    bad.tier = 9;
    try {
      bad.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.flag() == "tier");
      CHECK(std::string(e.what()).find("--tier") == 0);
    }
    bad = cfg;
    bad.catalog_path = "/nonexistent/catalog.json";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.planner = "oracle";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.planner = "llm-stub";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.conflict_margin = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("corpus loading reports line numbers") {
    test::TempDir dir("corpus");
    {
      std::ofstream out(dir.path() / "c.jsonl");
      out << test::read_json(test::data_dir() / "cases" / "crvo_uwf.json").dump() << "\n\n{\"case_id\": 5}\n";
    }
    try {
      load_corpus(dir.path() / "c.jsonl", ModalityCatalog::standard());
      FAIL("expected SchemaViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaViolation);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    auto corpus = load_corpus(test::data_dir() / "corpus.jsonl", ModalityCatalog::standard());
    CHECK(corpus.size() == 30);
  }

  TEST_CASE("HTTP service end to end") {
    const auto& rt = test::reference_runtime();
    Store store(":memory:");
    Service service(rt, store);
    const int port = service.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);

    auto health = client.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto posted = client.Post("/v1/cases", case_body("crvo_uwf", 5), "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 202);
    const auto id = Json::parse(posted->body)["case_id"].get<std::string>();
    CHECK(id == "crvo_uwf");

    auto stream = client.Get("/v1/cases/" + id + "/events");
    REQUIRE(stream);
    CHECK(stream->status == 200);
    service.wait_for(id);

    auto direct = rt.orchestrator->run(test::reference_case("crvo_uwf"), 5);
    CHECK(stream->body == direct.trace->serialize());

    // Late subscribers replay the stored stream.
    auto replay = client.Get("/v1/cases/" + id + "/events");
    REQUIRE(replay);
    CHECK(replay->body == stream->body);

    auto report = client.Get("/v1/cases/" + id + "/report");
    REQUIRE(report);
    CHECK(report->status == 200);
    auto report_doc = Json::parse(report->body)["report"];
    CHECK_NOTHROW(validate_report(report_from_json(report_doc)));
    CHECK(report_doc["laterality"].get<std::string>().find("OS (87.1%)") != std::string::npos);

    auto status = client.Get("/v1/cases/" + id);
    REQUIRE(status);
    CHECK(Json::parse(status->body)["status"] == "completed");

    auto second = client.Post("/v1/cases", case_body("crvo_uwf"), "application/json");
    REQUIRE(second);
    CHECK(second->status == 202);
    CHECK(Json::parse(second->body)["case_id"] != id);

    auto unknown = client.Get("/v1/cases/nope/events");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
    CHECK(client.Get("/v1/cases/nope/report")->status == 404);

    CHECK(client.Post("/v1/cases", "{not json", "application/json")->status == 400);
    CHECK(client.Post("/v1/cases", case_body("crvo_uwf", 9), "application/json")->status == 422);
    CHECK(client.Post("/v1/cases", Json{{"case", {{"query", "x"}}}}.dump(), "application/json")->status == 422);

    auto tools = client.Get("/v1/tools?tier=1");
    REQUIRE(tools);
    CHECK(tools->status == 200);
    CHECK(Json::parse(tools->body)["tools"].size() == 5);
    CHECK(Json::parse(client.Get("/v1/tools")->body)["count"] == 53);
    CHECK(client.Get("/v1/tools?tier=0")->status == 400);
    CHECK(client.Get("/v1/tools?tier=abc")->status == 400);

    auto bad_feedback = valid_feedback(id);
    bad_feedback["adoption_percent"] = 30;
    auto rejected = client.Post("/v1/feedback", bad_feedback.dump(), "application/json");
    REQUIRE(rejected);
    CHECK(rejected->status == 422);
    auto errors = Json::parse(rejected->body)["errors"];
    REQUIRE(errors.size() == 1);
    CHECK(errors[0]["field"] == "adoption_percent");
    CHECK(errors[0]["allowed"] == Json{0, 25, 50, 75, 100});

    auto accepted = client.Post("/v1/feedback", valid_feedback(id).dump(), "application/json");
    REQUIRE(accepted);
    CHECK(accepted->status == 201);
    CHECK(store.feedback(id).size() == 1);
    CHECK(client.Post("/v1/feedback", valid_feedback("ghost").dump(), "application/json")->status == 404);

    auto schema = client.Get("/v1/feedback/schema");
    REQUIRE(schema);
    CHECK(Json::parse(schema->body)["properties"]["adoption_percent"]["enum"] == Json{0, 25, 50, 75, 100});

    CHECK(client.Post("/v1/uploads", "", "application/octet-stream")->status == 404);
    service.stop();
  }

  TEST_CASE("concurrent cases each end in exactly one terminal event") {
    const auto& rt = test::reference_runtime();
    Store store(":memory:");
    Service service(rt, store, ServiceOptions{.enable_upload = true});
    const int port = service.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);
    CHECK(client.Post("/v1/uploads", "", "application/octet-stream")->status == 501);

    std::vector<std::string> ids;
    for (const auto* name : {"pdr_cfp", "cvd_cfp", "mh_oct", "conflict_amd_cfp", "text_only_csc"}) {
      auto r = client.Post("/v1/cases", case_body(name), "application/json");
      REQUIRE(r);
      REQUIRE(r->status == 202);
      ids.push_back(Json::parse(r->body)["case_id"]);
    }
    for (const auto& id : ids) {
      auto r = client.Get("/v1/cases/" + id + "/events");
      REQUIRE(r);
      std::istringstream lines(r->body);
      std::string line;
      std::getline(lines, line);
      CHECK(parse_header(line).case_id == id);
      std::size_t terminal = 0;
      std::uint64_t expected_seq = 0;
      while (std::getline(lines, line)) {
        auto e = parse_event(line);
        CHECK(e.seq == expected_seq++);
        terminal += is_terminal(e.kind);
      }
      CHECK(terminal == 1);
    }
    service.stop();
    for (const auto& id : ids) CHECK(store.status(id) == "completed");
  }

  TEST_CASE("CLI exit codes and deterministic trace files") {
    test::TempDir dir("cli");
    const auto log = dir.path() / "log.txt";
    const auto crvo = (test::data_dir() / "cases" / "crvo_uwf.json").string();

    CHECK(run_cli("run --case " + crvo + " --tier 9", log) == 2);
    CHECK(test::read_text(log).find("--tier") != std::string::npos);

    const auto t1 = (dir.path() / "a.trace.jsonl").string();
    const auto t2 = (dir.path() / "b.trace.jsonl").string();
    const auto rep = (dir.path() / "r.json").string();
    REQUIRE(run_cli("run --case " + crvo + " --tier 5 --seed 7 --trace-out " + t1 + " --report-out " + rep, log) == 0);
    REQUIRE(run_cli("run --case " + crvo + " --tier 5 --seed 7 --trace-out " + t2 + " --report-out " + rep, log) == 0);
    CHECK(test::read_text(t1) == test::read_text(t2));
    CHECK_NOTHROW(validate_report(report_from_json(test::read_json(rep))));

    const auto pdr_report = (dir.path() / "pdr.json").string();
    REQUIRE(run_cli("run --case " + (test::data_dir() / "cases" / "pdr_cfp.json").string() + " --report-out " +
                        pdr_report + " --trace-out " + (dir.path() / "pdr.trace.jsonl").string(),
                    log) == 0);
    auto pdr = test::read_json(pdr_report);
    for (const auto* section : {"modality", "image_quality", "laterality", "diagnosis", "evidence", "recommendations"}) {
      CHECK(pdr.contains(section));
    }

    {
      std::ofstream(dir.path() / "empty.jsonl") << "\n";
      std::ofstream(dir.path() / "broken.json") << "{\"case_id\": \"\"}";
    }
    CHECK(run_cli("ablate --tiers 0,6", log) == 2);
    CHECK(run_cli("ablate --corpus " + (dir.path() / "empty.jsonl").string(), log) == 3);
    CHECK(run_cli("run --case " + (dir.path() / "broken.json").string(), log) == 3);
    CHECK(run_cli("run --case " + crvo + " --catalog /nonexistent.json", log) == 2);

    const auto out = dir.path() / "ablation";
    REQUIRE(run_cli("ablate --tiers 1,5 --out " + out.string(), log) == 0);
    auto doc = test::read_json(out / "ablation.json");
    REQUIRE(doc["tiers"].size() == 2);
    CHECK(doc["tiers"][1]["accuracy"].get<double>() >= doc["tiers"][0]["accuracy"].get<double>());

    CHECK(run_cli("catalog-lint", log) == 0);
  }
}
