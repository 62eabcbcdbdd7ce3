#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"

#include "cfkit/error.hpp"
#include "cfkit/mock_backend.hpp"
#include "cfkit/service.hpp"

using namespace cfkit;

namespace {

ServiceConfig config(const testutil::TempDir& dir) {
  ServiceConfig c;
  c.data_dir = dir.path.string();
  c.backends = make_mock_backends();
  c.pipeline.seed = 3;
  return c;
}

json corpus_body(const std::string& id) {
  return {{"id", id}, {"conllu", testutil::slurp(testutil::fixture("pipeline.conllu"))}};
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("sessions round-trip through disk") {
    testutil::TempDir dir;
    json before;
    {
      AnalysisService svc(config(dir));
      auto created = svc.create_session(corpus_body("s1"));
      CHECK(created["id"] == "s1");
      CHECK(created["sentences"] == 10);
      auto gen = svc.generate("s1", {{"sentence_id", "pc001"}});
      CHECK_FALSE(gen["candidates"].empty());
      svc.run_selection("s1", {{"strategy", "diversity"}, {"sentence_id", "pc001"}, {"k", 3}});
      svc.mine_templates("s1", json::object());
      before = svc.get_session("s1");
      CHECK(before["selections"].contains("diversity:pc001"));
      CHECK(svc.list_sessions() == std::vector<std::string>{"s1"});
    }
    AnalysisService again(config(dir));
    CHECK(again.get_session("s1") == before);
    again.delete_session("s1");
    CHECK_THROWS_AS(again.get_session("s1"), NotFoundError);
    AnalysisService third(config(dir));
    CHECK(third.list_sessions().empty());
  }

  TEST_CASE("generation is deterministic for a fixed seed") {
    testutil::TempDir dir;
    AnalysisService svc(config(dir));
    svc.create_session(corpus_body("a"));
    svc.create_session(corpus_body("b"));
    auto ga = svc.generate("a", {{"sentence_id", "pe001"}, {"seed", 11}});
    auto gb = svc.generate("b", {{"sentence_id", "pe001"}, {"seed", 11}});
    CHECK(ga == gb);
  }

  TEST_CASE("validation errors") {
    testutil::TempDir dir;
    AnalysisService svc(config(dir));
    svc.create_session(corpus_body("s"));
    svc.generate("s", {{"sentence_id", "pc002"}});
    CHECK_THROWS_AS(svc.run_selection("s", {{"strategy", "surprise"}, {"sentence_id", "pc002"}}), ValidationError);
    CHECK_THROWS_AS(svc.run_selection("s", {{"strategy", "surprise"}, {"sentence_id", "pc002"}, {"attribution", {0.1}}}),
                    ValidationError);
    CHECK_THROWS_AS(svc.run_selection("s", {{"strategy", "nope"}}), ValidationError);
    CHECK_THROWS_AS(svc.generate("s", {{"sentence_id", "pc002"}, {"codes", {"bogus"}}}), ValidationError);
    CHECK_THROWS_AS(svc.generate("s", {{"sentence_id", "missing"}}), NotFoundError);
    CHECK_THROWS_AS(svc.create_session(corpus_body("s")), ValidationError);
    CHECK_THROWS_AS(svc.create_session(corpus_body("../evil")), ValidationError);
    CHECK_THROWS_AS(svc.create_session(json::object()), ValidationError);
  }

  TEST_CASE("surprise selection with an attribution map") {
    testutil::TempDir dir;
    AnalysisService svc(config(dir));
    svc.create_session(corpus_body("s"));
    svc.generate("s", {{"sentence_id", "pe002"}});
    const json x = svc.get_session("s");
    std::size_t n = 0;
    for (const auto& sent : x["sentences"]) {
      if (sent["id"] == "pe002") n = sent["tokens"].size();
    }
    REQUIRE(n > 0);
    std::vector<double> attr(n, 0.1);
    auto r = svc.run_selection("s", {{"strategy", "surprise"}, {"sentence_id", "pe002"}, {"attribution", attr}});
    CHECK(r.contains("surprise"));
  }

  TEST_CASE("REST errors") {
    testutil::TempDir dir;
    AnalysisService svc(config(dir));
    httplib::Server server;
    svc.register_routes(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto missing = cli.Get("/v1/sessions/nope");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["code"] == "not_found");

    auto bad = cli.Post("/v1/sessions", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["code"] == "validation");

    auto created = cli.Post("/v1/sessions", corpus_body("web").dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    auto gen = cli.Post("/v1/sessions/web/generate", json{{"sentence_id", "pc003"}}.dump(), "application/json");
    REQUIRE(gen);
    CHECK(gen->status == 200);
    auto listed = cli.Get("/v1/sessions");
    REQUIRE(listed);
    CHECK(listed->body.find("web") != std::string::npos);

    server.stop();
    t.join();
  }
}
