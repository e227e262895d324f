#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include <httplib.h>

#include "engage/coding_service.hpp"
#include "engage/http_api.hpp"
#include "support.hpp"

using namespace engage;
using nlohmann::json;

namespace {

struct FakeClock {
  std::int64_t now = 1000;
};

Corpus service_corpus() {
  Corpus c;
  std::vector<std::string> a = {"hola a todos", "hoy hay examen", "sentaos", "el examen cuenta para la nota",
                                "abrid el libro", "nada mas", "si estudiais aprobareis", "venga", "examen final", "fin"};
  c.transcripts.push_back(support::make_transcript("t1", a, 9, 1));
  c.transcripts.push_back(support::make_transcript("t2", {"otra clase", "sin examen hoy", "adios"}, 10, 2));
  return c;
}

json corpus_request(const std::string& id = "c1") {
  const auto c = service_corpus();
  const auto set = filter_corpus(c, make_keyword_list("exam", {"examen"}));
  return {{"id", id}, {"corpus", corpus_to_json(c)}, {"filtered", {filtered_set_to_json(set)}}};
}

ServiceOptions options(const std::filesystem::path& dir, FakeClock* clock, std::size_t snapshot_every = 256) {
  ServiceOptions o;
  o.data_dir = dir;
  o.lease_ms = 60'000;
  o.snapshot_every = snapshot_every;
  if (clock) o.clock = [clock] { return clock->now; };
  return o;
}

json session_request(std::vector<std::string> roster, const std::string& policy = "single") {
  return {{"corpus_id", "c1"}, {"filtered", {{"list", "exam"}}}, {"roster", roster}, {"policy", policy}};
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

json submit(CodingService& s, const std::string& sid, const std::string& coder, const std::string& item,
            const std::string& frame = "gain", const std::string& appeal = "extrinsic") {
  return s.submit_annotation(sid, {{"coder", coder}, {"item_id", item}, {"decision", "message"}, {"frame", frame}, {"appeal", appeal}});
}

/// Codes every item of the coder's queue; `label` picks the appeal per item.
void code_all(CodingService& s, const std::string& sid, const std::string& coder,
              const std::function<std::string(const std::string&)>& label) {
  while (true) {
    const auto next = s.next_item(sid, coder);
    if (next["done"].get<bool>()) return;
    const auto id = next["item"]["item_id"].get<std::string>();
    submit(s, sid, coder, id, "gain", label(id));
  }
}

}  // namespace

TEST(Service, SessionMaterializesOneItemPerRetainedSegment) {
  const auto dir = support::temp_dir("svc-items");
  FakeClock clock;
  CodingService s(options(dir, &clock));
  s.add_corpus(corpus_request());
  const auto sess = s.create_session(session_request({"ana"}));
  EXPECT_EQ(sess["items"], 4);
  const auto again = s.create_session(session_request({"ana"}));
  EXPECT_NE(again["session_id"], sess["session_id"]);
  const auto first = s.next_item(sess["session_id"], "ana");
  EXPECT_EQ(first["item"]["transcript_id"], "t1");
  EXPECT_EQ(first["item"]["focus"], 1);
  EXPECT_EQ(first["item"]["matched_keywords"], json::array({"examen"}));
  EXPECT_EQ(first["item"]["segments"].size(), 4u);  // window 2, clipped at the start
  EXPECT_EQ(s.next_item(again["session_id"], "ana")["item"]["focus"], 1);
  std::filesystem::remove_all(dir);
}

TEST(Service, CreateSessionErrors) {
  const auto dir = support::temp_dir("svc-create");
  CodingService s(options(dir, nullptr));
  s.add_corpus(corpus_request());
  EXPECT_EQ(code_of([&] { s.create_session(session_request({})); }), ErrorCode::EmptyRoster);
  EXPECT_EQ(code_of([&] { s.create_session(session_request({"ana"}, "double")); }), ErrorCode::DoubleNeedsTwo);
  auto bad = session_request({"ana"});
  bad["corpus_id"] = "nope";
  EXPECT_EQ(code_of([&] { s.create_session(bad); }), ErrorCode::UnknownCorpus);
  bad = session_request({"ana"});
  bad["filtered"]["list"] = "nope";
  EXPECT_EQ(code_of([&] { s.create_session(bad); }), ErrorCode::UnknownFilteredSet);
  std::filesystem::remove_all(dir);
}

TEST(Service, LeasesAndQueues) {
  const auto dir = support::temp_dir("svc-lease");
  FakeClock clock;
  CodingService s(options(dir, &clock));
  s.add_corpus(corpus_request());
  const std::string single = s.create_session(session_request({"ana", "ben"}))["session_id"];
  const auto a = s.next_item(single, "ana")["item"]["item_id"];
  const auto b = s.next_item(single, "ben")["item"]["item_id"];
  EXPECT_NE(a, b);
  EXPECT_EQ(s.next_item(single, "ana")["item"]["item_id"], a);  // own lease is handed back
  EXPECT_EQ(code_of([&] { submit(s, single, "ben", a); }), ErrorCode::LeaseLost);
  clock.now += 61'000;
  EXPECT_EQ(s.next_item(single, "ben")["item"]["item_id"], a);  // expired lease is re-leased
  EXPECT_EQ(code_of([&] { s.next_item(single, "zoe"); }), ErrorCode::UnknownCoder);

  const std::string dbl = s.create_session(session_request({"ana", "ben"}, "double"))["session_id"];
  EXPECT_EQ(s.next_item(dbl, "ana")["item"]["item_id"], s.next_item(dbl, "ben")["item"]["item_id"]);
  std::filesystem::remove_all(dir);
}

TEST(Service, ReliabilitySliceSplitsDoubleQueues) {
  const auto dir = support::temp_dir("svc-slice");
  CodingService s(options(dir, nullptr));
  s.add_corpus(corpus_request());
  auto req = session_request({"ana", "ben"});
  req["policy"] = {{"kind", "double"}, {"reliability_percent", 50}};
  const auto sess = s.create_session(req);
  EXPECT_EQ(sess["queues"]["ana"].get<int>() + sess["queues"]["ben"].get<int>(), 6);  // 2 shared + 2 dealt
  std::filesystem::remove_all(dir);
}

TEST(Service, SubmissionValidationAndIdempotence) {
  const auto dir = support::temp_dir("svc-submit");
  CodingService s(options(dir, nullptr));
  s.add_corpus(corpus_request());
  const std::string sid = s.create_session(session_request({"ana"}))["session_id"];
  const std::string item = s.next_item(sid, "ana")["item"]["item_id"];
  json bad = {{"coder", "ana"}, {"item_id", item}, {"decision", "message"}, {"frame", "loss"}, {"appeal", "extrinsic"},
              {"span", {{"start", 7}, {"end", 3}}}};
  try {
    s.submit_annotation(sid, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
    EXPECT_EQ(e.details()["violations"][0]["kind"], "InvalidSpan");
  }
  bad["span"] = {{"start", 1}, {"end", 40}};
  EXPECT_EQ(code_of([&] { s.submit_annotation(sid, bad); }), ErrorCode::ValidationFailed);
  EXPECT_EQ(code_of([&] { s.submit_annotation(sid, {{"coder", "ana"}, {"item_id", item}, {"decision", "message"}}); }),
            ErrorCode::ValidationFailed);

  const auto ack = submit(s, sid, "ana", item, "loss", "extrinsic");
  EXPECT_FALSE(ack["replayed"].get<bool>());
  const auto replay = submit(s, sid, "ana", item, "loss", "extrinsic");
  EXPECT_TRUE(replay["replayed"].get<bool>());
  EXPECT_EQ(replay["annotation_id"], ack["annotation_id"]);
  EXPECT_EQ(s.annotations(sid).size(), 1u);
  EXPECT_EQ(code_of([&] { submit(s, sid, "ana", item, "gain", "intrinsic"); }), ErrorCode::DuplicateSubmission);

  // Span adjustment beyond the focus segment.
  const std::string item2 = s.next_item(sid, "ana")["item"]["item_id"];
  auto adj = s.submit_annotation(sid, {{"coder", "ana"}, {"item_id", item2}, {"decision", "not_a_message"},
                                       {"span", {{"start", 2}, {"end", 4}}}});
  EXPECT_EQ(adj["annotation"]["start"], 2);
  EXPECT_EQ(adj["annotation"]["decision"], "not_a_message");
  std::filesystem::remove_all(dir);
}

TEST(Service, ProgressAndClose) {
  const auto dir = support::temp_dir("svc-progress");
  CodingService s(options(dir, nullptr));
  s.add_corpus(corpus_request());
  const std::string sid = s.create_session(session_request({"ana"}))["session_id"];
  EXPECT_EQ(s.progress(sid)["coders"]["ana"]["completed"], 0);
  submit(s, sid, "ana", s.next_item(sid, "ana")["item"]["item_id"]);
  auto p = s.progress(sid);
  EXPECT_EQ(p["coders"]["ana"]["completed"], 1);
  EXPECT_EQ(p["items_total"], 4);
  s.close_session(sid);
  p = s.progress(sid);
  EXPECT_EQ(p["status"], "closed");
  EXPECT_EQ(p["coders"]["ana"]["completed"], 1);
  EXPECT_EQ(code_of([&] { s.next_item(sid, "ana"); }), ErrorCode::SessionClosed);
  EXPECT_EQ(code_of([&] { s.progress("session-999999"); }), ErrorCode::UnknownSession);
  std::filesystem::remove_all(dir);
}

TEST(Service, LiveAgreementMatchesReliabilityModule) {
  const auto dir = support::temp_dir("svc-agree");
  CodingService s(options(dir, nullptr));
  s.add_corpus(corpus_request());
  const std::string single = s.create_session(session_request({"ana"}))["session_id"];
  EXPECT_EQ(code_of([&] { s.live_agreement(single); }), ErrorCode::NotDoubleCoded);
  const std::string sid = s.create_session(session_request({"ana", "ben"}, "double"))["session_id"];
  EXPECT_EQ(code_of([&] { s.live_agreement(sid); }), ErrorCode::NoUnits);
  code_all(s, sid, "ana", [](const std::string&) { return "extrinsic"; });
  code_all(s, sid, "ben", [](const std::string& id) { return id == "item-000002" ? "intrinsic" : "extrinsic"; });
  const auto live = s.live_agreement(sid);
  EXPECT_DOUBLE_EQ(live["overall_percent"].get<double>(), 75.0);

  std::vector<MessageAnnotation> a, b;
  for (const auto& ann : s.annotations(sid)) (ann.coder_id == "ana" ? a : b).push_back(ann);
  EXPECT_EQ(live["overall_percent"], to_json(agreement_report(align_annotations(a, b)))["overall_percent"]);
  EXPECT_FALSE(s.progress(sid)["agreement"].is_null());
  std::filesystem::remove_all(dir);
}

TEST(Service, AdjudicationPrefersPrimaryUnlessOverridden) {
  const auto dir = support::temp_dir("svc-adj");
  CodingService s(options(dir, nullptr));
  s.add_corpus(corpus_request());
  const std::string sid = s.create_session(session_request({"ana", "ben"}, "double"))["session_id"];
  code_all(s, sid, "ana", [](const std::string&) { return "extrinsic"; });
  code_all(s, sid, "ben", [](const std::string&) { return "intrinsic"; });
  const auto out = s.adjudicate(sid, {{"primary", "ben"},
                                      {"overrides", {{{"item_id", "item-000001"}, {"decision", "message"},
                                                      {"frame", "loss"}, {"appeal", "identified"}}}}});
  ASSERT_EQ(out["annotations"].size(), 4u);
  EXPECT_EQ(out["annotations"][0]["appeal"], "identified");
  EXPECT_EQ(out["annotations"][0]["coder_id"], "adjudicator");
  EXPECT_EQ(out["annotations"][1]["coder_id"], "ben");
  EXPECT_EQ(s.annotations(sid, true).size(), 4u);
  std::filesystem::remove_all(dir);
}

TEST(Service, RestartReplaysIdenticalAnnotations) {
  for (std::size_t snapshot_every : {std::size_t{1000}, std::size_t{3}}) {
    const auto dir = support::temp_dir("svc-restart");
    std::vector<MessageAnnotation> before;
    std::string sid;
    {
      CodingService s(options(dir, nullptr, snapshot_every));
      s.add_corpus(corpus_request());
      sid = s.create_session(session_request({"ana", "ben"}, "double"))["session_id"];
      code_all(s, sid, "ana", [](const std::string&) { return "identified"; });
      submit(s, sid, "ben", s.next_item(sid, "ben")["item"]["item_id"]);
      s.adjudicate(sid, {});
      before = s.annotations(sid);
    }
    CodingService again(options(dir, nullptr, snapshot_every));
    EXPECT_EQ(again.annotations(sid), before);
    EXPECT_EQ(again.annotations(sid, true).size(), 4u);
    // Work continues where it stopped.
    EXPECT_EQ(again.next_item(sid, "ben")["item"]["item_id"], "item-000002");
    EXPECT_TRUE(again.next_item(sid, "ana")["done"].get<bool>());
    std::filesystem::remove_all(dir);
  }
}

TEST(Service, TornFinalLogLineIsDropped) {
  const auto dir = support::temp_dir("svc-torn");
  std::string sid;
  {
    CodingService s(options(dir, nullptr));
    s.add_corpus(corpus_request());
    sid = s.create_session(session_request({"ana"}))["session_id"];
    submit(s, sid, "ana", s.next_item(sid, "ana")["item"]["item_id"]);
  }
  {
    std::ofstream log(dir / "events.jsonl", std::ios::app | std::ios::binary);
    log << R"({"seq":5,"type":"annot)";
  }
  CodingService again(options(dir, nullptr));
  EXPECT_EQ(again.annotations(sid).size(), 1u);
  EXPECT_EQ(again.last_sequence(), 4u);  // corpus, filtered, session, annotation
  submit(again, sid, "ana", again.next_item(sid, "ana")["item"]["item_id"]);
  CodingService third(options(dir, nullptr));
  EXPECT_EQ(third.annotations(sid).size(), 2u);
  std::filesystem::remove_all(dir);
}

// ---- HTTP contract ----

namespace {
struct LiveServer {
  std::filesystem::path dir;
  CodingService service;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  LiveServer(const std::string& name, const std::string& token)
      : dir(support::temp_dir(name)), service(options(dir, nullptr)) {
    install_routes(server, service, {token, {}});
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LiveServer() {
    server.stop();
    thread.join();
    std::filesystem::remove_all(dir);
  }
};
}  // namespace

TEST(HttpApi, EndpointsAndErrorShape) {
  LiveServer live("http", "sekret");
  httplib::Client cli("127.0.0.1", live.port);
  const httplib::Headers auth = {{"X-Auth-Token", "sekret"}};
  const auto post = [&](const std::string& path, const json& body) {
    return cli.Post(path, auth, body.dump(), "application/json");
  };

  auto r = cli.Post("/corpora", corpus_request().dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(json::parse(r->body)["code"], "Unauthorized");

  r = post("/corpora", corpus_request());
  ASSERT_EQ(r->status, 201);
  EXPECT_EQ(json::parse(r->body)["corpus_id"], "c1");
  const auto c = service_corpus();
  r = post("/corpora/c1/filtered", filtered_set_to_json(filter_corpus(c, make_keyword_list("nota", {"nota"}))));
  EXPECT_EQ(r->status, 201);
  EXPECT_EQ(json::parse(r->body)["filtered"].size(), 2u);

  r = post("/sessions", session_request({"ana", "ben"}, "double"));
  ASSERT_EQ(r->status, 201);
  const std::string sid = json::parse(r->body)["session_id"];

  r = cli.Get("/sessions/" + sid + "/next?coder=ana", auth);
  ASSERT_EQ(r->status, 200);
  const std::string item = json::parse(r->body)["item"]["item_id"];
  r = cli.Get("/sessions/" + sid + "/items/" + item + "?context=5", auth);
  EXPECT_EQ(json::parse(r->body)["segments"].size(), 7u);

  const json ann = {{"coder", "ana"}, {"item_id", item}, {"decision", "message"}, {"frame", "gain"}, {"appeal", "identified"}};
  r = post("/sessions/" + sid + "/annotations", ann);
  EXPECT_EQ(r->status, 201);
  r = post("/sessions/" + sid + "/annotations", ann);
  EXPECT_EQ(r->status, 200);
  auto changed = ann;
  changed["appeal"] = "intrinsic";
  r = post("/sessions/" + sid + "/annotations", changed);
  EXPECT_EQ(r->status, 409);
  const auto err = json::parse(r->body);
  EXPECT_EQ(err["code"], "DuplicateSubmission");
  EXPECT_TRUE(err.contains("message"));
  EXPECT_TRUE(err["details"].is_object());

  r = cli.Get("/sessions/" + sid + "/next?coder=ben", auth);
  r = post("/sessions/" + sid + "/annotations", json{{"coder", "ben"}, {"item_id", item}, {"decision", "message"},
                                                      {"frame", "gain"}, {"appeal", "identified"}});
  EXPECT_EQ(r->status, 201);

  r = cli.Get("/sessions/" + sid + "/progress", auth);
  EXPECT_EQ(json::parse(r->body)["coders"]["ana"]["completed"], 1);
  r = cli.Get("/sessions/" + sid + "/agreement", auth);
  ASSERT_EQ(r->status, 200);
  EXPECT_DOUBLE_EQ(json::parse(r->body)["overall_percent"].get<double>(), 100.0);
  r = cli.Get("/sessions/" + sid + "/export", auth);
  EXPECT_EQ(json::parse(r->body)["annotations"].size(), 2u);
  r = cli.Get("/sessions/" + sid + "/export?format=tsv", auth);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body.rfind("annotation_id\t", 0), 0u);
  r = post("/sessions/" + sid + "/adjudicate", json::object());
  EXPECT_EQ(json::parse(r->body)["annotations"].size(), 1u);
  r = cli.Get("/sessions/" + sid + "/export?set=adjudicated", auth);
  EXPECT_EQ(json::parse(r->body)["annotations"].size(), 1u);
  r = post("/sessions/" + sid + "/close", json::object());
  EXPECT_EQ(json::parse(r->body)["status"], "closed");
  r = cli.Get("/sessions/" + sid + "/next?coder=ana", auth);
  EXPECT_EQ(r->status, 409);

  r = cli.Get("/sessions/nope/progress", auth);
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json::parse(r->body)["code"], "UnknownSession");
  r = cli.Post("/sessions", auth, "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json::parse(r->body)["code"], "BadRequest");
  r = cli.Get("/health");
  EXPECT_EQ(r->status, 200);
}
