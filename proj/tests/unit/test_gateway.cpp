// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <future>
#include <thread>

#include "autot2i/digest.hpp"
#include "autot2i/gateway.hpp"
#include "fixtures.hpp"
#include "http_fixture.hpp"

using namespace autot2i;
using autot2i::testing::PipelineFixture;
using autot2i::testing::PipelineSetup;
using nlohmann::json;

namespace {

class FailingRewriter final : public RewriterBackend {
public:
    std::string id() const override { return "failing"; }
    std::string generate(const ChatInput&, const std::string&) override { throw BackendError("upstream 502"); }
};

/// Blocks every rewrite until released.
class GatedRewriter final : public RewriterBackend {
public:
    std::string id() const override { return "gated"; }
    std::string generate(const ChatInput& in, const std::string&) override {
        entered.set_value();
        release.get_future().wait();
        return in.last_user_turn().text;
    }
    std::promise<void> entered, release;
};

struct RunningGateway {
    PipelineFixture fx;
    Gateway gateway;
    std::thread thread;
    int port = -1;

    explicit RunningGateway(PipelineSetup s = {}, GatewayOptions o = {}) : fx(s), gateway(fx.pipeline, o) {
        port = gateway.bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        thread = std::thread([this] { gateway.listen_after_bind(); });
        httplib::Client c("127.0.0.1", port);
        for (int i = 0; i < 200; ++i) {
            if (auto r = c.Get("/healthz"); r && r->status == 200) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
    }
    ~RunningGateway() {
        gateway.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

}  // namespace

TEST_SUITE("gateway") {
    TEST_CASE("chat returns the stored trace and the job serves a png") {
        RunningGateway g;
        auto c = g.client();
        auto r = c.Post("/v1/chat", R"({"text":"a red fox in the snow"})", "application/json");
        REQUIRE(r);
        CHECK(r->status == 200);
        auto body = json::parse(r->body);
        const auto sid = body["session_id"].get<std::string>();
        const auto jid = body["job_id"].get<std::string>();
        const auto tid = body["trace"]["trace_id"].get<std::string>();
        CHECK(body["trace"]["mode"] == "evo");
        CHECK(*g.fx.traces->find(tid) == body["trace"].dump());

        g.fx.jobs->wait(jid);
        auto img = c.Get("/v1/jobs/" + jid);
        REQUIRE(img);
        CHECK(img->status == 200);
        CHECK(img->get_header_value("Content-Type") == "image/png");
        const auto digest = sha256_hex(img->body);
        auto byd = c.Get("/v1/images/" + digest);
        REQUIRE(byd);
        CHECK(byd->status == 200);
        CHECK(byd->body == img->body);
        CHECK(byd->get_header_value("ETag") == "\"" + digest + "\"");
        CHECK(byd->get_header_value("Cache-Control").find("immutable") != std::string::npos);

        auto tr = c.Get("/v1/traces/" + tid);
        REQUIRE(tr);
        CHECK(json::parse(tr->body) == body["trace"]);

        auto follow = c.Post("/v1/chat", json{{"text", "make it orange"}, {"session_id", sid}}.dump(), "application/json");
        REQUIRE(follow);
        CHECK(follow->status == 200);
        auto fb = json::parse(follow->body);
        CHECK(fb["trace"]["input"]["kind"] == "history");
        auto sess = json::parse(c.Get("/v1/sessions/" + sid)->body);
        CHECK(sess["turns"].size() == 4);
        CHECK(sess["turns"][1]["role"] == "assistant");
        CHECK(sess["turns"][1]["trace_id"] == tid);
    }

    TEST_CASE("request validation") {
        RunningGateway g;
        auto c = g.client();
        CHECK(c.Post("/v1/chat", R"({"text":"  "})", "application/json")->status == 400);
        CHECK(c.Post("/v1/chat", "not json", "application/json")->status == 400);
        CHECK(c.Post("/v1/chat", R"({"text":5})", "application/json")->status == 400);
        CHECK(c.Post("/v1/chat", R"({"text":"hi","session_id":"nope"})", "application/json")->status == 404);
        CHECK(c.Post("/v1/chat", json{{"text", "hi"}, {"image_ref", std::string(64, 'a')}}.dump(), "application/json")->status == 400);
        CHECK(c.Get("/v1/jobs/missing")->status == 404);
        CHECK(c.Get("/v1/traces/missing")->status == 404);
        CHECK(c.Get("/v1/images/abc")->status == 404);
        CHECK(c.Get("/v1/sessions/missing")->status == 404);
        CHECK(c.Get("/v1/models?limit=0")->status == 400);
        CHECK(c.Get("/v1/models?offset=-1")->status == 400);
    }

    TEST_CASE("multipart upload becomes a multimodal input") {
        RunningGateway g;
        auto c = g.client();
        std::vector<std::uint8_t> rgb(3 * 2 * 2, 10);
        const auto png = encode_png(2, 2, rgb);
        httplib::MultipartFormDataItems items = {{"text", "like this but at night", "", ""}, {"image", png, "ref.png", "image/png"}};
        auto r = c.Post("/v1/chat", items);
        REQUIRE(r);
        CHECK(r->status == 200);
        auto body = json::parse(r->body);
        CHECK(body["trace"]["input"]["kind"] == "multimodal");
        CHECK(body["trace"]["input"]["image_ref"] == sha256_hex(png));
        auto again = c.Post("/v1/chat", json{{"text", "same again"}, {"image_ref", sha256_hex(png)}}.dump(), "application/json");
        CHECK(again->status == 200);
    }

    TEST_CASE("models are paginated in token order") {
        RunningGateway g;
        auto c = g.client();
        auto p1 = json::parse(c.Get("/v1/models?limit=3")->body);
        CHECK(p1["total"] == g.fx.registry->size());
        CHECK(p1["models"].size() == 3);
        CHECK(p1["models"][0]["token_index"] == 0);
        CHECK(p1["next_offset"] == 3);
        auto last = json::parse(c.Get("/v1/models?offset=3&limit=3")->body);
        CHECK(last["models"].size() == g.fx.registry->size() - 3);
        CHECK(last["next_offset"].is_null());
    }

    TEST_CASE("backend failure answers 503 and keeps the session turn") {
        PipelineSetup s;
        s.rewriter = std::make_shared<FailingRewriter>();
        RunningGateway g(s);
        auto c = g.client();
        auto r = c.Post("/v1/chat", R"({"text":"a fox"})", "application/json");
        REQUIRE(r);
        CHECK(r->status == 503);
        auto body = json::parse(r->body);
        CHECK(body["trace"]["failing_stage"] == "rewrite");
        CHECK(body["trace"]["backend_failure"] == true);
        CHECK(body["job_id"].is_null());
        auto sess = json::parse(c.Get("/v1/sessions/" + body["session_id"].get<std::string>())->body);
        CHECK(sess["turns"][1]["text"].get<std::string>().find("rewrite") != std::string::npos);
    }

    TEST_CASE("in-flight cap rejects extra requests") {
        PipelineSetup s;
        auto gate = std::make_shared<GatedRewriter>();
        s.rewriter = gate;
        GatewayOptions o;
        o.max_in_flight = 1;
        PipelineFixture fx(s);
        Gateway gw(fx.pipeline, o);
        auto first = std::async(std::launch::async, [&] { return gw.chat(std::nullopt, "a fox", std::nullopt, std::nullopt); });
        gate->entered.get_future().wait();
        auto second = gw.chat(std::nullopt, "a cat", std::nullopt, std::nullopt);
        CHECK(second.status == 503);
        gate->release.set_value();
        CHECK(first.get().status == 200);
    }

    TEST_CASE("session input assembly") {
        std::vector<SessionTurn> prior = {{Role::user, "a fox", {}}, {Role::assistant, "a fox, snow", std::string("t1")}};
        auto in = build_session_input(prior, "make it orange", std::nullopt);
        CHECK(in.kind == InputKind::history);
        CHECK(in.turns.size() == 3);
        CHECK(build_session_input({}, "a fox", std::nullopt).kind == InputKind::single);
        CHECK(build_session_input({}, "a fox", std::string(64, 'a')).kind == InputKind::multimodal);
    }
}
