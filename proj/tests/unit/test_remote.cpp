// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <cstdlib>

#include "autot2i/encoders.hpp"
#include "autot2i/error.hpp"
#include "autot2i/evalkit.hpp"
#include "autot2i/llm.hpp"
#include "autot2i/render.hpp"
#include "http_fixture.hpp"

using namespace autot2i;
using autot2i::testing::LocalServer;
using nlohmann::json;

namespace {

HttpOptions fast_http() {
    HttpOptions o;
    o.timeout = std::chrono::milliseconds(5000);
    o.retry.base_delay = std::chrono::milliseconds(1);
    o.retry.max_delay = std::chrono::milliseconds(5);
    o.retry.max_attempts = 3;
    return o;
}

}  // namespace

TEST_SUITE("remote") {
    TEST_CASE("retry delays grow and cap") {
        RetryPolicy p;
        p.base_delay = std::chrono::milliseconds(100);
        p.max_delay = std::chrono::milliseconds(300);
        CHECK(p.delay_for(1).count() == 100);
        CHECK(p.delay_for(2).count() == 200);
        CHECK(p.delay_for(5).count() == 300);
    }

    TEST_CASE("url parsing") {
        auto u = parse_url("http://localhost:9000/api/");
        CHECK(u.origin == "http://localhost:9000");
        CHECK(u.path_prefix == "/api");
        CHECK(parse_url("http://h:1").path_prefix.empty());
    }

    TEST_CASE("chat completions client retries 5xx and sends the bearer token") {
        LocalServer s;
        std::atomic<int> calls{0};
        std::string auth;
        json last;
        s.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            if (++calls == 1) {
                res.status = 503;
                return;
            }
            auth = req.get_header_value("Authorization");
            last = json::parse(req.body);
            res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "hello"}}}}}}}.dump(),
                            "application/json");
        });
        s.start();
        ::setenv("AUTOT2I_TEST_KEY", "sekret", 1);
        auto http = fast_http();
        http.api_key_env = "AUTOT2I_TEST_KEY";
        RemoteLlm llm({s.url(), "tiny", http});
        CHECK(llm.complete({{"system", "sys"}, {"user", "hi"}}, {0.3, 64}) == "hello");
        CHECK(calls == 2);
        CHECK(auth == "Bearer sekret");
        CHECK(last["model"] == "tiny");
        CHECK(last["messages"].size() == 2);
        CHECK(last["temperature"].get<double>() == doctest::Approx(0.3));
    }

    TEST_CASE("client errors are not retried") {
        LocalServer s;
        std::atomic<int> calls{0};
        s.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.status = 400;
            res.set_content("bad", "text/plain");
        });
        s.start();
        RemoteLlm llm({s.url(), "tiny", fast_http()});
        CHECK_THROWS_AS(llm.complete({{"user", "hi"}}, {}), BackendError);
        CHECK(calls == 1);
    }

    TEST_CASE("unreachable backends raise BackendError") {
        auto http = fast_http();
        http.timeout = std::chrono::milliseconds(200);
        RemoteLlm llm({"http://127.0.0.1:1", "tiny", http});
        CHECK_THROWS_AS(llm.complete({{"user", "hi"}}, {}), BackendError);
    }

    TEST_CASE("remote encoder normalizes and checks dimension") {
        LocalServer s;
        s.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            json out = json::array();
            for (std::size_t i = 0; i < body["input"].size(); ++i) out.push_back({3.0, 4.0});
            res.set_content(json{{"embeddings", out}}.dump(), "application/json");
        });
        s.start();
        RemoteEncoder ok({s.url(), 2, "e", fast_http()});
        auto h = ok.encode_text("a fox");
        CHECK(h(0) == doctest::Approx(0.6));
        CHECK(h(1) == doctest::Approx(0.8));
        CHECK(ok.embed({"a", "b"}).size() == 2);
        RemoteEncoder wrong({s.url(), 3, "e", fast_http()});
        CHECK_THROWS_AS(wrong.encode_text("a fox"), BackendError);
    }

    TEST_CASE("remote renderer submits and polls") {
        LocalServer s;
        std::atomic<int> polls{0};
        json submitted;
        s.server().Post("/v1/generate", [&](const httplib::Request& req, httplib::Response& res) {
            submitted = json::parse(req.body);
            res.set_content(R"({"job_id":"j42"})", "application/json");
        });
        s.server().Get("/v1/jobs/j42", [&](const httplib::Request&, httplib::Response& res) {
            if (++polls < 3) return res.set_content(R"({"status":"running"})", "application/json");
            res.set_content("PNGDATA", "image/png");
        });
        s.start();
        RemoteRendererConfig c;
        c.url = s.url();
        c.poll_interval = std::chrono::milliseconds(5);
        c.http = fast_http();
        RemoteRenderer r(c);
        auto args = ArgumentSchema::canonical().defaults();
        CHECK(r.render({"m1", "a fox", args}) == "PNGDATA");
        CHECK(submitted["model_id"] == "m1");
        CHECK(submitted["args"]["steps"] == 20);
        CHECK(polls == 3);
    }

    TEST_CASE("remote renderer reports failed jobs and timeouts") {
        LocalServer s;
        s.server().Post("/v1/generate", [&](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            res.set_content(json{{"job_id", body["prompt"] == "fail" ? "bad" : "slow"}}.dump(), "application/json");
        });
        s.server().Get("/v1/jobs/bad", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"failed","reason":"nsfw"})", "application/json");
        });
        s.server().Get("/v1/jobs/slow", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"queued"})", "application/json");
        });
        s.start();
        RemoteRendererConfig c;
        c.url = s.url();
        c.poll_interval = std::chrono::milliseconds(5);
        c.job_timeout = std::chrono::milliseconds(50);
        c.http = fast_http();
        RemoteRenderer r(c);
        auto args = ArgumentSchema::canonical().defaults();
        try {
            r.render({"m", "fail", args});
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            CHECK(std::string(e.what()).find("nsfw") != std::string::npos);
        }
        CHECK_THROWS_AS(r.render({"m", "wait", args}), BackendError);
    }

    TEST_CASE("remote scorers") {
        LocalServer s;
        s.server().Post("/score", [](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            json scores = json::array();
            for (std::size_t i = 0; i < body["digests"].size(); ++i) scores.push_back(0.5 + i);
            res.set_content(json{{"scores", scores}}.dump(), "application/json");
        });
        s.server().Post("/features", [](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            json f = json::array();
            for (std::size_t i = 0; i < body["digests"].size(); ++i) f.push_back({1.0, double(i)});
            res.set_content(json{{"features", f}}.dump(), "application/json");
        });
        s.start();
        RemoteImageScorer clip("clip", s.url(), fast_http());
        CHECK(clip.score({"a", "b"}, {"p", "q"}) == std::vector<double>{0.5, 1.5});
        RemoteFeatureExtractor fx(s.url(), fast_http());
        auto f = fx.features({"a", "b", "c"});
        REQUIRE(f.size() == 3);
        CHECK(f[2](1) == 2.0);
    }
}
