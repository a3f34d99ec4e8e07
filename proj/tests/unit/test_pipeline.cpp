// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <thread>
#include <zlib.h>

#include "autot2i/datastore.hpp"
#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/pipeline.hpp"
#include "fixtures.hpp"

using namespace autot2i;
using autot2i::testing::PipelineFixture;
using autot2i::testing::PipelineSetup;
using autot2i::testing::TempDir;
using nlohmann::json;

namespace {

std::uint32_t be32(const std::string& s, std::size_t at) {
    return (std::uint32_t(std::uint8_t(s[at])) << 24) | (std::uint32_t(std::uint8_t(s[at + 1])) << 16) |
           (std::uint32_t(std::uint8_t(s[at + 2])) << 8) | std::uint32_t(std::uint8_t(s[at + 3]));
}

class FailingRenderer final : public Renderer {
public:
    std::string id() const override { return "failing"; }
    std::string render(const RenderRequest&) override { throw BackendError("gpu on fire"); }
};

class FailingRewriter final : public RewriterBackend {
public:
    std::string id() const override { return "failing"; }
    std::string generate(const ChatInput&, const std::string&) override { throw BackendError("llm down"); }
};

std::string plan(const std::string& model, const std::string& extra = "steps: 25\n") {
    return "```plan\nprompt: a fox in snow, best quality\nmodel: " + model + "\n" + extra + "```";
}

}  // namespace

TEST_SUITE("render") {
    TEST_CASE("png encoding is structurally valid") {
        std::vector<std::uint8_t> rgb(3 * 4 * 2, 0x7f);
        auto png = encode_png(4, 2, rgb);
        CHECK(png.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
        CHECK(be32(png, 8) == 13);
        CHECK(png.substr(12, 4) == "IHDR");
        CHECK(be32(png, 16) == 4);
        CHECK(be32(png, 20) == 2);
        const auto crc = crc32(0, reinterpret_cast<const Bytef*>(png.data() + 12), 17);
        CHECK(be32(png, 29) == crc);
        CHECK(png.substr(png.size() - 8, 4) == "IEND");
        CHECK_THROWS(encode_png(4, 2, std::span<const std::uint8_t>(rgb.data(), 5)));
    }

    TEST_CASE("mock renderer is a pure function of the request") {
        MockRenderer r;
        auto args = ArgumentSchema::canonical().defaults();
        args.set("width", std::int64_t{64});
        args.set("height", std::int64_t{64});
        RenderRequest a{"m", "a fox", args};
        auto b = a;
        b.prompt = "a cat";
        CHECK(r.render(a) == r.render(a));
        CHECK(r.render(a) != r.render(b));
        CHECK(render_key(a) != render_key(b));
        auto bad = a;
        bad.args.set("steps", std::int64_t{0});
        CHECK_THROWS_AS(r.render(bad), ValidationError);
    }
}

TEST_SUITE("pipeline") {
    TEST_CASE("trace json round trip") {
        PipelineFixture f;
        auto t = f.pipeline->run_evo(ChatInput::single("a fox in the snow"), std::string("s1"));
        REQUIRE_FALSE(t.failed());
        auto back = trace_from_json(to_json(t));
        CHECK(to_json(back) == to_json(t));
        CHECK(back.sample_id == std::optional<std::string>("s1"));
        auto j = to_json(t);
        j["durations_ms"]["rewrite"] = -1.0;
        CHECK_THROWS(trace_from_json(j));
    }

    TEST_CASE("evo run fills every stage and dispatches a job") {
        PipelineFixture f;
        auto t = f.pipeline->run_evo(ChatInput::single("a castle at night"));
        REQUIRE_FALSE(t.failed());
        REQUIRE(t.selection);
        REQUIRE(t.model_id);
        CHECK(f.registry->find(*t.model_id));
        CHECK(f.registry->at_token(*t.selection->token_index).model_id == *t.model_id);
        CHECK(ArgumentSchema::canonical().is_valid(*t.args));
        REQUIRE(t.image_job);
        auto done = f.jobs->wait(t.image_job->job_id);
        CHECK(done.status == JobStatus::done);
        REQUIRE(done.digest);
        CHECK(is_digest(*done.digest));
        auto bytes = f.jobs->images().get(*done.digest);
        REQUIRE(bytes);
        CHECK(sha256_hex(*bytes) == *done.digest);
        std::vector<std::string> stages;
        for (const auto& [name, ms] : t.durations_ms) {
            stages.push_back(name);
            CHECK(ms >= 0.0);
        }
        CHECK(stages == std::vector<std::string>{"rewrite", "select", "configure", "dispatch"});
        CHECK(f.traces->find(t.trace_id));
    }

    TEST_CASE("unconstrained selection can yield no model") {
        PipelineSetup s;
        s.config.select_mode = SelectMode::unconstrained;
        PipelineFixture f(s);
        // Zero model rows: the model block ties at logit 0 and some word row beats it.
        f.head->model_rows.setZero();
        int failures = 0;
        for (auto text : {"a fox", "a castle", "neon city", "a cat", "old ship"}) {
            auto t = f.pipeline->run_evo(ChatInput::single(text));
            if (t.failed()) {
                ++failures;
                CHECK(*t.failing_stage == "select");
                REQUIRE(t.selection);
                CHECK(t.selection->no_model);
                CHECK_FALSE(t.image_job);
            }
        }
        CHECK(failures > 0);
    }

    TEST_CASE("backend failures are flagged and stop the trace") {
        PipelineSetup s;
        s.rewriter = std::make_shared<FailingRewriter>();
        PipelineFixture f(s);
        auto t = f.pipeline->run_evo(ChatInput::single("a fox"));
        CHECK(t.failed());
        CHECK(*t.failing_stage == "rewrite");
        CHECK(t.backend_failure);
        CHECK_FALSE(t.model_id);
        CHECK(f.traces->size() == 1);
    }

    TEST_CASE("render failures surface on the job, not the trace") {
        PipelineSetup s;
        s.renderer = std::make_shared<FailingRenderer>();
        PipelineFixture f(s);
        auto t = f.pipeline->run_evo(ChatInput::single("a fox"));
        CHECK_FALSE(t.failed());
        auto j = f.jobs->wait(t.image_job->job_id);
        CHECK(j.status == JobStatus::failed);
        CHECK(j.reason->find("gpu on fire") != std::string::npos);
    }

    TEST_CASE("direct mode with a valid plan") {
        PipelineSetup s;
        PipelineFixture probe;
        const auto& m = probe.registry->models()[1];
        s.direct_llm = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{plan(m.display_name)});
        PipelineFixture f(s);
        auto t = f.pipeline->run_direct(ChatInput::single("a fox"));
        REQUIRE_FALSE(t.failed());
        CHECK(*t.model_id == m.model_id);
        CHECK(*t.rewritten_prompt == "a fox in snow, best quality");
        CHECK(std::get<std::int64_t>(t.args->at("steps")) == 25);
        CHECK(std::get<double>(t.args->at("cfg_scale")) == std::get<double>(m.default_args.at("cfg_scale")));
        CHECK_FALSE(t.selection);
    }

    TEST_CASE("direct mode with an unknown model fails without fallback") {
        PipelineSetup s;
        auto llm = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{plan("Imaginary Diffusion XXL")});
        s.direct_llm = llm;
        PipelineFixture f(s);
        auto t = f.pipeline->run_direct(ChatInput::single("a fox"));
        CHECK(t.failed());
        CHECK(*t.failing_stage == "direct");
        CHECK_FALSE(t.model_id);
        CHECK_FALSE(t.args);
        CHECK_FALSE(t.image_job);
        CHECK_FALSE(t.args_fallback);
        CHECK(llm->calls() == 1);
        CHECK(f.jobs->jobs().empty());
    }

    TEST_CASE("direct mode retries malformed output, then gives up") {
        PipelineFixture probe;
        const auto id = probe.registry->models()[0].model_id;
        PipelineSetup s;
        auto llm = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{"hmm", plan(id, "width: 17\n"), plan(id)});
        s.direct_llm = llm;
        PipelineFixture f(s);
        auto t = f.pipeline->run_direct(ChatInput::single("a fox"));
        REQUIRE_FALSE(t.failed());
        CHECK(t.args_retry_count == 2);
        CHECK(t.args_errors.size() == 2);

        PipelineSetup s2;
        s2.direct_llm = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{"hmm"});
        PipelineFixture g(s2);
        auto bad = g.pipeline->run_direct(ChatInput::single("a fox"));
        CHECK(bad.failed());
        CHECK(bad.args_errors.size() == 3);
    }

    TEST_CASE("fixed baseline always uses the configured model and arguments") {
        auto fixed = ArgumentSchema::canonical().defaults();
        fixed.set("steps", std::int64_t{37});
        fixed.set("sampler", std::string("DDIM"));
        PipelineSetup s;
        s.config.fixed_args = fixed;
        PipelineFixture probe;
        s.config.baseline_model_id = probe.registry->models()[2].model_id;
        PipelineFixture f(s);
        for (auto text : {"a fox", "a castle at night", "portrait of a knight", "a bowl of ramen"}) {
            auto t = f.pipeline->run_fixed_baseline(ChatInput::single(text));
            REQUIRE_FALSE(t.failed());
            CHECK(*t.model_id == s.config.baseline_model_id);
            CHECK(*t.args == fixed);
            CHECK_FALSE(t.selection);
        }
    }

    TEST_CASE("pipeline construction checks") {
        PipelineSetup s;
        s.config.baseline_model_id = "nope";
        CHECK_THROWS_AS(PipelineFixture{s}, ValidationError);
        PipelineSetup s2;
        auto bad = ArgumentSchema::canonical().defaults();
        bad.set("clip_skip", std::int64_t{99});
        s2.config.fixed_args = bad;
        CHECK_THROWS_AS(PipelineFixture{s2}, ValidationError);
        PipelineFixture f;
        CHECK_FALSE(f.pipeline->supports(PipelineMode::direct));
        CHECK_THROWS(f.pipeline->run(ChatInput::single("x"), PipelineMode::direct));
    }

    TEST_CASE("trace store persists and reloads") {
        TempDir dir;
        std::string id;
        {
            PipelineSetup s;
            s.traces_path = dir / "traces.jsonl";
            s.images_dir = dir / "images";
            PipelineFixture f(s);
            id = f.pipeline->run_evo(ChatInput::single("a fox")).trace_id;
            f.pipeline->run_fixed_baseline(ChatInput::single("a cat"));
            f.jobs->wait_all();
        }
        TraceStore reopened(dir / "traces.jsonl");
        CHECK(reopened.size() == 2);
        REQUIRE(reopened.find(id));
        auto t = trace_from_json(json::parse(*reopened.find(id)));
        CHECK(t.trace_id == id);
        // Queued at persistence time; the job manager holds the final state.
        CHECK(t.image_job->status == JobStatus::queued);
        CHECK(std::distance(std::filesystem::directory_iterator(dir / "images"), {}) >= 1);
    }

    TEST_CASE("job manager rejects duplicate ids and invalid args") {
        JobManager jm(std::make_shared<MockRenderer>(), std::make_shared<ImageStore>());
        auto args = ArgumentSchema::canonical().defaults();
        args.set("width", std::int64_t{64});
        args.set("height", std::int64_t{64});
        jm.submit("j1", {"m", "p", args});
        CHECK_THROWS_AS(jm.submit("j1", {"m", "p", args}), ValidationError);
        auto bad = args;
        bad.set("steps", std::int64_t{-3});
        CHECK_THROWS_AS(jm.submit("j2", {"m", "p", bad}), ValidationError);
        CHECK(jm.wait("j1").status == JobStatus::done);
        CHECK_FALSE(jm.status("zz"));
    }

    TEST_CASE("same inputs give the same trace content and image across pipelines") {
        auto run = [] {
            PipelineFixture f;
            std::vector<json> contents;
            std::vector<std::string> digests;
            for (auto text : {"a fox", "a castle", "a neon street"}) {
                auto t = f.pipeline->run_evo(ChatInput::single(text));
                contents.push_back(trace_content(t));
                digests.push_back(*f.jobs->wait(t.image_job->job_id).digest);
            }
            return std::make_pair(contents, digests);
        };
        auto a = run(), b = run();
        CHECK(a.first == b.first);
        CHECK(a.second == b.second);
    }

    TEST_CASE("direct plan parsing") {
        auto p = parse_direct_plan("```plan\nPrompt: x\nModel_ID: m1\n```");
        CHECK(p.prompt == "x");
        CHECK(p.model_name == "m1");
        CHECK_THROWS_AS(parse_direct_plan("```plan\nprompt: x\n```"), ParseError);
        CHECK_THROWS_AS(parse_direct_plan("plain text"), ParseError);
        auto reg = autot2i::testing::small_registry(3, 12);
        auto req = render_direct_request(ChatInput::single("fox"), *reg);
        for (const auto& m : reg->models()) CHECK(req.find(m.model_id) != std::string::npos);
    }
}
