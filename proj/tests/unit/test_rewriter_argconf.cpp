// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "autot2i/argconf.hpp"
#include "autot2i/error.hpp"
#include "autot2i/rewriter.hpp"
#include "autot2i/text.hpp"
#include "fixtures.hpp"

using namespace autot2i;

TEST_SUITE("rewriter") {
    TEST_CASE("serialize_input tags roles and escapes newlines") {
        auto in = ChatInput::history({{Role::user, "a cat\non a mat"}, {Role::assistant, "ok"}, {Role::user, "bigger"}});
        CHECK(serialize_input(in) == "USER: a cat\\non a mat\nASSISTANT: ok\nUSER: bigger");
        auto mm = ChatInput::multimodal("like this", "abc");
        CHECK(serialize_input(mm) == "USER: like this\n[image:abc]");
    }

    TEST_CASE("prefix template substitution") {
        auto in = ChatInput::single("draw {instruction}");
        auto p = build_prefix(in);
        CHECK(text::starts_with_ci(p, std::string(kRewriteInstruction)));
        CHECK(p.find("USER: draw {instruction}") != std::string::npos);
        RewritePrefix bad;
        bad.templ = "{input} {instruction}";
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    }

    TEST_CASE("token cap and empty rewrites") {
        RewriterOptions o;
        o.token_cap = 3;
        Rewriter r(std::make_shared<MockRewriter>(), o);
        CHECK(r.rewrite(ChatInput::single("one two three four five")) == "one two three");
        auto empty = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{"   "});
        Rewriter e(std::make_shared<LlmRewriter>(empty));
        CHECK_THROWS_AS(e.rewrite(ChatInput::single("a cat")), ValidationError);
        CHECK_THROWS_AS(r.rewrite(ChatInput::single("  ")), ValidationError);
    }

    TEST_CASE("llm rewriter strips labels and quotes; untuned sends no system prompt") {
        auto llm = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{"Prompt: \"a fox, snow\""});
        Rewriter tuned(std::make_shared<LlmRewriter>(llm, true));
        CHECK(tuned.rewrite(ChatInput::single("fox")) == "a fox, snow");
        CHECK(llm->transcript().at(0).at(0).role == "system");
        auto llm2 = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{"a fox"});
        Rewriter untuned(std::make_shared<LlmRewriter>(llm2, false));
        untuned.rewrite(ChatInput::single("fox"));
        CHECK(llm2->transcript().at(0).size() == 1);
        CHECK(llm2->transcript().at(0).at(0).role == "user");
    }

    TEST_CASE("backend errors propagate") {
        auto llm = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{std::nullopt});
        Rewriter r(std::make_shared<LlmRewriter>(llm));
        CHECK_THROWS_AS(r.rewrite(ChatInput::single("fox")), BackendError);
    }
}

TEST_SUITE("argconf") {
    using autot2i::testing::make_demo;
    using autot2i::testing::make_model;

    ModelRegistry tiny_registry() {
        std::vector<Demonstration> d = {make_demo("d1", "a", "a red fox in snow"), make_demo("d2", "a", "a castle at night"),
                                        make_demo("d3", "a", "a red fox sleeping in snow"), make_demo("d4", "b", "a red fox")};
        d[0].args.set("steps", std::int64_t{31});
        d[2].args.set("steps", std::int64_t{33});
        return ModelRegistry({make_model("a", 0, {"d1", "d2", "d3"}), make_model("b", 1, {"d4"})}, d);
    }

    TEST_CASE("select_demos ranks by prompt similarity within the model") {
        auto reg = tiny_registry();
        ToyEncoder enc;
        auto top = select_demos(reg, reg.at("a"), "a red fox in the snow", 2, enc);
        REQUIRE(top.size() == 2);
        for (const auto& d : top) CHECK(d.model_id == "a");
        CHECK(top[0].demo_id != "d2");
        CHECK(top[1].demo_id != "d2");
        CHECK(select_demos(reg, reg.at("a"), "x", 0, enc).empty());
        CHECK(select_demos(reg, reg.at("a"), "x", 10, enc).size() == 3);
    }

    TEST_CASE("assemble_icl drops lowest-ranked demonstrations to fit the budget") {
        auto reg = tiny_registry();
        std::vector<Demonstration> demos = {*reg.find_demo("d1"), *reg.find_demo("d3"), *reg.find_demo("d2")};
        auto in = ChatInput::single("fox please");
        auto full = assemble_icl(in, "a fox", reg.at("a"), demos, 100000);
        CHECK(full.demo_ids == std::vector<std::string>{"d1", "d3", "d2"});
        const auto one_block = full.demo_blocks[2].size();
        auto cut = assemble_icl(in, "a fox", reg.at("a"), demos, full.render().size() - one_block);
        CHECK(cut.demo_ids == std::vector<std::string>{"d1", "d3"});
        auto zero = assemble_icl(in, "a fox", reg.at("a"), demos, 10);
        CHECK(zero.demo_ids.empty());
        CHECK(zero.render().find(std::string(kArgsFenceOpen)) == std::string::npos);
        CHECK_THROWS_AS(assemble_icl(in, "a fox", reg.at("b"), demos, 100000), ValidationError);
    }

    TEST_CASE("parse_args fills defaults, ignores unknown keys and validates") {
        const auto& s = ArgumentSchema::canonical();
        auto defaults = s.defaults();
        defaults.set("steps", std::int64_t{28});
        auto a = parse_args("sure!\n```args\nCFG Scale: 5\nsampler: dpm++ 2m karras\nlora: x\n```\nbye", s, defaults);
        CHECK(std::get<double>(a.at("cfg_scale")) == doctest::Approx(5.0));
        CHECK(std::get<std::string>(a.at("sampler")) == "DPM++ 2M Karras");
        CHECK(std::get<std::int64_t>(a.at("steps")) == 28);
        CHECK(s.is_valid(a));
        CHECK_THROWS_AS(parse_args("no block here", s, defaults), ParseError);
        CHECK_THROWS_AS(parse_args("```args\nsteps: 30\n", s, defaults), ParseError);
        try {
            parse_args("```args\nwidth: 100\n```", s, defaults);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(e.field() == "width");
        }
    }

    TEST_CASE("configurator retries with feedback, then falls back to model defaults") {
        auto reg = tiny_registry();
        auto enc = std::make_shared<ToyEncoder>();
        auto llm = std::make_shared<ScriptedLlm>(
            std::vector<std::optional<std::string>>{"no idea", std::nullopt, "```args\nsteps: 40\n```"});
        ArgConfigurator c(reg, enc, llm);
        auto r = c.configure(ChatInput::single("fox"), "a red fox", reg.at("a"));
        CHECK_FALSE(r.fallback);
        CHECK(r.retry_count == 2);
        CHECK(r.errors.size() == 2);
        CHECK(std::get<std::int64_t>(r.args.at("steps")) == 40);
        CHECK(user_content(llm->transcript().at(1)).find("previous answer was rejected") != std::string::npos);

        auto never = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{"nope"});
        ArgConfigurator f(reg, enc, never);
        auto fb = f.configure(ChatInput::single("fox"), "a red fox", reg.at("a"));
        CHECK(fb.fallback);
        CHECK(fb.args == reg.at("a").default_args);
        CHECK(never->calls() == 3);
    }

    TEST_CASE("echo backend returns the top demonstration's arguments") {
        auto reg = tiny_registry();
        ArgConfigurator c(reg, std::make_shared<ToyEncoder>(), make_echo_args_llm());
        auto r = c.configure(ChatInput::single("fox"), "a red fox in snow", reg.at("a"));
        REQUIRE_FALSE(r.demo_ids.empty());
        CHECK(r.args == reg.find_demo(r.demo_ids.front())->args);
        CHECK(r.retry_count == 0);
    }
}
