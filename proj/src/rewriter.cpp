// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/rewriter.hpp"

#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

namespace {

std::string escape_line(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void RewritePrefix::validate() const {
    if (instruction.empty()) throw ValidationError("instruction", "task instruction must be non-empty");
    if (templ.rfind("{instruction}", 0) != 0) throw ValidationError("template", "must begin with {instruction}");
    if (templ.find("{input}") == std::string::npos) throw ValidationError("template", "must contain {input}");
}

std::string serialize_input(const ChatInput& input) {
    std::string out;
    for (std::size_t i = 0; i < input.turns.size(); ++i) {
        if (i > 0) out += '\n';
        out += input.turns[i].role == Role::user ? "USER: " : "ASSISTANT: ";
        out += escape_line(input.turns[i].text);
    }
    if (input.image_ref) out += "\n[image:" + escape_line(*input.image_ref) + "]";
    return out;
}

std::string build_prefix(const ChatInput& input, const RewritePrefix& prefix) {
    prefix.validate();
    // Substitute {input} first so request text containing "{instruction}" is left alone.
    std::string out = prefix.templ;
    auto pos = out.find("{input}");
    out.replace(pos, 7, serialize_input(input));
    out.replace(0, 13, prefix.instruction);
    return out;
}

std::string MockRewriter::generate(const ChatInput& input, const std::string&) {
    return input.last_user_turn().text + std::string(kMockQualitySuffix);
}

LlmRewriter::LlmRewriter(std::shared_ptr<LlmBackend> llm, bool tuned, GenerationParams params)
    : llm_(std::move(llm)), tuned_(tuned), params_(params) {}

std::string LlmRewriter::id() const { return (tuned_ ? "llm-rewriter:" : "llm-rewriter-untuned:") + llm_->id(); }

std::string_view LlmRewriter::system_prompt() {
    return "You write prompts for text-to-image diffusion models. Given a casual request, possibly with "
           "earlier conversation turns and a reference image marker, produce one professional prompt: "
           "subject first, then style, composition, lighting and quality tags, comma separated. "
           "Carry forward details from earlier turns unless the user changes them. "
           "Reply with the prompt only, no preamble and no quotes.";
}

std::string LlmRewriter::generate(const ChatInput&, const std::string& prefix) {
    std::vector<ChatMessage> msgs;
    if (tuned_) msgs.push_back({"system", std::string(system_prompt())});
    msgs.push_back({"user", prefix});
    auto out = text::trim(llm_->complete(msgs, params_));
    if (text::starts_with_ci(out, "prompt:")) out = text::trim(std::string_view(out).substr(7));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = text::trim(std::string_view(out).substr(1, out.size() - 2));
    return out;
}

Rewriter::Rewriter(std::shared_ptr<RewriterBackend> backend, RewriterOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
    if (!backend_) throw ValidationError("rewriter", "backend is required");
    if (options_.token_cap == 0) throw ValidationError("token_cap", "must be > 0");
    options_.prefix.validate();
}

std::string Rewriter::rewrite(const ChatInput& input) const {
    input.validate();
    if (text::trim(input.last_user_turn().text).empty()) throw ValidationError("text", "empty user text");
    auto raw = backend_->generate(input, build_prefix(input, options_.prefix));
    auto out = text::trim(text::truncate_tokens(text::trim(raw), options_.token_cap));
    if (out.empty()) throw ValidationError("rewrite", "empty rewrite");
    return out;
}

}  // namespace autot2i
