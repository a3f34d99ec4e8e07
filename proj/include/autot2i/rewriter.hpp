// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "autot2i/datastore.hpp"
#include "autot2i/llm.hpp"

namespace autot2i {

inline constexpr std::string_view kRewriteInstruction =
    "Rewrite the following request into a professional text-to-image prompt:";

/// Task prefix prepended to every serialized request. The template must begin with
/// "{instruction}" and contain "{input}".
struct RewritePrefix {
    std::string instruction{kRewriteInstruction};
    std::string templ = "{instruction}\n{input}";

    void validate() const;
};

/// Role-tagged, newline-escaped serialization of a request: one "USER: ..." / "ASSISTANT: ..."
/// line per turn, then "[image:<digest>]" for multimodal input.
std::string serialize_input(const ChatInput& input);

std::string build_prefix(const ChatInput& input, const RewritePrefix& prefix = {});

class RewriterBackend {
public:
    virtual ~RewriterBackend() = default;
    virtual std::string id() const = 0;
    /// Produces raw rewrite text for `input`; `prefix` is the fully rendered task prefix.
    virtual std::string generate(const ChatInput& input, const std::string& prefix) = 0;
};

inline constexpr std::string_view kMockQualitySuffix = ", highly detailed, best quality";

/// Deterministic stand-in: last user turn + a fixed quality-tag suffix.
class MockRewriter final : public RewriterBackend {
public:
    std::string id() const override { return "mock-rewriter"; }
    std::string generate(const ChatInput& input, const std::string& prefix) override;
};

/// Rewrites through a chat-completion backend. `tuned` sends the dedicated system prompt; the
/// untuned form sends the bare prefix and relies on the backend's default in-context ability.
class LlmRewriter final : public RewriterBackend {
public:
    LlmRewriter(std::shared_ptr<LlmBackend> llm, bool tuned = true, GenerationParams params = {0.2, 512});
    std::string id() const override;
    std::string generate(const ChatInput& input, const std::string& prefix) override;

    static std::string_view system_prompt();

private:
    std::shared_ptr<LlmBackend> llm_;
    bool tuned_;
    GenerationParams params_;
};

struct RewriterOptions {
    std::size_t token_cap = 512;
    RewritePrefix prefix;
};

class Rewriter {
public:
    explicit Rewriter(std::shared_ptr<RewriterBackend> backend, RewriterOptions options = {});

    /// Non-empty, whitespace-trimmed prompt capped at `token_cap` whitespace tokens.
    /// Throws ValidationError for an empty user turn or an empty rewrite; BackendError propagates.
    std::string rewrite(const ChatInput& input) const;

    const RewriterBackend& backend() const { return *backend_; }
    const RewriterOptions& options() const { return options_; }

private:
    std::shared_ptr<RewriterBackend> backend_;
    RewriterOptions options_;
};

}  // namespace autot2i
