// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autot2i/datastore.hpp"
#include "autot2i/encoders.hpp"
#include "autot2i/llm.hpp"

namespace autot2i {

inline constexpr std::string_view kArgsFenceOpen = "```args";
inline constexpr std::string_view kFenceClose = "```";

/// Demonstrations of `model` ranked by cosine(encode_text(demo.prompt), encode_text(p)) descending,
/// ties by demo_id ascending; at most k.
std::vector<Demonstration> select_demos(const ModelRegistry& registry, const ModelRecord& model, std::string_view prompt,
                                        std::size_t k, const Encoder& encoder);

struct IclPrompt {
    std::string header;
    std::vector<std::string> demo_ids;
    std::vector<std::string> demo_blocks;
    std::string query;
    std::string format_marker;

    std::string render() const;
};

/// Renders the in-context prompt. Demonstrations must belong to `model`; when the rendering exceeds
/// `budget_chars`, lowest-ranked demonstrations are dropped until it fits (down to zero-shot).
IclPrompt assemble_icl(const ChatInput& input, std::string_view prompt, const ModelRecord& model,
                       const std::vector<Demonstration>& demos, std::size_t budget_chars);

/// Extracts the first fenced block of `raw` and reads "key: value" lines. Unknown keys are ignored,
/// missing keys come from `defaults`, and every value is validated against `schema`.
/// Throws ParseError when no fenced block exists and ValidationError naming the offending key.
ArgumentSet parse_args(std::string_view raw, const ArgumentSchema& schema, const ArgumentSet& defaults);

/// Body lines of the first fenced block in `raw`, or nullopt.
std::optional<std::string> first_fenced_block(std::string_view raw);

struct ArgConfOptions {
    std::size_t k = 8;
    std::size_t budget_chars = 6000;
    std::size_t max_retries = 2;
    GenerationParams params{0.2, 512};
};

struct ConfigureResult {
    ArgumentSet args;
    bool fallback = false;
    std::size_t retry_count = 0;
    std::vector<std::string> errors;    // one per rejected attempt
    std::vector<std::string> demo_ids;  // demonstrations shown to the backend
};

/// Produces arguments for (input, prompt, model) by in-context learning over the model's
/// demonstrations. Never throws for backend or parse failures: after `max_retries` retries it
/// returns the model's default_args with `fallback` set.
class ArgConfigurator {
public:
    ArgConfigurator(const ModelRegistry& registry, std::shared_ptr<const Encoder> similarity_encoder,
                    std::shared_ptr<LlmBackend> backend, ArgConfOptions options = {});

    ConfigureResult configure(const ChatInput& input, std::string_view prompt, const ModelRecord& model) const;

    const ArgConfOptions& options() const { return options_; }

private:
    const ModelRegistry& registry_;
    std::shared_ptr<const Encoder> encoder_;
    std::shared_ptr<LlmBackend> backend_;
    ArgConfOptions options_;
};

/// Mock backend that answers with the first ```args block found in its user messages, i.e. the
/// top-ranked demonstration's arguments. Replies with prose when there is none.
std::shared_ptr<FunctionLlm> make_echo_args_llm();

}  // namespace autot2i
