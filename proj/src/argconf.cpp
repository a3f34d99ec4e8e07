// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/argconf.hpp"

#include <algorithm>

#include "autot2i/error.hpp"
#include "autot2i/rewriter.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

namespace {

std::string one_line(std::string_view s) {
    std::string out(s);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

std::string normalize_key(std::string_view k) {
    std::string out = text::to_lower(text::trim(k));
    for (char& c : out)
        if (c == ' ' || c == '-') c = '_';
    if (out == "cfg" || out == "guidance_scale") out = "cfg_scale";
    if (out == "sampler_name" || out == "sampling_method") out = "sampler";
    if (out == "negative") out = "negative_prompt";
    return out;
}

}  // namespace

std::vector<Demonstration> select_demos(const ModelRegistry& registry, const ModelRecord& model, std::string_view prompt,
                                        std::size_t k, const Encoder& encoder) {
    if (!registry.find(model.model_id)) throw ValidationError("model_id", "unknown model '" + model.model_id + "'");
    if (k == 0) return {};
    const auto query = encoder.encode_text(prompt);
    std::vector<std::pair<double, const Demonstration*>> scored;
    for (const auto* d : registry.demos_of(model.model_id)) scored.emplace_back(cosine(query, encoder.encode_text(d->prompt)), d);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->demo_id < b.second->demo_id;
    });
    std::vector<Demonstration> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(*scored[i].second);
    return out;
}

std::string IclPrompt::render() const {
    std::string out = header;
    for (const auto& b : demo_blocks) out += b;
    out += query;
    out += format_marker;
    return out;
}

IclPrompt assemble_icl(const ChatInput& input, std::string_view prompt, const ModelRecord& model,
                       const std::vector<Demonstration>& demos, std::size_t budget_chars) {
    const auto& schema = ArgumentSchema::canonical();
    IclPrompt icl;
    icl.header = "You configure generation arguments for the text-to-image model \"" + one_line(model.display_name) +
                 "\" (" + model.model_id + ").\n";
    if (!model.description.empty()) icl.header += "Model description: " + one_line(model.description) + "\n";
    icl.header +=
        "Each example pairs a prompt with the arguments used for a highly rated image made with this model. "
        "Follow the same pattern.\n\n";
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const auto& d = demos[i];
        if (d.model_id != model.model_id)
            throw ValidationError("demos", "demonstration '" + d.demo_id + "' belongs to '" + d.model_id + "', not '" +
                                               model.model_id + "'");
        icl.demo_ids.push_back(d.demo_id);
        icl.demo_blocks.push_back("Example " + std::to_string(i + 1) + "\nPrompt: " + one_line(d.prompt) + "\n" +
                                  std::string(kArgsFenceOpen) + "\n" + schema.render_block(d.args) +
                                  std::string(kFenceClose) + "\n\n");
    }
    icl.query = "Request\nUser input:\n" + serialize_input(input) + "\nPrompt: " + one_line(prompt) + "\n\n";
    icl.format_marker =
        "Answer with one fenced args block (opened by three backticks followed by the word args), "
        "containing one \"key: value\" line per argument.\n";

    while (!icl.demo_blocks.empty() && icl.render().size() > budget_chars) {
        icl.demo_blocks.pop_back();
        icl.demo_ids.pop_back();
    }
    return icl;
}

std::optional<std::string> first_fenced_block(std::string_view raw) {
    auto lines = text::split_lines(raw);
    std::size_t i = 0;
    for (; i < lines.size(); ++i)
        if (text::trim(lines[i]).rfind("```", 0) == 0) break;
    if (i == lines.size()) return std::nullopt;
    std::string body;
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
        if (text::trim(lines[j]) == kFenceClose) return body;
        body += lines[j];
        body += '\n';
    }
    return std::nullopt;  // unterminated
}

ArgumentSet parse_args(std::string_view raw, const ArgumentSchema& schema, const ArgumentSet& defaults) {
    auto block = first_fenced_block(raw);
    if (!block) throw ParseError("no fenced block found");
    ArgumentSet out;
    for (const auto& line : text::split_lines(*block)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        auto key = normalize_key(std::string_view(line).substr(0, colon));
        if (!schema.find(key)) continue;
        out.set(key, schema.parse_value(key, std::string_view(line).substr(colon + 1)));
    }
    for (const auto& spec : schema.specs()) {
        if (out.contains(spec.name)) continue;
        const auto* v = defaults.find(spec.name);
        out.set(spec.name, v ? *v : spec.default_value);
    }
    schema.validate(out);
    return out;
}

ArgConfigurator::ArgConfigurator(const ModelRegistry& registry, std::shared_ptr<const Encoder> similarity_encoder,
                                 std::shared_ptr<LlmBackend> backend, ArgConfOptions options)
    : registry_(registry), encoder_(std::move(similarity_encoder)), backend_(std::move(backend)), options_(options) {
    if (!encoder_) throw ValidationError("argconf", "similarity encoder is required");
    if (!backend_) throw ValidationError("argconf", "backend is required");
}

ConfigureResult ArgConfigurator::configure(const ChatInput& input, std::string_view prompt, const ModelRecord& model) const {
    const auto& schema = ArgumentSchema::canonical();
    auto demos = select_demos(registry_, model, prompt, options_.k, *encoder_);
    auto icl = assemble_icl(input, prompt, model, demos, options_.budget_chars);

    ConfigureResult result;
    result.demo_ids = icl.demo_ids;
    std::string user = icl.render();
    for (std::size_t attempt = 0; attempt <= options_.max_retries; ++attempt) {
        try {
            auto raw = backend_->complete({{"user", user}}, options_.params);
            result.args = parse_args(raw, schema, model.default_args);
            result.retry_count = attempt;
            return result;
        } catch (const Error& e) {
            result.errors.emplace_back(e.what());
            user += "\nYour previous answer was rejected (" + one_line(e.what()) +
                    "). Reply again with a corrected args block.";
        }
    }
    result.args = model.default_args;
    result.fallback = true;
    result.retry_count = options_.max_retries;
    return result;
}

std::shared_ptr<FunctionLlm> make_echo_args_llm() {
    return std::make_shared<FunctionLlm>("mock-echo-args", [](const std::vector<ChatMessage>& msgs, const GenerationParams&) {
        const auto content = user_content(msgs);
        auto pos = content.find(kArgsFenceOpen);
        if (pos == std::string::npos) return std::string("I would go with the usual settings.");
        auto end = content.find("\n" + std::string(kFenceClose), pos + kArgsFenceOpen.size());
        if (end == std::string::npos) return std::string("I would go with the usual settings.");
        return content.substr(pos, end + 1 + kFenceClose.size() - pos) + "\n";
    });
}

}  // namespace autot2i
