// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/llm.hpp"

#include "autot2i/error.hpp"

namespace autot2i {

RemoteLlm::RemoteLlm(RemoteLlmConfig config)
    : config_(std::move(config)), client_(std::make_unique<HttpClient>(config_.url, config_.http)) {}

std::string RemoteLlm::complete(const std::vector<ChatMessage>& messages, const GenerationParams& params) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json body = {{"model", config_.model},
                           {"messages", std::move(msgs)},
                           {"temperature", params.temperature},
                           {"max_tokens", params.max_tokens}};
    auto resp = client_->post_json("/v1/chat/completions", body);
    try {
        return resp.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw BackendError("chat completion response missing choices[0].message.content");
    }
}

std::string ScriptedLlm::complete(const std::vector<ChatMessage>& messages, const GenerationParams&) {
    std::lock_guard lock(mu_);
    transcript_.push_back(messages);
    if (replies_.empty()) throw BackendError("scripted backend has no replies");
    const auto idx = std::min(transcript_.size(), replies_.size()) - 1;
    const auto& r = replies_[idx];
    if (!r) throw BackendError("scripted backend failure");
    return *r;
}

std::size_t ScriptedLlm::calls() const {
    std::lock_guard lock(mu_);
    return transcript_.size();
}

std::vector<std::vector<ChatMessage>> ScriptedLlm::transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
}

std::string user_content(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (const auto& m : messages) {
        if (m.role != "user") continue;
        if (!out.empty()) out += '\n';
        out += m.content;
    }
    return out;
}

}  // namespace autot2i
