// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "autot2i/http.hpp"

namespace autot2i {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct GenerationParams {
    double temperature = 0.2;
    int max_tokens = 1024;
};

/// Chat-completion shaped text generator. Implementations throw BackendError on failure.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const std::vector<ChatMessage>& messages, const GenerationParams& params) = 0;
};

struct RemoteLlmConfig {
    std::string url;  // base URL, requests go to <url>/v1/chat/completions
    std::string model;
    HttpOptions http;
};

/// OpenAI-compatible chat completions client.
class RemoteLlm final : public LlmBackend {
public:
    explicit RemoteLlm(RemoteLlmConfig config);
    std::string id() const override { return "remote:" + config_.model; }
    std::string complete(const std::vector<ChatMessage>& messages, const GenerationParams& params) override;

private:
    RemoteLlmConfig config_;
    std::unique_ptr<HttpClient> client_;
};

/// Deterministic in-process backend driven by a callback.
class FunctionLlm final : public LlmBackend {
public:
    using Fn = std::function<std::string(const std::vector<ChatMessage>&, const GenerationParams&)>;
    FunctionLlm(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
    std::string id() const override { return id_; }
    std::string complete(const std::vector<ChatMessage>& messages, const GenerationParams& params) override {
        ++calls_;
        return fn_(messages, params);
    }
    std::size_t calls() const { return calls_; }

private:
    std::string id_;
    Fn fn_;
    std::atomic<std::size_t> calls_{0};
};

/// Replays a fixed list of replies in order; a nullopt entry raises BackendError. The last entry
/// repeats once the script is exhausted.
class ScriptedLlm final : public LlmBackend {
public:
    explicit ScriptedLlm(std::vector<std::optional<std::string>> replies) : replies_(std::move(replies)) {}
    std::string id() const override { return "scripted"; }
    std::string complete(const std::vector<ChatMessage>& messages, const GenerationParams& params) override;
    std::size_t calls() const;
    /// Messages of every call, for asserting on retry feedback.
    std::vector<std::vector<ChatMessage>> transcript() const;

private:
    mutable std::mutex mu_;
    std::vector<std::optional<std::string>> replies_;
    std::vector<std::vector<ChatMessage>> transcript_;
};

/// Concatenated content of every user message, in order.
std::string user_content(const std::vector<ChatMessage>& messages);

}  // namespace autot2i
