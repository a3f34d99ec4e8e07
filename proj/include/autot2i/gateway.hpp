// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "autot2i/pipeline.hpp"

namespace httplib {
class Server;
}

namespace autot2i {

struct GatewayOptions {
    PipelineMode mode = PipelineMode::evo;
    std::size_t max_in_flight = 16;
    std::size_t page_size = 50;
    std::size_t max_page_size = 500;
};

struct SessionTurn {
    Role role = Role::user;
    std::string text;
    std::optional<std::string> trace_id;
};

struct Session {
    std::string session_id;
    std::string created_at;
    std::vector<SessionTurn> turns;
    std::mutex mu;  // serializes requests within the session
};

/// Prior turns plus the new user turn; single or multimodal when there is no history.
ChatInput build_session_input(const std::vector<SessionTurn>& prior, const std::string& text,
                              const std::optional<std::string>& image_ref);

/// Rewritten prompt and selected model, or the failing stage.
std::string assistant_summary(const StepwiseTrace& trace, const ModelRegistry& registry);

struct HttpReply {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

class Gateway {
public:
    Gateway(std::shared_ptr<Pipeline> pipeline, GatewayOptions options = {});
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    HttpReply chat(const std::optional<std::string>& session_id, const std::string& text,
                   const std::optional<std::string>& image_bytes, const std::optional<std::string>& image_ref);
    HttpReply job(const std::string& job_id) const;
    HttpReply models(std::size_t offset, std::optional<std::size_t> limit) const;
    HttpReply trace(const std::string& trace_id) const;
    HttpReply image(const std::string& digest) const;
    HttpReply session(const std::string& session_id) const;

    /// Registers every route on `server`.
    void mount(httplib::Server& server);

    /// Binds to `port` (0 = any free port) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves on the bound socket until stop(); blocks.
    bool listen_after_bind();
    void stop();

private:
    std::shared_ptr<Session> find_session(const std::string& id) const;

    std::shared_ptr<Pipeline> pipeline_;
    GatewayOptions options_;
    std::counting_semaphore<> in_flight_;
    mutable std::mutex sessions_mu_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace autot2i
