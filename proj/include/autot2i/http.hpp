// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include <json.hpp>

namespace autot2i {

struct RetryPolicy {
    int max_attempts = 3;  // total attempts, including the first
    std::chrono::milliseconds base_delay{200};
    std::chrono::milliseconds max_delay{5000};
    double multiplier = 2.0;

    std::chrono::milliseconds delay_for(int failed_attempts) const;
};

struct HttpOptions {
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;
    std::size_t max_in_flight = 4;
    /// Name of the environment variable holding a bearer token; empty = no auth header.
    std::string api_key_env;
};

struct HttpResult {
    int status = 0;
    std::string content_type;
    std::string body;
};

/// Splits "http://host:port/prefix" into the scheme+authority and a path prefix.
struct ParsedUrl {
    std::string origin;
    std::string path_prefix;
};
ParsedUrl parse_url(const std::string& url);

/// Small JSON-over-HTTP client shared by the remote backends. Transport errors, 429 and 5xx are
/// retried with exponential backoff; other statuses are returned (get) or raised (post_json).
/// Concurrent calls are capped at `max_in_flight`.
class HttpClient {
public:
    HttpClient(std::string base_url, HttpOptions options);
    ~HttpClient();

    nlohmann::json post_json(const std::string& path, const nlohmann::json& body);
    HttpResult get(const std::string& path);

    const std::string& base_url() const { return base_url_; }

private:
    template <typename F>
    HttpResult with_retries(const std::string& what, F&& attempt);

    std::string base_url_;
    ParsedUrl url_;
    HttpOptions options_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace autot2i
