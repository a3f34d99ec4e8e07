// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/http.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "autot2i/error.hpp"

namespace autot2i {

std::chrono::milliseconds RetryPolicy::delay_for(int failed_attempts) const {
    double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, std::max(0, failed_attempts - 1));
    return std::chrono::milliseconds(static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
}

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("invalid URL '" + url + "': missing scheme");
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.origin = url;
    } else {
        out.origin = url.substr(0, path_start);
        out.path_prefix = url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    }
    return out;
}

HttpClient::HttpClient(std::string base_url, HttpOptions options)
    : base_url_(std::move(base_url)),
      url_(parse_url(base_url_)),
      options_(std::move(options)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_in_flight)))) {}

HttpClient::~HttpClient() = default;

namespace {

httplib::Client make_client(const ParsedUrl& url, const HttpOptions& opt) {
    httplib::Client cli(url.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opt.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    if (!opt.api_key_env.empty()) {
        if (const char* key = std::getenv(opt.api_key_env.c_str()); key && *key) cli.set_bearer_token_auth(key);
    }
    return cli;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

template <typename F>
HttpResult HttpClient::with_retries(const std::string& what, F&& attempt) {
    struct Permit {
        std::counting_semaphore<>& s;
        explicit Permit(std::counting_semaphore<>& sem) : s(sem) { s.acquire(); }
        ~Permit() { s.release(); }
    } permit(*in_flight_);

    std::string last_error;
    const int attempts = std::max(1, options_.retry.max_attempts);
    for (int i = 1; i <= attempts; ++i) {
        auto cli = make_client(url_, options_);
        httplib::Result res = attempt(cli);
        if (res) {
            HttpResult out{res->status, res->get_header_value("Content-Type"), res->body};
            if (!retryable(out.status)) return out;
            last_error = "HTTP " + std::to_string(out.status);
        } else {
            last_error = httplib::to_string(res.error());
        }
        if (i < attempts) std::this_thread::sleep_for(options_.retry.delay_for(i));
    }
    throw BackendError(what + " " + base_url_ + " failed after " + std::to_string(attempts) + " attempt(s): " + last_error);
}

nlohmann::json HttpClient::post_json(const std::string& path, const nlohmann::json& body) {
    const auto full = url_.path_prefix + path;
    const auto payload = body.dump();
    auto res = with_retries("POST " + full, [&](httplib::Client& cli) { return cli.Post(full, payload, "application/json"); });
    if (res.status < 200 || res.status >= 300)
        throw BackendError("POST " + base_url_ + path + " returned HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200));
    try {
        return nlohmann::json::parse(res.body);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("POST " + base_url_ + path + " returned invalid JSON: " + e.what());
    }
}

HttpResult HttpClient::get(const std::string& path) {
    const auto full = url_.path_prefix + path;
    return with_retries("GET " + full, [&](httplib::Client& cli) { return cli.Get(full); });
}

}  // namespace autot2i
