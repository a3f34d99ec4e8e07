// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/gateway.hpp"

#include <httplib.h>

#include <chrono>
#include <charconv>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

using json = nlohmann::json;

namespace {

HttpReply error_reply(int status, const std::string& message) {
    return {status, "application/json", json{{"error", message}}.dump()};
}

std::string now_iso() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::optional<std::size_t> parse_size(const std::string& s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

ChatInput build_session_input(const std::vector<SessionTurn>& prior, const std::string& text,
                              const std::optional<std::string>& image_ref) {
    if (prior.empty()) return image_ref ? ChatInput::multimodal(text, *image_ref) : ChatInput::single(text);
    std::vector<Turn> turns;
    for (const auto& t : prior) turns.push_back({t.role, t.text});
    turns.push_back({Role::user, text});
    auto in = ChatInput::history(std::move(turns));
    in.image_ref = image_ref;
    return in;
}

std::string assistant_summary(const StepwiseTrace& trace, const ModelRegistry& registry) {
    if (trace.failed()) return "generation failed at " + *trace.failing_stage;
    std::string model = trace.model_id.value_or("");
    if (const auto* m = registry.find(model)) model = m->display_name;
    return trace.rewritten_prompt.value_or("") + " [model: " + model + "]";
}

Gateway::Gateway(std::shared_ptr<Pipeline> pipeline, GatewayOptions options)
    : pipeline_(std::move(pipeline)),
      options_(options),
      in_flight_(static_cast<std::ptrdiff_t>(options.max_in_flight)),
      server_(std::make_unique<httplib::Server>()) {
    if (!pipeline_) throw ValidationError("pipeline", "gateway requires a pipeline");
    if (options_.max_in_flight == 0) throw ValidationError("max_in_flight", "must be positive");
    if (!pipeline_->supports(options_.mode))
        throw ValidationError("mode", "pipeline is not configured for mode '" + std::string(to_string(options_.mode)) + "'");
    mount(*server_);
}

Gateway::~Gateway() { stop(); }

std::shared_ptr<Session> Gateway::find_session(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

HttpReply Gateway::chat(const std::optional<std::string>& session_id, const std::string& text,
                        const std::optional<std::string>& image_bytes, const std::optional<std::string>& image_ref) {
    if (text::trim(text).empty()) return error_reply(400, "text must not be empty");
    std::shared_ptr<Session> session;
    if (session_id) {
        session = find_session(*session_id);
        if (!session) return error_reply(404, "unknown session '" + *session_id + "'");
    }
    std::optional<std::string> image;
    auto& store = pipeline_->components().jobs->images();
    if (image_bytes) {
        if (image_bytes->empty()) return error_reply(400, "image upload is empty");
        image = store.put(*image_bytes);
    } else if (image_ref) {
        if (!store.get(*image_ref)) return error_reply(400, "unknown image_ref '" + *image_ref + "'");
        image = *image_ref;
    }
    if (!in_flight_.try_acquire()) return error_reply(503, "server busy");
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    if (!session) {
        session = std::make_shared<Session>();
        session->session_id = random_id();
        session->created_at = now_iso();
        std::lock_guard lock(sessions_mu_);
        sessions_[session->session_id] = session;
    }
    std::lock_guard turn_lock(session->mu);
    const auto input = build_session_input(session->turns, text, image);
    StepwiseTrace trace;
    try {
        trace = pipeline_->run(input, options_.mode);
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
    session->turns.push_back({Role::user, text, std::nullopt});
    session->turns.push_back({Role::assistant, assistant_summary(trace, *pipeline_->components().registry), trace.trace_id});

    const auto line = pipeline_->components().traces->find(trace.trace_id).value_or(to_json(trace).dump());
    const json job_id = trace.image_job ? json(trace.image_job->job_id) : json(nullptr);
    std::string body = "{\"session_id\":" + json(session->session_id).dump() + ",\"job_id\":" + job_id.dump() +
                       ",\"trace\":" + line + "}";
    return {trace.backend_failure ? 503 : 200, "application/json", std::move(body)};
}

HttpReply Gateway::job(const std::string& job_id) const {
    auto& jobs = *pipeline_->components().jobs;
    auto st = jobs.status(job_id);
    if (!st) return error_reply(404, "unknown job '" + job_id + "'");
    if (st->status == JobStatus::done) {
        if (auto bytes = jobs.images().get(*st->digest)) return {200, "image/png", std::move(*bytes)};
        return error_reply(500, "image for job '" + job_id + "' is missing");
    }
    return {200, "application/json", to_json(*st).dump()};
}

HttpReply Gateway::models(std::size_t offset, std::optional<std::size_t> limit) const {
    const auto& reg = *pipeline_->components().registry;
    const std::size_t lim = limit.value_or(options_.page_size);
    if (lim == 0 || lim > options_.max_page_size)
        return error_reply(400, "limit must be in [1, " + std::to_string(options_.max_page_size) + "]");
    json items = json::array();
    const auto& ms = reg.models();
    for (std::size_t i = offset; i < ms.size() && i < offset + lim; ++i)
        items.push_back({{"model_id", ms[i].model_id},
                         {"display_name", ms[i].display_name},
                         {"description", ms[i].description},
                         {"base_family", ms[i].base_family},
                         {"token_index", ms[i].token_index},
                         {"demos", ms[i].demo_ids.size()}});
    json body = {{"models", items}, {"total", ms.size()}, {"offset", offset}, {"limit", lim}};
    body["next_offset"] = offset + lim < ms.size() ? json(offset + lim) : json(nullptr);
    return {200, "application/json", body.dump()};
}

HttpReply Gateway::trace(const std::string& trace_id) const {
    auto line = pipeline_->components().traces->find(trace_id);
    if (!line) return error_reply(404, "unknown trace '" + trace_id + "'");
    return {200, "application/json", std::move(*line)};
}

HttpReply Gateway::image(const std::string& digest) const {
    auto bytes = pipeline_->components().jobs->images().get(digest);
    if (!bytes) return error_reply(404, "unknown image '" + digest + "'");
    return {200, "image/png", std::move(*bytes)};
}

HttpReply Gateway::session(const std::string& session_id) const {
    auto s = find_session(session_id);
    if (!s) return error_reply(404, "unknown session '" + session_id + "'");
    std::lock_guard lock(s->mu);
    json turns = json::array();
    for (const auto& t : s->turns) {
        json j = {{"role", to_string(t.role)}, {"text", t.text}};
        if (t.trace_id) j["trace_id"] = *t.trace_id;
        turns.push_back(std::move(j));
    }
    return {200, "application/json",
            json{{"session_id", s->session_id}, {"created_at", s->created_at}, {"turns", turns}}.dump()};
}

void Gateway::mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const HttpReply& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };

    server.Post("/v1/chat", [this, send](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> session_id, image_bytes, image_ref;
        std::string text;
        if (req.is_multipart_form_data()) {
            if (req.has_file("text")) text = req.get_file_value("text").content;
            if (req.has_file("session_id")) session_id = req.get_file_value("session_id").content;
            if (req.has_file("image")) image_bytes = req.get_file_value("image").content;
        } else {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error&) {
                send(res, error_reply(400, "request body is not valid JSON"));
                return;
            }
            if (!body.is_object() || (body.contains("text") && !body["text"].is_string())) {
                send(res, error_reply(400, "text must be a string"));
                return;
            }
            text = body.value("text", "");
            if (body.contains("session_id") && body["session_id"].is_string()) session_id = body["session_id"].get<std::string>();
            if (body.contains("image_ref") && body["image_ref"].is_string()) image_ref = body["image_ref"].get<std::string>();
        }
        if (session_id && session_id->empty()) session_id.reset();
        send(res, chat(session_id, text, image_bytes, image_ref));
    });

    server.Get(R"(/v1/jobs/([A-Za-z0-9_-]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, job(req.matches[1]));
    });

    server.Get("/v1/models", [this, send](const httplib::Request& req, httplib::Response& res) {
        std::size_t offset = 0;
        std::optional<std::size_t> limit;
        if (req.has_param("offset")) {
            auto v = parse_size(req.get_param_value("offset"));
            if (!v) return send(res, error_reply(400, "offset must be a non-negative integer"));
            offset = *v;
        }
        if (req.has_param("limit")) {
            auto v = parse_size(req.get_param_value("limit"));
            if (!v) return send(res, error_reply(400, "limit must be a non-negative integer"));
            limit = *v;
        }
        send(res, models(offset, limit));
    });

    server.Get(R"(/v1/traces/([A-Za-z0-9_-]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, trace(req.matches[1]));
    });

    server.Get(R"(/v1/images/([A-Za-z0-9]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        const std::string digest = req.matches[1];
        auto r = image(digest);
        if (r.status == 200) {
            res.set_header("Cache-Control", "public, max-age=31536000, immutable");
            res.set_header("ETag", "\"" + digest + "\"");
        }
        send(res, r);
    });

    server.Get(R"(/v1/sessions/([A-Za-z0-9_-]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, session(req.matches[1]));
    });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"ok\":true}", "application/json");
    });
}

int Gateway::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

bool Gateway::listen_after_bind() { return server_->listen_after_bind(); }

void Gateway::stop() {
    if (server_) server_->stop();
}

}  // namespace autot2i
