// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/config.hpp"

#include <fstream>
#include <set>

#include "autot2i/text.hpp"

namespace autot2i {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string summarize(const std::vector<ConfigIssue>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& i : issues) out += " " + i.field + ": " + i.message + ";";
    out.pop_back();
    return out;
}

json::json_pointer pointer(std::string_view dotted) {
    std::string p;
    for (const auto& part : text::split(dotted, '.')) p += "/" + part;
    return json::json_pointer(p);
}

json backend(const char* kind) { return {{"kind", kind}, {"url", ""}, {"model", ""}}; }

void check_types(const json& def, const json& val, const std::string& prefix, std::vector<ConfigIssue>& issues) {
    if (!val.is_object()) return;
    for (const auto& [k, v] : val.items()) {
        const auto field = prefix.empty() ? k : prefix + "." + k;
        if (!def.contains(k)) {
            issues.push_back({field, "unknown key"});
            continue;
        }
        const auto& d = def[k];
        if (d.is_null() || v.is_null()) continue;
        if (d.is_object()) {
            if (!v.is_object())
                issues.push_back({field, "expected an object"});
            else
                check_types(d, v, field, issues);
        } else if (d.is_string() && !v.is_string()) {
            issues.push_back({field, "expected a string"});
        } else if (d.is_boolean() && !v.is_boolean()) {
            issues.push_back({field, "expected a boolean"});
        } else if (d.is_number() && !v.is_number()) {
            issues.push_back({field, "expected a number"});
        } else if (d.is_number_integer() && v.is_number_float()) {
            issues.push_back({field, "expected an integer"});
        }
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues) : Error(summarize(issues)), issues_(std::move(issues)) {}

json AppConfig::defaults() {
    return {
        {"registry", ""},
        {"demos", ""},
        {"benchmark", ""},
        {"train_set", ""},
        {"out_dir", "out"},
        {"seed", 0},
        {"encoder", {{"kind", "toy"}, {"dim", 64}, {"seed", 1234}, {"buckets", 4096}, {"url", ""}, {"model", ""}}},
        {"selector",
         {{"preset", "toy"},
          {"checkpoint", ""},
          {"vocab", 256},
          {"word_seed", 0},
          {"select_mode", "constrained"},
          {"denominator", "full"},
          {"threads", 1},
          {"optimizer", nullptr},
          {"learning_rate", nullptr},
          {"weight_decay", nullptr},
          {"epochs", nullptr},
          {"batch_size", nullptr}}},
        {"rewriter", {{"kind", "mock"}, {"url", ""}, {"model", ""}, {"token_cap", 512}}},
        {"argconf",
         {{"kind", "echo"}, {"url", ""}, {"model", ""}, {"k", 8}, {"budget_chars", 6000}, {"max_retries", 2}}},
        {"direct", {{"kind", "none"}, {"url", ""}, {"model", ""}, {"max_retries", 2}}},
        {"baseline", {{"model_id", ""}, {"rewriter", backend("mock")}, {"args", nullptr}}},
        {"renderer", {{"kind", "mock"}, {"url", ""}, {"poll_ms", 500}, {"timeout_ms", 300000}, {"workers", 2}}},
        {"pipeline", {{"mode", "evo"}, {"limit", 0}}},
        {"bench",
         {{"llm", backend("mock")},
          {"judge", backend("none")},
          {"roles", ""},
          {"temperature", 0.9},
          {"dedup_threshold", 0.8},
          {"test_fraction", 0.2},
          {"fewshot_k", 5},
          {"max_chars", 600},
          {"max_turns", 6},
          {"multimodal_share", 0.2},
          {"history_share", 0.2},
          {"llm_filter", false},
          {"max_in_flight", 4},
          {"examples", 3}}},
        {"eval",
         {{"scorers", "mock"},
          {"features_url", ""},
          {"clip_url", ""},
          {"hps_url", ""},
          {"reward_url", ""},
          {"embedder_dim", 64},
          {"embedder_seed", 7},
          {"threads", 1}}},
        {"server", {{"host", "127.0.0.1"}, {"port", 8080}, {"max_in_flight", 16}, {"page_size", 50}}},
        {"http", {{"timeout_ms", 30000}, {"max_attempts", 3}, {"max_in_flight", 4}, {"api_key_env", ""}}},
    };
}

AppConfig AppConfig::from_json(const json& user) {
    if (!user.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"<root>", "configuration must be a JSON object"}});
    std::vector<ConfigIssue> issues;
    check_types(defaults(), user, "", issues);
    if (!issues.empty()) throw ConfigError(std::move(issues));
    AppConfig c;
    c.raw_ = defaults();
    c.raw_.merge_patch(user);
    // merge_patch deletes keys patched with null; restore the optional slots.
    for (const auto& k : {"optimizer", "learning_rate", "weight_decay", "epochs", "batch_size"})
        if (!c.raw_["selector"].contains(k)) c.raw_["selector"][k] = nullptr;
    if (!c.raw_["baseline"].contains("args")) c.raw_["baseline"]["args"] = nullptr;
    return c;
}

AppConfig AppConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::vector<ConfigIssue>{{"config", "cannot open " + path.string()}});
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::vector<ConfigIssue>{{"config", std::string("invalid JSON: ") + e.what()}});
    }
    return from_json(j);
}

void AppConfig::set_json(std::string_view dotted, json value) {
    const auto ptr = pointer(dotted);
    const auto def = defaults();
    if (!def.contains(ptr)) throw ConfigError(std::vector<ConfigIssue>{{std::string(dotted), "unknown key"}});
    json patch = json::object();
    patch[ptr] = value;
    std::vector<ConfigIssue> issues;
    check_types(def, patch, "", issues);
    if (!issues.empty()) throw ConfigError(std::move(issues));
    raw_[ptr] = std::move(value);
}

void AppConfig::set(std::string_view dotted, std::string_view raw) {
    const auto def = defaults();
    const auto ptr = pointer(dotted);
    if (!def.contains(ptr)) throw ConfigError(std::vector<ConfigIssue>{{std::string(dotted), "unknown key"}});
    if (def[ptr].is_string()) {
        set_json(dotted, std::string(raw));
        return;
    }
    json v;
    try {
        v = json::parse(raw);
    } catch (const json::parse_error&) {
        v = std::string(raw);
    }
    set_json(dotted, std::move(v));
}

const json& AppConfig::at(std::string_view dotted) const { return raw_.at(pointer(dotted)); }
bool AppConfig::has(std::string_view dotted) const {
    const auto p = pointer(dotted);
    return raw_.contains(p) && !raw_[p].is_null();
}
std::string AppConfig::str(std::string_view dotted) const { return at(dotted).get<std::string>(); }
fs::path AppConfig::path(std::string_view dotted) const { return fs::path(str(dotted)); }

HttpOptions AppConfig::http_options() const {
    HttpOptions o;
    o.timeout = std::chrono::milliseconds(at("http.timeout_ms").get<std::int64_t>());
    o.retry.max_attempts = at("http.max_attempts").get<int>();
    o.max_in_flight = at("http.max_in_flight").get<std::size_t>();
    o.api_key_env = str("http.api_key_env");
    return o;
}

std::vector<ConfigIssue> AppConfig::check(std::string_view command) const {
    std::vector<ConfigIssue> issues;
    auto need_file = [&](const char* key) {
        const auto p = str(key);
        if (p.empty())
            issues.push_back({key, "path is required"});
        else if (!fs::exists(p))
            issues.push_back({key, "file not found: " + p});
    };
    auto one_of = [&](const char* key, std::initializer_list<const char*> allowed) {
        const auto v = str(key);
        for (const auto* a : allowed)
            if (v == a) return;
        std::string msg = "must be one of";
        for (const auto* a : allowed) msg += std::string(" ") + a;
        issues.push_back({key, msg + ", got '" + v + "'"});
    };
    auto positive = [&](const char* key) {
        if (at(key).get<double>() <= 0) issues.push_back({key, "must be positive"});
    };
    auto remote_needs_url = [&](const std::string& prefix, const char* remote_kind) {
        if (str(prefix + ".kind") == remote_kind && str(prefix + ".url").empty())
            issues.push_back({prefix + ".url", "required for kind '" + std::string(remote_kind) + "'"});
    };

    one_of("encoder.kind", {"toy", "remote"});
    remote_needs_url("encoder", "remote");
    positive("encoder.dim");
    one_of("selector.preset", {"toy", "paper"});
    one_of("selector.select_mode", {"constrained", "unconstrained"});
    one_of("selector.denominator", {"full", "model_only"});
    positive("selector.vocab");
    positive("selector.threads");
    if (has("selector.optimizer") && (!at("selector.optimizer").is_string() ||
                                      (str("selector.optimizer") != "adamw" && str("selector.optimizer") != "sgd")))
        issues.push_back({"selector.optimizer", "must be adamw or sgd"});
    one_of("rewriter.kind", {"mock", "llm"});
    remote_needs_url("rewriter", "llm");
    one_of("argconf.kind", {"echo", "llm"});
    remote_needs_url("argconf", "llm");
    one_of("direct.kind", {"none", "llm"});
    remote_needs_url("direct", "llm");
    one_of("baseline.rewriter.kind", {"mock", "llm"});
    remote_needs_url("baseline.rewriter", "llm");
    one_of("renderer.kind", {"mock", "remote"});
    remote_needs_url("renderer", "remote");
    positive("renderer.workers");
    one_of("pipeline.mode", {"evo", "direct", "fixed_baseline"});
    one_of("bench.llm.kind", {"mock", "llm"});
    remote_needs_url("bench.llm", "llm");
    one_of("bench.judge.kind", {"none", "llm"});
    remote_needs_url("bench.judge", "llm");
    one_of("eval.scorers", {"mock", "remote", "none"});
    if (str("eval.scorers") == "remote")
        for (const auto* k : {"eval.features_url", "eval.clip_url", "eval.hps_url", "eval.reward_url"})
            if (str(k).empty()) issues.push_back({k, "required when eval.scorers is remote"});
    const auto t = at("bench.temperature").get<double>();
    if (!(t > 0 && t <= 2)) issues.push_back({"bench.temperature", "must be in (0, 2]"});
    const auto f = at("bench.test_fraction").get<double>();
    if (!(f > 0 && f < 1)) issues.push_back({"bench.test_fraction", "must be in (0, 1)"});
    const auto th = at("bench.dedup_threshold").get<double>();
    if (!(th >= 0 && th <= 1)) issues.push_back({"bench.dedup_threshold", "must be in [0, 1]"});
    if (at("bench.llm_filter").get<bool>() && str("bench.judge.kind") == "none")
        issues.push_back({"bench.judge.kind", "an LLM judge is required when bench.llm_filter is on"});
    const auto port = at("server.port").get<std::int64_t>();
    if (port < 0 || port > 65535) issues.push_back({"server.port", "must be in [0, 65535]"});
    positive("server.max_in_flight");
    positive("server.page_size");
    positive("http.timeout_ms");
    positive("http.max_attempts");
    positive("http.max_in_flight");

    const bool pipeline_cmd = command == "run-pipeline" || command == "serve";
    if (command == "build-bench" || command == "train-selector" || pipeline_cmd) {
        need_file("registry");
        need_file("demos");
    }
    if (command == "run-pipeline") need_file("benchmark");
    if (command == "evaluate") need_file("benchmark");
    if (command == "train-selector" && str("selector.checkpoint").empty())
        issues.push_back({"selector.checkpoint", "output path is required"});
    if (pipeline_cmd) {
        const auto mode = str("pipeline.mode");
        if (mode == "evo") need_file("selector.checkpoint");
        if (mode == "direct" && str("direct.kind") == "none")
            issues.push_back({"direct.kind", "direct mode needs an LLM backend"});
        if (mode == "fixed_baseline" && str("baseline.model_id").empty())
            issues.push_back({"baseline.model_id", "fixed_baseline mode needs a model id"});
    }
    return issues;
}

void AppConfig::validate(std::string_view command) const {
    auto issues = check(command);
    if (!issues.empty()) throw ConfigError(std::move(issues));
}

}  // namespace autot2i
