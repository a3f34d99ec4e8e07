// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(PipelineMode m) {
    switch (m) {
        case PipelineMode::evo: return "evo";
        case PipelineMode::direct: return "direct";
        case PipelineMode::fixed_baseline: return "fixed_baseline";
    }
    return "evo";
}

PipelineMode pipeline_mode_from_string(std::string_view s) {
    if (s == "evo") return PipelineMode::evo;
    if (s == "direct") return PipelineMode::direct;
    if (s == "fixed_baseline") return PipelineMode::fixed_baseline;
    throw ValidationError("mode", "unknown pipeline mode '" + std::string(s) + "'");
}

std::string_view to_string(JobStatus s) {
    switch (s) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "queued";
}

JobStatus job_status_from_string(std::string_view s) {
    if (s == "queued") return JobStatus::queued;
    if (s == "running") return JobStatus::running;
    if (s == "done") return JobStatus::done;
    if (s == "failed") return JobStatus::failed;
    throw ValidationError("status", "unknown job status '" + std::string(s) + "'");
}

json to_json(const JobRef& j) {
    json out = {{"job_id", j.job_id}, {"status", to_string(j.status)}};
    if (j.digest) out["digest"] = *j.digest;
    if (j.reason) out["reason"] = *j.reason;
    return out;
}

JobRef job_ref_from_json(const json& j) {
    JobRef r;
    r.job_id = j.at("job_id").get<std::string>();
    r.status = job_status_from_string(j.at("status").get<std::string>());
    if (j.contains("digest")) r.digest = j["digest"].get<std::string>();
    if (j.contains("reason")) r.reason = j["reason"].get<std::string>();
    if (r.status == JobStatus::done && !r.digest) throw ValidationError("digest", "done job without digest");
    return r;
}

namespace {

json selection_json(const Selection& s) {
    json out = {{"mode", to_string(s.mode)},
                {"model_id", s.model_id},
                {"no_model", s.no_model},
                {"block_prob", s.block_prob()},
                {"model_block_probs", s.model_block_probs},
                {"full_probs", s.full_probs}};
    out["token_index"] = s.token_index ? json(*s.token_index) : json(nullptr);
    return out;
}

Selection selection_from_json(const json& j) {
    Selection s;
    s.mode = select_mode_from_string(j.at("mode").get<std::string>());
    s.model_id = j.at("model_id").get<std::string>();
    s.no_model = j.at("no_model").get<bool>();
    s.model_block_probs = j.at("model_block_probs").get<std::vector<double>>();
    s.full_probs = j.at("full_probs").get<std::vector<double>>();
    if (!j.at("token_index").is_null()) s.token_index = j["token_index"].get<std::size_t>();
    return s;
}

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::string utc_now() {
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

json to_json(const StepwiseTrace& t) {
    const auto& schema = ArgumentSchema::canonical();
    json durations = json::object();
    for (const auto& [stage, ms] : t.durations_ms) durations[stage] = ms;
    return {{"trace_id", t.trace_id},
            {"sample_id", opt(t.sample_id)},
            {"mode", to_string(t.mode)},
            {"created_at", t.created_at},
            {"input", to_json(t.input)},
            {"rewritten_prompt", opt(t.rewritten_prompt)},
            {"model_id", opt(t.model_id)},
            {"selection", t.selection ? selection_json(*t.selection) : json(nullptr)},
            {"args", t.args ? schema.to_json(*t.args) : json(nullptr)},
            {"args_meta",
             {{"fallback", t.args_fallback},
              {"retry_count", t.args_retry_count},
              {"errors", t.args_errors},
              {"demo_ids", t.demo_ids}}},
            {"image_job", t.image_job ? to_json(*t.image_job) : json(nullptr)},
            {"durations_ms", durations},
            {"failing_stage", opt(t.failing_stage)},
            {"failure_reason", opt(t.failure_reason)},
            {"backend_failure", t.backend_failure}};
}

StepwiseTrace trace_from_json(const json& j) {
    const auto& schema = ArgumentSchema::canonical();
    StepwiseTrace t;
    auto str = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<std::string>();
    };
    t.trace_id = j.at("trace_id").get<std::string>();
    t.sample_id = str("sample_id");
    t.mode = pipeline_mode_from_string(j.at("mode").get<std::string>());
    t.created_at = j.value("created_at", "");
    t.input = chat_input_from_json(j.at("input"));
    t.rewritten_prompt = str("rewritten_prompt");
    t.model_id = str("model_id");
    if (j.contains("selection") && !j["selection"].is_null()) t.selection = selection_from_json(j["selection"]);
    if (j.contains("args") && !j["args"].is_null()) t.args = schema.args_from_json(j["args"]);
    if (j.contains("args_meta")) {
        const auto& m = j["args_meta"];
        t.args_fallback = m.value("fallback", false);
        t.args_retry_count = m.value("retry_count", std::size_t{0});
        t.args_errors = m.value("errors", std::vector<std::string>{});
        t.demo_ids = m.value("demo_ids", std::vector<std::string>{});
    }
    if (j.contains("image_job") && !j["image_job"].is_null()) t.image_job = job_ref_from_json(j["image_job"]);
    if (j.contains("durations_ms"))
        for (const auto& [k, v] : j["durations_ms"].items()) {
            if (v.get<double>() < 0) throw ValidationError("durations_ms", "negative duration for " + k);
            t.durations_ms.emplace_back(k, v.get<double>());
        }
    t.failing_stage = str("failing_stage");
    t.failure_reason = str("failure_reason");
    t.backend_failure = j.value("backend_failure", false);
    if (t.mode == PipelineMode::fixed_baseline && t.selection)
        throw ValidationError("selection", "fixed_baseline traces carry no selection");
    return t;
}

json trace_content(const StepwiseTrace& t) {
    auto j = to_json(t);
    j.erase("trace_id");
    j.erase("created_at");
    j.erase("durations_ms");
    if (j["image_job"].is_object()) j["image_job"].erase("job_id");
    return j;
}

// ---------------------------------------------------------------------------
// Images and jobs

bool is_digest(std::string_view s) {
    if (s.size() != 64) return false;
    for (char c : s)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    return true;
}

ImageStore::ImageStore(fs::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) fs::create_directories(dir_);
}

std::string ImageStore::put(const std::string& bytes) {
    auto digest = sha256_hex(bytes);
    std::lock_guard lock(mu_);
    if (dir_.empty()) {
        memory_.emplace(digest, bytes);
        return digest;
    }
    auto path = dir_ / (digest + ".png");
    if (fs::exists(path)) return digest;
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
    return digest;
}

std::optional<std::string> ImageStore::get(std::string_view digest) const {
    if (!is_digest(digest)) return std::nullopt;
    std::lock_guard lock(mu_);
    if (dir_.empty()) {
        auto it = memory_.find(digest);
        if (it == memory_.end()) return std::nullopt;
        return it->second;
    }
    std::ifstream in(dir_ / (std::string(digest) + ".png"), std::ios::binary);
    if (!in) return std::nullopt;
    return std::string(std::istreambuf_iterator<char>(in), {});
}

JobManager::JobManager(std::shared_ptr<Renderer> renderer, std::shared_ptr<ImageStore> images, std::size_t workers)
    : renderer_(std::move(renderer)), images_(std::move(images)) {
    if (!renderer_) throw ValidationError("renderer", "renderer is required");
    if (!images_) images_ = std::make_shared<ImageStore>();
    if (workers == 0) throw ValidationError("workers", "at least one job worker is required");
    for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

JobManager::~JobManager() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
}

JobRef JobManager::submit(const std::string& job_id, RenderRequest request) {
    ArgumentSchema::canonical().validate(request.args);
    std::lock_guard lock(mu_);
    if (jobs_.count(job_id)) throw ValidationError("job_id", "duplicate job id '" + job_id + "'");
    JobRef ref{job_id, JobStatus::queued, std::nullopt, std::nullopt};
    jobs_.emplace(job_id, ref);
    order_.push_back(job_id);
    queue_.emplace_back(job_id, std::move(request));
    cv_.notify_all();
    return ref;
}

std::optional<JobRef> JobManager::status(std::string_view job_id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

JobRef JobManager::wait(std::string_view job_id) const {
    std::unique_lock lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw ValidationError("job_id", "unknown job '" + std::string(job_id) + "'");
    cv_.wait(lock, [&] { return it->second.status == JobStatus::done || it->second.status == JobStatus::failed; });
    return it->second;
}

void JobManager::wait_all() const {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] {
        if (!queue_.empty()) return false;
        for (const auto& [id, j] : jobs_)
            if (j.status == JobStatus::queued || j.status == JobStatus::running) return false;
        return true;
    });
}

std::vector<JobRef> JobManager::jobs() const {
    std::lock_guard lock(mu_);
    std::vector<JobRef> out;
    for (const auto& id : order_) out.push_back(jobs_.find(id)->second);
    return out;
}

void JobManager::worker_loop() {
    for (;;) {
        std::pair<std::string, RenderRequest> item;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
            if (queue_.empty()) return;
            item = std::move(queue_.front());
            queue_.pop_front();
            jobs_.find(item.first)->second.status = JobStatus::running;
        }
        JobRef result{item.first, JobStatus::done, std::nullopt, std::nullopt};
        try {
            result.digest = images_->put(renderer_->render(item.second));
        } catch (const std::exception& e) {
            result.status = JobStatus::failed;
            result.reason = e.what();
        }
        {
            std::lock_guard lock(mu_);
            jobs_.find(item.first)->second = result;
        }
        cv_.notify_all();
    }
}

// ---------------------------------------------------------------------------
// Traces

TraceStore::TraceStore(fs::path path) : path_(std::move(path)) {
    if (path_.empty()) return;
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    if (fs::exists(path_) && fs::file_size(path_) > 0) {
        for (auto& j : jsonl::read(path_)) {
            auto id = j.at("trace_id").get<std::string>();
            by_id_[id] = lines_.size();
            lines_.push_back(j.dump());
        }
    } else {
        std::ofstream out(path_, std::ios::binary | std::ios::trunc);
        out << jsonl::kVersionTag << " traces\n";
        if (!out) throw Error("cannot create " + path_.string());
    }
}

std::string TraceStore::append(const StepwiseTrace& trace) {
    auto line = to_json(trace).dump();
    std::lock_guard lock(mu_);
    if (by_id_.count(trace.trace_id)) throw ValidationError("trace_id", "duplicate trace id '" + trace.trace_id + "'");
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        out << line << '\n';
        out.flush();
        if (!out) throw Error("cannot append to " + path_.string());
    }
    by_id_[trace.trace_id] = lines_.size();
    lines_.push_back(line);
    return line;
}

std::optional<std::string> TraceStore::find(std::string_view trace_id) const {
    std::lock_guard lock(mu_);
    auto it = by_id_.find(std::string(trace_id));
    if (it == by_id_.end()) return std::nullopt;
    return lines_[it->second];
}

std::vector<StepwiseTrace> TraceStore::all() const {
    std::lock_guard lock(mu_);
    std::vector<StepwiseTrace> out;
    for (const auto& l : lines_) out.push_back(trace_from_json(json::parse(l)));
    return out;
}

std::size_t TraceStore::size() const {
    std::lock_guard lock(mu_);
    return lines_.size();
}

// ---------------------------------------------------------------------------
// Direct mode

std::string_view direct_system_prompt() {
    return "You turn casual image requests into a complete text-to-image generation plan. Reply with one fenced "
           "plan block (three backticks followed by the word plan) holding a \"prompt:\" line with a professional "
           "prompt, a \"model:\" line naming exactly one of the available models, and one \"key: value\" line per "
           "generation argument.";
}

std::string render_direct_request(const ChatInput& input, const ModelRegistry& registry) {
    std::string out = "Available models:\n";
    for (const auto& m : registry.models()) out += "- " + m.model_id + ": " + m.display_name + "\n";
    out += "Arguments:";
    for (const auto& spec : ArgumentSchema::canonical().specs()) out += " " + spec.name;
    out += "\n\nRequest\nUser input:\n" + serialize_input(input) + "\n";
    return out;
}

DirectPlan parse_direct_plan(std::string_view raw) {
    auto block = first_fenced_block(raw);
    if (!block) throw ParseError("no fenced block found");
    DirectPlan plan;
    for (const auto& line : text::split_lines(*block)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        auto key = text::to_lower(text::trim(std::string_view(line).substr(0, colon)));
        auto value = text::trim(std::string_view(line).substr(colon + 1));
        if (key == "prompt" && plan.prompt.empty()) plan.prompt = value;
        if ((key == "model" || key == "model_id") && plan.model_name.empty()) plan.model_name = value;
    }
    if (plan.prompt.empty()) throw ParseError("plan has no prompt line");
    if (plan.model_name.empty()) throw ParseError("plan has no model line");
    return plan;
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineComponents components, PipelineConfig config)
    : c_(std::move(components)), config_(std::move(config)) {
    if (!c_.registry) throw ValidationError("registry", "pipeline requires a registry");
    if (!c_.jobs) throw ValidationError("jobs", "pipeline requires a job manager");
    if (!c_.traces) throw ValidationError("traces", "pipeline requires a trace store");
    if (c_.head && c_.head->num_models() != c_.registry->size())
        throw ValidationError("head", "selector head has " + std::to_string(c_.head->num_models()) +
                                          " model rows but the registry has " + std::to_string(c_.registry->size()) +
                                          " models");
    if (c_.head && c_.encoder && c_.head->dim() != c_.encoder->dimension())
        throw ValidationError("encoder", "encoder dimension does not match the selector head");
    if (config_.fixed_args) ArgumentSchema::canonical().validate(*config_.fixed_args);
    if (!config_.baseline_model_id.empty() && !c_.registry->find(config_.baseline_model_id))
        throw ValidationError("baseline_model_id", "unknown model '" + config_.baseline_model_id + "'");
}

bool Pipeline::supports(PipelineMode mode) const {
    switch (mode) {
        case PipelineMode::evo: return c_.rewriter && c_.encoder && c_.head && c_.configurator;
        case PipelineMode::direct: return static_cast<bool>(c_.direct_llm);
        case PipelineMode::fixed_baseline: return c_.baseline_rewriter && !config_.baseline_model_id.empty();
    }
    return false;
}

StepwiseTrace Pipeline::begin(const ChatInput& input, PipelineMode mode, std::optional<std::string> sample_id) const {
    if (!supports(mode))
        throw ValidationError("mode", "pipeline is not configured for mode '" + std::string(to_string(mode)) + "'");
    StepwiseTrace t;
    t.trace_id = random_id();
    t.sample_id = std::move(sample_id);
    t.mode = mode;
    t.input = input;
    t.created_at = utc_now();
    return t;
}

namespace {

template <typename F>
bool stage(StepwiseTrace& t, const char* name, F&& body) {
    Stopwatch sw;
    try {
        body();
        t.durations_ms.emplace_back(name, sw.ms());
        return true;
    } catch (const BackendError& e) {
        t.backend_failure = true;
        t.failure_reason = e.what();
    } catch (const std::exception& e) {
        t.failure_reason = e.what();
    }
    t.durations_ms.emplace_back(name, sw.ms());
    t.failing_stage = name;
    return false;
}

}  // namespace

StepwiseTrace Pipeline::finish(StepwiseTrace t) {
    if (t.failed()) {
        c_.traces->append(t);
        return t;
    }
    RenderRequest req{*t.model_id, *t.rewritten_prompt, *t.args};
    const bool ok = stage(t, "dispatch", [&] {
        ArgumentSchema::canonical().validate(req.args);
        t.image_job = JobRef{random_id(), JobStatus::queued, std::nullopt, std::nullopt};
    });
    c_.traces->append(t);
    if (ok) c_.jobs->submit(t.image_job->job_id, std::move(req));
    return t;
}

StepwiseTrace Pipeline::run(const ChatInput& input, PipelineMode mode, std::optional<std::string> sample_id) {
    switch (mode) {
        case PipelineMode::evo: return run_evo(input, std::move(sample_id));
        case PipelineMode::direct: return run_direct(input, std::move(sample_id));
        case PipelineMode::fixed_baseline: return run_fixed_baseline(input, std::move(sample_id));
    }
    return run_evo(input, std::move(sample_id));
}

StepwiseTrace Pipeline::run_evo(const ChatInput& input, std::optional<std::string> sample_id) {
    auto t = begin(input, PipelineMode::evo, std::move(sample_id));
    const auto& registry = *c_.registry;
    bool ok = stage(t, "rewrite", [&] { t.rewritten_prompt = c_.rewriter->rewrite(input); });
    ok = ok && stage(t, "select", [&] {
        auto h = c_.encoder->encode(input, *t.rewritten_prompt);
        auto sel = select(*c_.head, h, config_.select_mode);
        if (sel.token_index) sel.model_id = registry.at_token(*sel.token_index).model_id;
        t.selection = sel;
        if (sel.no_model) throw Error("no model token predicted");
        t.model_id = sel.model_id;
    });
    ok = ok && stage(t, "configure", [&] {
        auto r = c_.configurator->configure(input, *t.rewritten_prompt, registry.at(*t.model_id));
        t.args = r.args;
        t.args_fallback = r.fallback;
        t.args_retry_count = r.retry_count;
        t.args_errors = r.errors;
        t.demo_ids = r.demo_ids;
    });
    return finish(std::move(t));
}

StepwiseTrace Pipeline::run_direct(const ChatInput& input, std::optional<std::string> sample_id) {
    auto t = begin(input, PipelineMode::direct, std::move(sample_id));
    const auto& registry = *c_.registry;
    stage(t, "direct", [&] {
        input.validate();
        std::vector<ChatMessage> messages = {{"system", std::string(direct_system_prompt())},
                                             {"user", render_direct_request(input, registry)}};
        for (std::size_t attempt = 0;; ++attempt) {
            auto raw = c_.direct_llm->complete(messages, config_.direct_params);
            try {
                auto plan = parse_direct_plan(raw);
                const auto* model = registry.resolve_name(plan.model_name);
                if (!model) throw ValidationError("model", "unknown model '" + plan.model_name + "'");
                t.rewritten_prompt = plan.prompt;
                t.model_id = model->model_id;
                t.args = parse_args(raw, ArgumentSchema::canonical(), model->default_args);
                t.args_retry_count = attempt;
                return;
            } catch (const ValidationError& e) {
                if (e.field() == "model") throw;
                t.args_errors.emplace_back(e.what());
                if (attempt >= config_.direct_max_retries) throw;
            } catch (const ParseError& e) {
                t.args_errors.emplace_back(e.what());
                if (attempt >= config_.direct_max_retries) throw;
            }
            t.rewritten_prompt.reset();
            t.model_id.reset();
            messages.push_back({"assistant", raw});
            messages.push_back({"user", "Your previous answer was rejected (" + t.args_errors.back() +
                                            "). Reply again with a corrected plan block."});
        }
    });
    if (t.failed()) {
        t.args.reset();
        t.args_retry_count = t.args_errors.size();
    }
    return finish(std::move(t));
}

StepwiseTrace Pipeline::run_fixed_baseline(const ChatInput& input, std::optional<std::string> sample_id) {
    auto t = begin(input, PipelineMode::fixed_baseline, std::move(sample_id));
    if (stage(t, "rewrite", [&] { t.rewritten_prompt = c_.baseline_rewriter->rewrite(input); })) {
        t.model_id = config_.baseline_model_id;
        t.args = config_.fixed_args ? *config_.fixed_args : ArgumentSchema::canonical().defaults();
    }
    return finish(std::move(t));
}

JobRef Pipeline::dispatch(const std::string& model_id, const std::string& prompt, const ArgumentSet& args,
                          const std::string& job_id) {
    if (!c_.registry->find(model_id)) throw ValidationError("model_id", "unknown model '" + model_id + "'");
    return c_.jobs->submit(job_id, RenderRequest{model_id, prompt, args});
}

}  // namespace autot2i
