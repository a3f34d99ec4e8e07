// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autot2i/argconf.hpp"
#include "autot2i/datastore.hpp"
#include "autot2i/encoders.hpp"
#include "autot2i/llm.hpp"
#include "autot2i/render.hpp"
#include "autot2i/rewriter.hpp"
#include "autot2i/selector.hpp"

namespace autot2i {

enum class PipelineMode { evo, direct, fixed_baseline };
std::string_view to_string(PipelineMode m);
PipelineMode pipeline_mode_from_string(std::string_view s);

enum class JobStatus { queued, running, done, failed };
std::string_view to_string(JobStatus s);
JobStatus job_status_from_string(std::string_view s);

struct JobRef {
    std::string job_id;
    JobStatus status = JobStatus::queued;
    std::optional<std::string> digest;  // set iff done
    std::optional<std::string> reason;  // set iff failed
};

nlohmann::json to_json(const JobRef& j);
JobRef job_ref_from_json(const nlohmann::json& j);

struct StepwiseTrace {
    std::string trace_id;
    std::optional<std::string> sample_id;
    PipelineMode mode = PipelineMode::evo;
    ChatInput input;
    std::optional<std::string> rewritten_prompt;
    std::optional<std::string> model_id;  // model the image was dispatched to
    std::optional<Selection> selection;   // evo only
    std::optional<ArgumentSet> args;
    bool args_fallback = false;
    std::size_t args_retry_count = 0;
    std::vector<std::string> args_errors;
    std::vector<std::string> demo_ids;
    std::optional<JobRef> image_job;
    std::vector<std::pair<std::string, double>> durations_ms;  // stage name, wall-clock
    std::optional<std::string> failing_stage;
    std::optional<std::string> failure_reason;
    bool backend_failure = false;
    std::string created_at;

    bool failed() const { return failing_stage.has_value(); }
};

nlohmann::json to_json(const StepwiseTrace& t);
StepwiseTrace trace_from_json(const nlohmann::json& j);

/// Trace JSON without trace_id, created_at, durations and job id.
nlohmann::json trace_content(const StepwiseTrace& t);

/// Content-addressed PNG store: <dir>/<sha256>.png. An empty directory keeps images in memory.
class ImageStore {
public:
    explicit ImageStore(std::filesystem::path dir = {});

    std::string put(const std::string& bytes);
    std::optional<std::string> get(std::string_view digest) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    std::map<std::string, std::string, std::less<>> memory_;
};

bool is_digest(std::string_view s);

class JobManager {
public:
    JobManager(std::shared_ptr<Renderer> renderer, std::shared_ptr<ImageStore> images, std::size_t workers = 2);
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    /// Enqueues a render under `job_id`. Throws ValidationError on schema-invalid args or a reused id.
    JobRef submit(const std::string& job_id, RenderRequest request);
    std::optional<JobRef> status(std::string_view job_id) const;
    /// Blocks until the job is done or failed.
    JobRef wait(std::string_view job_id) const;
    void wait_all() const;
    std::vector<JobRef> jobs() const;

    ImageStore& images() { return *images_; }

private:
    void worker_loop();

    std::shared_ptr<Renderer> renderer_;
    std::shared_ptr<ImageStore> images_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::deque<std::pair<std::string, RenderRequest>> queue_;
    std::map<std::string, JobRef, std::less<>> jobs_;
    std::vector<std::string> order_;
    bool stop_ = false;
    std::vector<std::thread> workers_;
};

/// Append-only traces.jsonl. An empty path keeps traces in memory only.
class TraceStore {
public:
    explicit TraceStore(std::filesystem::path path = {});

    /// Serializes, persists and returns the stored line.
    std::string append(const StepwiseTrace& trace);
    std::optional<std::string> find(std::string_view trace_id) const;
    std::vector<StepwiseTrace> all() const;
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::vector<std::string> lines_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

inline constexpr std::string_view kPlanFenceOpen = "```plan";

struct DirectPlan {
    std::string prompt;
    std::string model_name;
};

/// Prompt and model lines of the first fenced block; arguments are read separately by parse_args.
DirectPlan parse_direct_plan(std::string_view raw);

/// Full user message for the single-call direct mode.
std::string render_direct_request(const ChatInput& input, const ModelRegistry& registry);
std::string_view direct_system_prompt();

struct PipelineConfig {
    SelectMode select_mode = SelectMode::constrained;
    std::string baseline_model_id;
    std::optional<ArgumentSet> fixed_args;  // default: schema defaults
    std::size_t direct_max_retries = 2;
    GenerationParams direct_params{0.2, 1024};
};

struct PipelineComponents {
    std::shared_ptr<const ModelRegistry> registry;
    std::shared_ptr<const Encoder> encoder;
    std::shared_ptr<const TokenHead> head;
    std::shared_ptr<const Rewriter> rewriter;           // evo, stage 1
    std::shared_ptr<const Rewriter> baseline_rewriter;  // fixed_baseline
    std::shared_ptr<const ArgConfigurator> configurator;
    std::shared_ptr<LlmBackend> direct_llm;
    std::shared_ptr<JobManager> jobs;
    std::shared_ptr<TraceStore> traces;
};

class Pipeline {
public:
    Pipeline(PipelineComponents components, PipelineConfig config = {});

    StepwiseTrace run(const ChatInput& input, PipelineMode mode, std::optional<std::string> sample_id = {});
    StepwiseTrace run_evo(const ChatInput& input, std::optional<std::string> sample_id = {});
    StepwiseTrace run_direct(const ChatInput& input, std::optional<std::string> sample_id = {});
    StepwiseTrace run_fixed_baseline(const ChatInput& input, std::optional<std::string> sample_id = {});

    JobRef dispatch(const std::string& model_id, const std::string& prompt, const ArgumentSet& args,
                    const std::string& job_id);

    const PipelineComponents& components() const { return c_; }
    const PipelineConfig& config() const { return config_; }
    bool supports(PipelineMode mode) const;

private:
    StepwiseTrace begin(const ChatInput& input, PipelineMode mode, std::optional<std::string> sample_id) const;
    StepwiseTrace finish(StepwiseTrace trace);

    PipelineComponents c_;
    PipelineConfig config_;
};

}  // namespace autot2i
