// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autot2i/datastore.hpp"
#include "autot2i/evalkit.hpp"
#include "autot2i/llm.hpp"

namespace autot2i {

struct RoleCard {
    std::string role_id;
    std::string persona;
    std::string tone;
};

std::vector<RoleCard> load_roles(const std::filesystem::path& path);
std::filesystem::path default_roles_path();

struct GenerationJob {
    std::string demo_id;
    std::string role_id;
    InputKind kind = InputKind::single;
    std::string backend_id;
    double temperature = 0.9;

    void validate() const;
};

struct RoleplayPrompt {
    std::string system;
    std::string user;
};

RoleplayPrompt render_roleplay_prompt(const RoleCard& role, const Demonstration& demo, const ModelRecord& model,
                                      InputKind kind, const std::vector<std::string>& examples);

/// Colloquial queries shown as role-play examples.
const std::vector<std::string>& default_roleplay_examples();

/// Deterministic stand-in for the generation LLM: reads the quoted prompt from the role-play request
/// and answers with a casual first-person query (or a USER/ASSISTANT transcript for history jobs).
std::shared_ptr<LlmBackend> make_mock_roleplay_llm();

struct Candidate {
    std::string candidate_id;
    std::string demo_id;
    std::string model_id;
    std::string role_id;
    std::string backend_id;
    ChatInput input;
};

/// User-side text of a chat input, turns joined by newlines.
std::string user_text(const ChatInput& input);

struct GenerationFailure {
    GenerationJob job;
    std::string reason;
};

struct GenerationResult {
    std::vector<Candidate> candidates;  // job order
    std::vector<GenerationFailure> failures;
    std::vector<nlohmann::json> raw_outputs;  // {demo_id, role_id, kind, backend, raw}
};

struct GenerateOptions {
    std::size_t max_in_flight = 4;
    std::size_t examples = 3;
    std::size_t max_tokens = 256;
};

/// Parses a role-play reply into a chat input of the requested kind.
ChatInput parse_generated(std::string_view raw, InputKind kind, const std::optional<std::string>& image_ref);

GenerationResult generate_inputs(const std::vector<GenerationJob>& jobs, const ModelRegistry& registry,
                                 const std::vector<RoleCard>& roles, LlmBackend& backend,
                                 const GenerateOptions& options = {});

/// Pairwise similarity over texts (prompt-score F1 with cached token embeddings).
class SimilarityIndex {
public:
    SimilarityIndex(const std::vector<std::string>& texts, const TokenEmbedder& embedder);
    double operator()(std::size_t a, std::size_t b) const;
    std::size_t size() const { return rows_.size(); }

private:
    std::vector<Eigen::MatrixXd> rows_;
};

/// Keeps candidates in input order, dropping any whose similarity to an already kept candidate of
/// the same model exceeds `threshold`.
std::vector<Candidate> dedup(const std::vector<Candidate>& candidates, const TokenEmbedder& embedder,
                             double threshold = 0.8);

/// Index form of the greedy rule over precomputed similarities, grouped by `groups`.
std::vector<std::size_t> dedup_indices(const std::vector<std::string>& groups,
                                       const std::function<double(std::size_t, std::size_t)>& sim,
                                       double threshold);

struct SplitResult {
    std::vector<BenchmarkSample> train;
    std::vector<BenchmarkSample> test;
};

/// Per model, the ceil(frac * n) samples with the lowest mean similarity to the rest of the group
/// go to test; singleton groups stay in train.
SplitResult split_test(const std::vector<BenchmarkSample>& samples, const TokenEmbedder& embedder, double frac = 0.2);

std::size_t test_count(std::size_t n, double frac);

class SampleFilter {
public:
    virtual ~SampleFilter() = default;
    virtual std::string name() const = 0;
    /// Returns true to keep. BackendError means the filter could not decide.
    virtual bool keep(const BenchmarkSample& sample) = 0;
};

class LengthFilter final : public SampleFilter {
public:
    LengthFilter(std::size_t max_chars = 600, std::size_t max_turns = 6) : max_chars_(max_chars), max_turns_(max_turns) {}
    std::string name() const override { return "length"; }
    bool keep(const BenchmarkSample& sample) override;

private:
    std::size_t max_chars_, max_turns_;
};

/// Longest run of consecutive comma-separated tag segments (segments of one or two words).
std::size_t longest_tag_run(std::string_view text);
bool has_personal_pronoun(std::string_view text);

class ColloquialismFilter final : public SampleFilter {
public:
    explicit ColloquialismFilter(std::size_t max_tag_run = 2) : max_tag_run_(max_tag_run) {}
    std::string name() const override { return "colloquialism"; }
    bool keep(const BenchmarkSample& sample) override;

private:
    std::size_t max_tag_run_;
};

class LlmJudgeFilter final : public SampleFilter {
public:
    explicit LlmJudgeFilter(std::shared_ptr<LlmBackend> llm) : llm_(std::move(llm)) {}
    std::string name() const override { return "llm"; }
    bool keep(const BenchmarkSample& sample) override;

private:
    std::shared_ptr<LlmBackend> llm_;
};

struct FilterReport {
    std::vector<BenchmarkSample> kept;
    std::map<std::string, std::size_t> dropped;  // per filter name
    std::vector<std::string> warnings;
};

FilterReport apply_filters(const std::vector<BenchmarkSample>& samples,
                           const std::vector<std::shared_ptr<SampleFilter>>& filters);

void export_review(const std::filesystem::path& path, const std::vector<BenchmarkSample>& samples);
/// sample_id -> keep; "pending" entries are absent.
std::map<std::string, bool> import_review(const std::filesystem::path& path);
FilterReport apply_review(const std::vector<BenchmarkSample>& samples, const std::map<std::string, bool>& decisions);

/// Tags every test sample fewshot iff its model has at most k train samples.
void assign_setting(std::vector<BenchmarkSample>& test, const std::vector<BenchmarkSample>& train, std::size_t k = 5);

struct BenchBuildConfig {
    std::uint64_t seed = 0;
    double temperature = 0.9;
    double dedup_threshold = 0.8;
    double test_fraction = 0.2;
    std::size_t fewshot_k = 5;
    std::size_t max_chars = 600;
    std::size_t max_turns = 6;
    double multimodal_share = 0.2;  // of demos that carry an image
    double history_share = 0.2;
    bool llm_filter = false;
    GenerateOptions generate;

    void validate() const;
    nlohmann::json to_json() const;
};

std::vector<GenerationJob> plan_jobs(const ModelRegistry& registry, const std::vector<RoleCard>& roles,
                                     const std::string& backend_id, const BenchBuildConfig& config);

std::string sample_id_for(const Candidate& c);
BenchmarkSample to_sample(const Candidate& c, const ModelRegistry& registry);

struct BenchBuildResult {
    std::vector<BenchmarkSample> train;
    std::vector<BenchmarkSample> test;  // filtered, tagged with settings
    std::vector<BenchmarkSample> test_initial;
    GenerationResult generation;
    std::size_t deduped = 0;
    FilterReport filters;
    nlohmann::json manifest;
};

BenchBuildResult build_benchmark(const ModelRegistry& registry, const std::vector<RoleCard>& roles, LlmBackend& backend,
                                 const TokenEmbedder& embedder, const BenchBuildConfig& config,
                                 std::shared_ptr<LlmBackend> judge = nullptr);

/// Row per dataset stage with Total / Single / M-Modal / History counts.
nlohmann::json manifest_row(const std::vector<BenchmarkSample>& samples);

}  // namespace autot2i
