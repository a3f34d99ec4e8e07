// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autot2i/args.hpp"
#include "autot2i/datastore.hpp"
#include "autot2i/http.hpp"
#include "autot2i/pipeline.hpp"

namespace autot2i {

/// Contextless per-token embeddings for prompt similarity.
class TokenEmbedder {
public:
    virtual ~TokenEmbedder() = default;
    virtual std::string id() const = 0;
    /// One unit-norm row per token; zero rows when the text has no tokens.
    virtual Eigen::MatrixXd embed_tokens(std::string_view text) const = 0;
};

/// Each token is the normalized sum of seeded Gaussian vectors for the token itself and its
/// boundary-marked character trigrams (weight 0.5), so inflections land near each other.
class ToyTokenEmbedder final : public TokenEmbedder {
public:
    explicit ToyTokenEmbedder(std::size_t dim = 64, std::uint64_t seed = 7);
    std::string id() const override;
    Eigen::MatrixXd embed_tokens(std::string_view text) const override;

private:
    Eigen::VectorXd feature_vector(std::string_view feature) const;

    std::size_t dim_;
    std::uint64_t seed_;
};

struct PromptScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision = mean row max, recall = mean column max of a candidate x reference similarity
/// matrix. Maxima are clamped to [0, 1].
PromptScore greedy_match(const Eigen::MatrixXd& sim);

PromptScore prompt_score(std::string_view candidate, std::string_view reference, const TokenEmbedder& embedder);
/// Same score on pre-embedded token rows.
PromptScore prompt_score(const Eigen::MatrixXd& candidate, const Eigen::MatrixXd& reference);

double selection_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts);
double config_accuracy(const ArgumentSet& pred, const ArgumentSet& gt, const ArgumentSchema& schema);

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    GaussianStats() = default;
    GaussianStats(Eigen::VectorXd mu, const Eigen::MatrixXd& sigma);  // symmetrizes sigma
};

GaussianStats gaussian_stats(const std::vector<Eigen::VectorXd>& features);
double fid(const GaussianStats& a, const GaussianStats& b);

struct ImageMetrics {
    double fid = 0.0;
    double clip = 0.0;
    double hps = 0.0;
    double reward = 0.0;
};

/// Per-column min-max scaling over the population; a constant column maps to 0.5. FID stays
/// lower-is-better.
std::vector<ImageMetrics> min_max_normalize(const std::vector<ImageMetrics>& rows);
/// Mean of (1 - fid, clip, hps, reward) after min_max_normalize.
std::vector<double> unified(const std::vector<ImageMetrics>& rows);

/// One score per image, e.g. CLIP score, HPS or ImageReward.
class ImageScorer {
public:
    virtual ~ImageScorer() = default;
    virtual std::string id() const = 0;
    virtual std::vector<double> score(const std::vector<std::string>& digests, const std::vector<std::string>& prompts) = 0;
};

/// Feature vectors for FID statistics.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string id() const = 0;
    virtual std::vector<Eigen::VectorXd> features(const std::vector<std::string>& digests) = 0;
};

class MockImageScorer final : public ImageScorer {
public:
    MockImageScorer(std::string name, double lo, double hi, std::uint64_t seed = 0);
    std::string id() const override { return "mock-" + name_; }
    std::vector<double> score(const std::vector<std::string>& digests, const std::vector<std::string>& prompts) override;

private:
    std::string name_;
    double lo_, hi_;
    std::uint64_t seed_;
};

class MockFeatureExtractor final : public FeatureExtractor {
public:
    explicit MockFeatureExtractor(std::size_t dim = 16, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    std::string id() const override { return "mock-features:d=" + std::to_string(dim_); }
    std::vector<Eigen::VectorXd> features(const std::vector<std::string>& digests) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// POST <url>/score {"digests": [...], "prompts": [...]} -> {"scores": [...]}.
class RemoteImageScorer final : public ImageScorer {
public:
    RemoteImageScorer(std::string name, std::string url, HttpOptions http = {});
    std::string id() const override { return "remote-" + name_ + ":" + url_; }
    std::vector<double> score(const std::vector<std::string>& digests, const std::vector<std::string>& prompts) override;

private:
    std::string name_, url_;
    std::unique_ptr<HttpClient> client_;
};

/// POST <url>/features {"digests": [...]} -> {"features": [[...], ...]}.
class RemoteFeatureExtractor final : public FeatureExtractor {
public:
    explicit RemoteFeatureExtractor(std::string url, HttpOptions http = {});
    std::string id() const override { return "remote-features:" + url_; }
    std::vector<Eigen::VectorXd> features(const std::vector<std::string>& digests) override;

private:
    std::string url_;
    std::unique_ptr<HttpClient> client_;
};

struct ScorerSet {
    std::shared_ptr<FeatureExtractor> features;
    std::shared_ptr<ImageScorer> clip;
    std::shared_ptr<ImageScorer> hps;
    std::shared_ptr<ImageScorer> reward;

    bool complete() const { return features && clip && hps && reward; }
    static ScorerSet mock(std::uint64_t seed = 0);
};

struct SystemRun {
    std::string system_id;
    std::vector<StepwiseTrace> traces;
    std::map<std::string, JobRef, std::less<>> jobs;  // final job states by id; falls back to the trace's job
};

struct SystemRow {
    std::string system_id;
    std::size_t samples = 0;
    std::size_t failed = 0;
    double prompt_score = 0.0;
    std::optional<double> selection_acc;  // absent for fixed_baseline runs
    std::optional<double> config_acc;
    std::optional<ImageMetrics> image;    // absent when scorers or images are unavailable
    std::optional<double> unified;
};

struct MetricReport {
    std::vector<SystemRow> rows;
    std::vector<std::string> population;  // systems that entered min-max normalization
    std::string embedder_id;
    nlohmann::json scorers;
    nlohmann::json config;

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& path) const;
};

struct EvalOptions {
    ScorerSet scorers;
    std::vector<std::string> reference_digests;  // images for the FID reference distribution
    std::size_t threads = 1;
    nlohmann::json config = nlohmann::json::object();
};

MetricReport evaluate_run(const std::vector<SystemRun>& systems, const std::vector<BenchmarkSample>& benchmark,
                          const TokenEmbedder& embedder, const EvalOptions& options = {});

}  // namespace autot2i
