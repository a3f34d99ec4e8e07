// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <thread>
#include <unordered_map>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

using json = nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

}  // namespace

// ---------------------------------------------------------------------------
// Token embeddings and prompt score

ToyTokenEmbedder::ToyTokenEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw ValidationError("dim", "embedding dimension must be positive");
}

std::string ToyTokenEmbedder::id() const {
    return "toy-token-v1:d=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
}

Eigen::VectorXd ToyTokenEmbedder::feature_vector(std::string_view feature) const {
    std::mt19937_64 rng(mix(fnv1a64(feature), seed_));
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
    return v;
}

Eigen::MatrixXd ToyTokenEmbedder::embed_tokens(std::string_view text) const {
    auto tokens = text::word_tokens(text);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(dim_));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        Eigen::VectorXd v = feature_vector("w:" + tokens[t]);
        const std::string padded = "<" + tokens[t] + ">";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) v += 0.5 * feature_vector("c:" + padded.substr(i, 3));
        out.row(static_cast<Eigen::Index>(t)) = v.normalized().transpose();
    }
    return out;
}

PromptScore greedy_match(const Eigen::MatrixXd& sim) {
    if (sim.rows() == 0 || sim.cols() == 0) throw ValidationError("text", "empty text");
    auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
    PromptScore s;
    for (Eigen::Index i = 0; i < sim.rows(); ++i) s.precision += clamp01(sim.row(i).maxCoeff());
    for (Eigen::Index j = 0; j < sim.cols(); ++j) s.recall += clamp01(sim.col(j).maxCoeff());
    s.precision /= static_cast<double>(sim.rows());
    s.recall /= static_cast<double>(sim.cols());
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

PromptScore prompt_score(const Eigen::MatrixXd& candidate, const Eigen::MatrixXd& reference) {
    if (candidate.rows() == 0) throw ValidationError("candidate", "empty text");
    if (reference.rows() == 0) throw ValidationError("reference", "empty text");
    return greedy_match(candidate * reference.transpose());
}

PromptScore prompt_score(std::string_view candidate, std::string_view reference, const TokenEmbedder& embedder) {
    return prompt_score(embedder.embed_tokens(candidate), embedder.embed_tokens(reference));
}

double selection_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts) {
    if (preds.size() != gts.size()) throw ValidationError("preds", "prediction and ground-truth lengths differ");
    if (preds.empty()) throw ValidationError("preds", "no predictions");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == gts[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double config_accuracy(const ArgumentSet& pred, const ArgumentSet& gt, const ArgumentSchema& schema) {
    schema.validate(pred);
    schema.validate(gt);
    if (schema.size() == 0) throw ValidationError("schema", "empty schema");
    std::size_t hits = 0;
    for (const auto& spec : schema.specs()) {
        const auto& a = pred.at(spec.name);
        const auto& b = gt.at(spec.name);
        if (spec.kind == ArgKind::string || spec.kind == ArgKind::enumeration)
            hits += text::iequals(text::trim(std::get<std::string>(a)), text::trim(std::get<std::string>(b)));
        else
            hits += a == b;
    }
    return static_cast<double>(hits) / static_cast<double>(schema.size());
}

// ---------------------------------------------------------------------------
// FID

GaussianStats::GaussianStats(Eigen::VectorXd mu, const Eigen::MatrixXd& sigma) : mean(std::move(mu)) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != mean.size())
        throw ValidationError("cov", "covariance shape does not match the mean");
    cov = 0.5 * (sigma + sigma.transpose());
}

GaussianStats gaussian_stats(const std::vector<Eigen::VectorXd>& features) {
    if (features.size() < 2) throw ValidationError("features", "at least two feature vectors are required");
    const auto d = features[0].size();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto& f : features) {
        if (f.size() != d) throw ValidationError("features", "feature dimensions differ");
        mu += f;
    }
    mu /= static_cast<double>(features.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& f : features) {
        Eigen::VectorXd c = f - mu;
        cov += c * c.transpose();
    }
    cov /= static_cast<double>(features.size() - 1);
    return GaussianStats(std::move(mu), cov);
}

namespace {

Eigen::VectorXd checked_eigenvalues(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, const char* what) {
    if (es.info() != Eigen::Success) throw Error(std::string("eigendecomposition failed for ") + what);
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-8) throw Error(std::string(what) + " is not positive semidefinite");
        if (ev[i] < 1e-10) ev[i] = 0.0;
    }
    return ev;
}

}  // namespace

double fid(const GaussianStats& a, const GaussianStats& b) {
    if (a.mean.size() != b.mean.size()) throw ValidationError("stats", "dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a.cov);
    Eigen::VectorXd la = checked_eigenvalues(ea, "first covariance");
    checked_eigenvalues(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b.cov, Eigen::EigenvaluesOnly), "second covariance");
    Eigen::MatrixXd sa = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
    Eigen::MatrixXd m = sa * b.cov * sa;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
    const double tr_sqrt = checked_eigenvalues(em, "covariance product").cwiseSqrt().sum();
    const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
    if (d < 0.0) {
        if (d < -1e-8) throw Error("negative Frechet distance " + std::to_string(d));
        return 0.0;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Unified metric

std::vector<ImageMetrics> min_max_normalize(const std::vector<ImageMetrics>& rows) {
    if (rows.empty()) throw ValidationError("rows", "no systems to normalize");
    std::vector<ImageMetrics> out(rows);
    auto column = [&](double ImageMetrics::*field) {
        double mn = std::numeric_limits<double>::infinity(), mx = -mn;
        for (const auto& r : rows) {
            const double x = r.*field;
            if (!std::isfinite(x)) throw ValidationError("rows", "non-finite metric value");
            mn = std::min(mn, x);
            mx = std::max(mx, x);
        }
        for (auto& r : out) r.*field = mx > mn ? (r.*field - mn) / (mx - mn) : 0.5;
    };
    column(&ImageMetrics::fid);
    column(&ImageMetrics::clip);
    column(&ImageMetrics::hps);
    column(&ImageMetrics::reward);
    return out;
}

std::vector<double> unified(const std::vector<ImageMetrics>& rows) {
    std::vector<double> out;
    for (const auto& n : min_max_normalize(rows)) out.push_back(0.25 * ((1.0 - n.fid) + n.clip + n.hps + n.reward));
    return out;
}

// ---------------------------------------------------------------------------
// Scorers

MockImageScorer::MockImageScorer(std::string name, double lo, double hi, std::uint64_t seed)
    : name_(std::move(name)), lo_(lo), hi_(hi), seed_(seed) {}

std::vector<double> MockImageScorer::score(const std::vector<std::string>& digests, const std::vector<std::string>& prompts) {
    if (digests.size() != prompts.size()) throw ValidationError("prompts", "one prompt per image is required");
    std::vector<double> out;
    for (std::size_t i = 0; i < digests.size(); ++i) {
        std::mt19937_64 rng(mix(mix(fnv1a64(name_), seed_), fnv1a64(digests[i] + "\n" + prompts[i])));
        out.push_back(std::uniform_real_distribution<double>(lo_, hi_)(rng));
    }
    return out;
}

std::vector<Eigen::VectorXd> MockFeatureExtractor::features(const std::vector<std::string>& digests) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& d : digests) {
        std::mt19937_64 rng(mix(fnv1a64(d), seed_));
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
        out.push_back(std::move(v));
    }
    return out;
}

RemoteImageScorer::RemoteImageScorer(std::string name, std::string url, HttpOptions http)
    : name_(std::move(name)), url_(std::move(url)), client_(std::make_unique<HttpClient>(url_, std::move(http))) {}

std::vector<double> RemoteImageScorer::score(const std::vector<std::string>& digests, const std::vector<std::string>& prompts) {
    auto resp = client_->post_json("/score", {{"digests", digests}, {"prompts", prompts}});
    if (!resp.contains("scores") || !resp["scores"].is_array()) throw BackendError(id() + ": response missing scores");
    std::vector<double> out;
    for (const auto& s : resp["scores"]) {
        if (!s.is_number()) throw BackendError(id() + ": non-numeric score");
        out.push_back(s.get<double>());
    }
    if (out.size() != digests.size()) throw BackendError(id() + ": expected " + std::to_string(digests.size()) + " scores");
    return out;
}

RemoteFeatureExtractor::RemoteFeatureExtractor(std::string url, HttpOptions http)
    : url_(std::move(url)), client_(std::make_unique<HttpClient>(url_, std::move(http))) {}

std::vector<Eigen::VectorXd> RemoteFeatureExtractor::features(const std::vector<std::string>& digests) {
    auto resp = client_->post_json("/features", {{"digests", digests}});
    if (!resp.contains("features") || !resp["features"].is_array()) throw BackendError(id() + ": response missing features");
    std::vector<Eigen::VectorXd> out;
    for (const auto& row : resp["features"]) {
        auto v = row.get<std::vector<double>>();
        out.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    if (out.size() != digests.size()) throw BackendError(id() + ": expected " + std::to_string(digests.size()) + " vectors");
    return out;
}

ScorerSet ScorerSet::mock(std::uint64_t seed) {
    ScorerSet s;
    s.features = std::make_shared<MockFeatureExtractor>(16, seed);
    s.clip = std::make_shared<MockImageScorer>("clip", 60.0, 75.0, seed);
    s.hps = std::make_shared<MockImageScorer>("hps", 20.0, 26.0, seed);
    s.reward = std::make_shared<MockImageScorer>("reward", -40.0, 10.0, seed);
    return s;
}

// ---------------------------------------------------------------------------
// Reports

json MetricReport::to_json() const {
    json rows_j = json::array();
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    for (const auto& r : rows) {
        json j = {{"system_id", r.system_id},
                  {"samples", r.samples},
                  {"failed", r.failed},
                  {"prompt_score", r.prompt_score},
                  {"selection_acc", opt(r.selection_acc)},
                  {"config_acc", opt(r.config_acc)},
                  {"unified", opt(r.unified)}};
        if (r.image) {
            j["fid"] = r.image->fid;
            j["clip"] = r.image->clip;
            j["hps"] = r.image->hps;
            j["reward"] = r.image->reward;
        } else {
            j["fid"] = j["clip"] = j["hps"] = j["reward"] = nullptr;
        }
        rows_j.push_back(std::move(j));
    }
    return {{"rows", rows_j},
            {"population", population},
            {"embedder", embedder_id},
            {"scorers", scorers},
            {"config", config}};
}

void MetricReport::write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << to_json().dump(2) << '\n';
        if (!out) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {

struct StepScores {
    double prompt = 0.0;
    double selection = 0.0;
    double config = 0.0;
};

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

MetricReport evaluate_run(const std::vector<SystemRun>& systems, const std::vector<BenchmarkSample>& benchmark,
                          const TokenEmbedder& embedder, const EvalOptions& options) {
    if (systems.empty()) throw ValidationError("systems", "nothing to evaluate");
    const auto& schema = ArgumentSchema::canonical();
    std::unordered_map<std::string, const BenchmarkSample*> by_id;
    for (const auto& s : benchmark) by_id[s.sample_id] = &s;

    MetricReport report;
    report.embedder_id = embedder.id();
    report.config = options.config;
    auto sid = [](const auto& p) { return p ? json(p->id()) : json(nullptr); };
    report.scorers = {{"features", sid(options.scorers.features)},
                      {"clip", sid(options.scorers.clip)},
                      {"hps", sid(options.scorers.hps)},
                      {"reward", sid(options.scorers.reward)}};

    std::optional<GaussianStats> reference;
    if (options.scorers.complete() && options.reference_digests.size() >= 2)
        reference = gaussian_stats(options.scorers.features->features(options.reference_digests));

    for (const auto& sys : systems) {
        if (sys.traces.empty()) throw ValidationError("traces", "system '" + sys.system_id + "' has no traces");
        std::vector<const BenchmarkSample*> gts;
        for (const auto& t : sys.traces) {
            auto it = t.sample_id ? by_id.find(*t.sample_id) : by_id.end();
            if (it == by_id.end())
                throw ValidationError("sample_id", "trace '" + t.trace_id + "' does not match any benchmark sample");
            gts.push_back(it->second);
        }

        std::vector<StepScores> scores(sys.traces.size());
        parallel_for(sys.traces.size(), options.threads, [&](std::size_t i) {
            const auto& t = sys.traces[i];
            const auto& gt = *gts[i];
            if (t.failed()) return;
            if (t.rewritten_prompt && !text::word_tokens(*t.rewritten_prompt).empty())
                scores[i].prompt = prompt_score(*t.rewritten_prompt, gt.gt_prompt, embedder).f1;
            scores[i].selection = t.model_id && *t.model_id == gt.gt_model_id ? 1.0 : 0.0;
            if (t.args) scores[i].config = config_accuracy(*t.args, gt.gt_args, schema);
        });

        SystemRow row;
        row.system_id = sys.system_id;
        row.samples = sys.traces.size();
        double ps = 0, sel = 0, cfg = 0;
        bool all_fixed = true;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            ps += scores[i].prompt;
            sel += scores[i].selection;
            cfg += scores[i].config;
            row.failed += sys.traces[i].failed();
            all_fixed = all_fixed && sys.traces[i].mode == PipelineMode::fixed_baseline;
        }
        const auto n = static_cast<double>(scores.size());
        row.prompt_score = ps / n;
        if (!all_fixed) {
            row.selection_acc = sel / n;
            row.config_acc = cfg / n;
        }

        if (reference) {
            std::vector<std::string> digests, prompts;
            for (std::size_t i = 0; i < sys.traces.size(); ++i) {
                const auto& t = sys.traces[i];
                if (t.failed() || !t.image_job) continue;
                JobRef job = *t.image_job;
                if (auto it = sys.jobs.find(job.job_id); it != sys.jobs.end()) job = it->second;
                if (job.status != JobStatus::done || !job.digest) continue;
                digests.push_back(*job.digest);
                prompts.push_back(gts[i]->gt_prompt);
            }
            if (digests.size() >= 2) {
                auto mean = [](const std::vector<double>& v) {
                    double s = 0;
                    for (double x : v) s += x;
                    return s / static_cast<double>(v.size());
                };
                ImageMetrics m;
                m.fid = fid(gaussian_stats(options.scorers.features->features(digests)), *reference);
                m.clip = mean(options.scorers.clip->score(digests, prompts));
                m.hps = mean(options.scorers.hps->score(digests, prompts));
                m.reward = mean(options.scorers.reward->score(digests, prompts));
                row.image = m;
            }
        }
        report.rows.push_back(std::move(row));
    }

    std::vector<ImageMetrics> pop;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < report.rows.size(); ++i)
        if (report.rows[i].image) {
            pop.push_back(*report.rows[i].image);
            idx.push_back(i);
            report.population.push_back(report.rows[i].system_id);
        }
    if (!pop.empty()) {
        auto u = unified(pop);
        for (std::size_t k = 0; k < idx.size(); ++k) report.rows[idx[k]].unified = u[k];
    }
    return report;
}

}  // namespace autot2i
