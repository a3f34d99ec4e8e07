// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

// Runs every primary acceptance criterion at its stated tolerance and prints one PASS/FAIL line
// per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "autot2i/app.hpp"
#include "autot2i/benchforge.hpp"
#include "autot2i/config.hpp"
#include "autot2i/evalkit.hpp"
#include "autot2i/selector.hpp"
#include "autot2i/synth.hpp"
#include "fixtures.hpp"

using namespace autot2i;
using autot2i::testing::random_matrix;
using autot2i::testing::random_psd;
using autot2i::testing::TempDir;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[violated: " << what << "] ";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

void gradient_check(Outcome& o) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2026);
    const double eps = 1e-5;
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        const std::size_t vocab = 8 + c % 24, models = 2 + c % 9, dim = 4 + c % 13;
        auto head = init_head(models, dim, c, random_matrix(rng, vocab, dim, 0.5));
        head.model_rows = random_matrix(rng, models, dim, 0.5);
        Eigen::VectorXd h = random_matrix(rng, dim, 1).col(0);
        const std::size_t target = rng() % models;
        const auto analytic = loss_and_grad(head, h, target).grad;
        Eigen::MatrixXd numeric(models, dim);
        for (std::size_t i = 0; i < models; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                auto plus = head, minus = head;
                plus.model_rows(i, j) += eps;
                minus.model_rows(i, j) -= eps;
                numeric(i, j) = (loss_and_grad(plus, h, target).loss - loss_and_grad(minus, h, target).loss) / (2 * eps);
            }
        const double rel = (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
        worst = std::max(worst, rel);
    }
    const double secs = seconds_since(t0);
    o.detail << "cases=100 max_rel_err=" << worst << " time=" << secs << "s ";
    o.expect(worst < 1e-6, "max relative error < 1e-6");
    o.expect(secs < 10.0, "runtime < 10 s");
}

constexpr std::size_t kModels = 10, kDim = 64;

TokenHead cluster_head(std::uint64_t seed) { return init_head(kModels, kDim, seed, synth_word_rows(256, kDim, 1)); }

void synthetic_routing(Outcome& o) {
    const auto t0 = Clock::now();
    auto cs = synth_clusters(kModels, kDim, 50, 20, 0.1, 7);
    auto config = TrainConfig::toy_preset();
    config.seed = 7;
    auto a = cluster_head(7);
    const auto words_before = a.word_rows_digest();
    const Eigen::MatrixXd word_copy = a.word_rows;
    auto report = train(a, cs.train, config, cs.heldout);
    auto b = cluster_head(7);
    train(b, cs.train, config, cs.heldout);
    const double acc = report.heldout_accuracy.value_or(0.0);
    const double secs = seconds_since(t0);
    o.detail << "train=" << cs.train.size() << " heldout=" << cs.heldout.size() << " heldout_acc=" << acc
             << " time=" << secs << "s ";
    o.expect(cs.train.size() == 500 && cs.heldout.size() == 200, "50 train + 20 held-out per model");
    o.expect(acc >= 0.95, "held-out accuracy >= 95%");
    o.expect(a.word_rows_digest() == words_before && a.word_rows.cwiseEqual(word_copy).all(), "word rows bit-identical");
    o.expect(serialize_checkpoint(a) == serialize_checkpoint(b), "same seed gives identical checkpoint");
    o.expect(secs < 60.0, "runtime < 60 s");
}

// Mean cross-entropy over the full logit vector, written from the definition.
double mean_ce(const Eigen::MatrixXd& words, const Eigen::MatrixXd& models, const std::vector<TrainingExample>& data) {
    double total = 0;
    for (const auto& ex : data) {
        Eigen::VectorXd z(words.rows() + models.rows());
        z << words * ex.h, models * ex.h;
        const double mx = z.maxCoeff();
        total += -(z(words.rows() + ex.target) - mx - std::log((z.array() - mx).exp().sum()));
    }
    return total / static_cast<double>(data.size());
}

// Full-batch gradient descent on mean CE + (lambda/2) ||M||^2, independent of the selector code.
Eigen::MatrixXd oracle_softmax_regression(const Eigen::MatrixXd& words, Eigen::MatrixXd m,
                                          const std::vector<TrainingExample>& data, double lambda) {
    const auto V = words.rows();
    for (int it = 0; it < 20000; ++it) {
        Eigen::MatrixXd g = lambda * m;
        for (const auto& ex : data) {
            Eigen::VectorXd z(V + m.rows());
            z << words * ex.h, m * ex.h;
            Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
            p /= p.sum();
            Eigen::VectorXd d = p.tail(m.rows());
            d(ex.target) -= 1.0;
            g += (d * ex.h.transpose()) / static_cast<double>(data.size());
        }
        m -= 1.0 * g;
        if (g.norm() < 1e-9) break;
    }
    return m;
}

void softmax_oracle(Outcome& o) {
    auto cs = synth_clusters(kModels, kDim, 50, 20, 0.1, 7);
    const double lambda = 0.01;
    TrainConfig config;
    config.optimizer = Optimizer::sgd;
    config.learning_rate = 0.5;
    config.weight_decay = lambda;
    config.epochs = 300;
    config.batch_size = 32;
    config.seed = 7;
    auto head = cluster_head(7);
    const Eigen::MatrixXd init = head.model_rows;
    train(head, cs.train, config);
    const auto oracle = oracle_softmax_regression(head.word_rows, init, cs.train, lambda);
    const double ours = mean_ce(head.word_rows, head.model_rows, cs.train);
    const double ref = mean_ce(head.word_rows, oracle, cs.train);
    const double rel = std::abs(ours - ref) / ref;
    o.detail << "selector_loss=" << ours << " oracle_loss=" << ref << " rel_diff=" << rel << " ";
    o.expect(rel <= 0.05, "final loss within 5% of full-batch oracle");
}

void prompt_score_checks(Outcome& o) {
    ToyTokenEmbedder e;
    const std::vector<std::string> texts = {
        "masterpiece, best quality, a red fox in the snow",
        "portrait of an old sailor, oil painting, dramatic lighting",
        "cyberpunk street at night, neon signs, rain",
        "a cozy cabin in the mountains, watercolor",
    };
    double worst_identical = 1.0;
    for (const auto& t : texts) worst_identical = std::min(worst_identical, prompt_score(t, t, e).f1);
    o.expect(worst_identical >= 0.99, "identical texts f1 >= 0.99");

    Eigen::MatrixXd cand(2, 3), ref(2, 3);
    cand << 1, 0, 0, 0.5, 0.5, std::sqrt(0.5);
    ref << 1, 0, 0, 0, 1, 0;
    const double f1 = prompt_score(cand, ref).f1;
    o.expect(std::abs(f1 - 0.75) <= 1e-9, "2x2 example equals 0.75");

    std::mt19937_64 rng(9);
    const std::vector<std::string> pool = {"fox", "snow", "castle", "night", "neon", "rain", "portrait", "oil",
                                           "painting", "best", "quality", "cat", "sunset", "forest", "dragon",
                                           "city", "watercolor", "ancient", "ruins", "glowing"};
    auto random_text = [&] {
        std::string s;
        const auto n = 1 + rng() % 8;
        for (std::size_t i = 0; i < n; ++i) s += pool[rng() % pool.size()] + (i + 1 < n ? " " : "");
        return s;
    };
    double worst_swap = 0;
    for (int i = 0; i < 50; ++i) {
        const auto a = random_text(), b = random_text();
        worst_swap = std::max(worst_swap, std::abs(prompt_score(a, b, e).f1 - prompt_score(b, a, e).f1));
    }
    o.expect(worst_swap <= 1e-12, "F1 swap symmetry on 50 pairs");
    o.detail << "min_identical_f1=" << worst_identical << " two_by_two=" << f1 << " max_swap_diff=" << worst_swap << " ";
}

void fid_checks(Outcome& o) {
    std::mt19937_64 rng(4);
    Eigen::VectorXd mu = random_matrix(rng, 5, 1).col(0);
    Eigen::MatrixXd s = random_psd(rng, 5);
    const double identity = fid({mu, s}, {mu, s});
    Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1), o1 = Eigen::VectorXd::Ones(1);
    const double one_d = fid({z1, Eigen::MatrixXd::Identity(1, 1)}, {o1, Eigen::MatrixXd::Identity(1, 1)});
    Eigen::VectorXd z2 = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd a = Eigen::Vector2d(1.0, 4.0).asDiagonal(), b = Eigen::Vector2d(4.0, 1.0).asDiagonal();
    const double two_d = fid({z2, a}, {z2, b});
    double worst_sym = 0;
    for (int i = 0; i < 20; ++i) {
        const int d = 2 + i % 7;
        GaussianStats p(random_matrix(rng, d, 1).col(0), random_psd(rng, d));
        GaussianStats q(random_matrix(rng, d, 1).col(0), random_psd(rng, d));
        worst_sym = std::max(worst_sym, std::abs(fid(p, q) - fid(q, p)));
    }
    o.detail << "identity=" << identity << " one_d=" << one_d << " two_d=" << two_d << " max_asym=" << worst_sym << " ";
    o.expect(std::abs(identity) <= 1e-8, "identity case 0");
    o.expect(std::abs(one_d - 1.0) <= 1e-9, "1-D case 1.0");
    o.expect(std::abs(two_d - 2.0) <= 1e-9, "2-D diagonal case 2.0");
    o.expect(worst_sym <= 1e-8, "symmetry on 20 PSD pairs");
}

void unified_checks(Outcome& o) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-50, 100);
    bool in_range = true, binary = true;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ImageMetrics> rows(2 + trial % 6);
        for (auto& r : rows) r = {u(rng), u(rng), u(rng), u(rng)};
        for (double v : unified(rows)) in_range = in_range && v >= 0.0 && v <= 1.0;
        if (rows.size() == 2) {
            auto n = min_max_normalize(rows);
            for (const auto& r : n)
                for (double v : {r.fid, r.clip, r.hps, r.reward}) binary = binary && (v == 0.0 || v == 1.0);
        }
    }
    o.expect(in_range, "unified values in [0,1]");
    o.expect(binary, "two-row population gives {0,1} per metric");

    const std::vector<std::pair<std::string, ImageMetrics>> table = {
        {"Baseline", {32.7, 64.6, 20.2, -34.6}}, {"Base2B", {21.3, 69.9, 23.5, 2.4}}, {"Base4B", {20.7, 70.0, 23.4, 1.5}},
        {"Base8B", {20.8, 70.7, 23.9, 4.0}},     {"Evo2B", {19.1, 72.9, 25.1, 8.9}},
    };
    std::vector<ImageMetrics> rows;
    for (const auto& [_, m] : table) rows.push_back(m);
    const auto scores = unified(rows);
    const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
    const auto worst = std::min_element(scores.begin(), scores.end()) - scores.begin();
    o.detail << "reported_rows:";
    for (std::size_t i = 0; i < table.size(); ++i) o.detail << " " << table[i].first << "=" << scores[i];
    o.detail << " ";
    o.expect(table[best].first == "Evo2B", "Evo2B first");
    o.expect(table[worst].first == "Baseline", "Baseline last");
}

// Writes a corpus, a trained checkpoint and a 100-sample benchmark under `dir`.
AppConfig prepare_mock_run(const TempDir& dir) {
    SynthCorpusConfig cc;
    cc.models = 10;
    cc.demos = 500;
    cc.seed = 3;
    auto corpus = synth_corpus(cc);
    auto registry = corpus.registry();
    save_registry(dir / "registry.jsonl", dir / "demos.jsonl", registry);
    auto bench = synth_benchmark(registry, 100, 11);
    for (auto& s : bench) s.split = Split::test;
    write_benchmark(dir / "bench.jsonl", bench);

    auto config = AppConfig::from_json(nlohmann::json::object());
    config.set("registry", (dir / "registry.jsonl").string());
    config.set("demos", (dir / "demos.jsonl").string());
    config.set("benchmark", (dir / "bench.jsonl").string());
    config.set("selector.checkpoint", (dir / "selector.bin").string());
    config.set("seed", "5");

    auto train_samples = synth_benchmark(registry, 400, 12);
    auto encoder = make_encoder(config);
    auto examples = selector_examples(train_samples, registry, *encoder);
    auto head = init_head(registry.size(), encoder->dimension(), 5, word_rows_from(config, encoder->dimension()));
    train(head, examples, train_config_from(config));
    save_checkpoint(dir / "selector.bin", head);
    return config;
}

struct MockRun {
    std::vector<StepwiseTrace> traces;
    std::vector<std::string> digests;  // benchmark order
    std::map<std::string, JobRef, std::less<>> jobs;
    std::size_t persisted = 0;
};

MockRun mock_run(const AppConfig& config, const std::filesystem::path& out, const std::vector<BenchmarkSample>& bench) {
    MockRun r;
    {
        auto rt = build_runtime(config, out / "traces.jsonl", out / "images");
        for (const auto& s : bench) r.traces.push_back(rt.pipeline->run_evo(s.input, s.sample_id));
        rt.jobs->wait_all();
        for (const auto& t : r.traces) {
            if (!t.image_job) {
                r.digests.emplace_back();
                continue;
            }
            auto j = *rt.jobs->status(t.image_job->job_id);
            r.jobs.emplace(j.job_id, j);
            r.digests.push_back(j.digest.value_or(""));
        }
    }
    r.persisted = jsonl::read(out / "traces.jsonl").size();
    return r;
}

void end_to_end(Outcome& o) {
    const auto t0 = Clock::now();
    TempDir dir;
    auto config = prepare_mock_run(dir);
    auto bench = load_benchmark(dir / "bench.jsonl");
    auto first = mock_run(config, dir / "run1", bench);
    auto second = mock_run(config, dir / "run2", bench);

    std::size_t valid = 0, done = 0;
    for (const auto& t : first.traces) valid += t.args && ArgumentSchema::canonical().is_valid(*t.args);
    for (const auto& d : first.digests) done += !d.empty();

    EvalOptions opts;
    opts.scorers = ScorerSet::mock(5);
    ImageStore refs(dir / "reference");
    MockRenderer renderer;
    for (const auto& s : bench) opts.reference_digests.push_back(refs.put(renderer.render({s.gt_model_id, s.gt_prompt, s.gt_args})));
    ToyTokenEmbedder embedder;
    auto report = evaluate_run({{"evo", first.traces, first.jobs}}, bench, embedder, opts);
    const auto& row = report.rows.at(0);
    const bool complete = row.samples == 100 && row.selection_acc && row.config_acc && row.image && row.unified;
    const double secs = seconds_since(t0);

    o.detail << "persisted=" << first.persisted << " valid_args=" << valid << " images=" << done
             << " prompt_score=" << row.prompt_score << " selection_acc=" << row.selection_acc.value_or(-1)
             << " config_acc=" << row.config_acc.value_or(-1) << " time=" << secs << "s ";
    o.expect(first.persisted == 100 && second.persisted == 100, "100 persisted traces");
    o.expect(valid == 100, "all argument sets schema-valid");
    o.expect(done == 100, "every job rendered");
    o.expect(first.digests == second.digests, "image digests identical across runs");
    o.expect(complete, "evaluate_run report complete");
    o.expect(secs < 120.0, "runtime < 2 min");
}

void benchforge_checks(Outcome& o) {
    SynthCorpusConfig cc;
    cc.models = 10;
    cc.demos = 500;
    cc.seed = 21;
    auto registry = synth_corpus(cc).registry();
    auto roles = load_roles(default_roles_path());
    ToyTokenEmbedder embedder;
    BenchBuildConfig config;
    auto llm = make_mock_roleplay_llm();
    auto r = build_benchmark(registry, roles, *llm, embedder, config);

    std::set<std::string> train_ids, test_ids, all_ids;
    for (const auto& s : r.train) train_ids.insert(s.sample_id);
    for (const auto& s : r.test_initial) test_ids.insert(s.sample_id);
    std::vector<std::string> deduped_ids;
    auto kept = dedup(r.generation.candidates, embedder, config.dedup_threshold);
    for (const auto& c : kept) all_ids.insert(sample_id_for(c));
    std::set<std::string> inter;
    std::set_intersection(train_ids.begin(), train_ids.end(), test_ids.begin(), test_ids.end(),
                          std::inserter(inter, inter.begin()));
    std::set<std::string> uni(train_ids);
    uni.insert(test_ids.begin(), test_ids.end());
    o.expect(inter.empty(), "train/test disjoint");
    o.expect(uni == all_ids, "train/test exhaustive");

    std::map<std::string, std::size_t> per_model, per_model_test, per_model_train;
    for (const auto& s : r.train) ++per_model[s.gt_model_id], ++per_model_train[s.gt_model_id];
    for (const auto& s : r.test_initial) ++per_model[s.gt_model_id], ++per_model_test[s.gt_model_id];
    bool counts = true;
    for (const auto& [m, n] : per_model) {
        const std::size_t want = n >= 2 ? static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n) - 1e-9)) : 0;
        counts = counts && per_model_test[m] == want;
    }
    o.expect(counts, "per-model test count = ceil(0.2 n)");

    std::vector<std::string> texts, groups;
    for (const auto& c : kept) {
        texts.push_back(user_text(c.input));
        groups.push_back(c.model_id);
    }
    SimilarityIndex sim(texts, embedder);
    double worst = 0;
    for (std::size_t i = 0; i < texts.size(); ++i)
        for (std::size_t j = i + 1; j < texts.size(); ++j)
            if (groups[i] == groups[j]) worst = std::max(worst, sim(i, j));
    o.expect(worst <= 0.8, "no same-model pair above 0.8 after dedup");

    bool tags = true;
    for (const auto& s : r.test) tags = tags && ((s.setting == Setting::fewshot) == (per_model_train[s.gt_model_id] <= config.fewshot_k));
    o.expect(tags, "fewshot iff train count <= k");
    o.detail << "candidates=" << r.generation.candidates.size() << " after_dedup=" << kept.size()
             << " train=" << r.train.size() << " test_init=" << r.test_initial.size() << " benchmark=" << r.test.size()
             << " max_same_model_sim=" << worst << " ";
}

void pipeline_modes(Outcome& o) {
    using autot2i::testing::PipelineFixture;
    using autot2i::testing::PipelineSetup;
    {
        PipelineSetup s;
        auto llm = std::make_shared<ScriptedLlm>(std::vector<std::optional<std::string>>{
            "```plan\nprompt: a fox in snow\nmodel: Nonexistent Diffusion 9000\nsteps: 30\n```"});
        s.direct_llm = llm;
        PipelineFixture f(s);
        auto t = f.pipeline->run_direct(ChatInput::single("draw me a fox"));
        o.expect(t.failed() && t.failing_stage == "direct", "unresolvable model gives a failed trace");
        o.expect(!t.model_id && !t.args && !t.image_job && !t.args_fallback && f.jobs->jobs().empty(), "no fallback");
        o.detail << "direct_reason='" << t.failure_reason.value_or("") << "' ";
    }
    {
        PipelineSetup s;
        auto fixed = ArgumentSchema::canonical().defaults();
        fixed.set("sampler", std::string("DPM++ 2M Karras"));
        fixed.set("steps", std::int64_t{28});
        fixed.set("cfg_scale", 6.5);
        s.config.fixed_args = fixed;
        PipelineFixture probe;
        s.config.baseline_model_id = probe.registry->models().back().model_id;
        PipelineFixture f(s);
        auto bench = synth_benchmark(*f.registry, 30, 2);
        bool same = true;
        for (const auto& b : bench) {
            auto t = f.pipeline->run_fixed_baseline(b.input, b.sample_id);
            same = same && !t.failed() && t.model_id == s.config.baseline_model_id && t.args == fixed && !t.selection;
        }
        f.jobs->wait_all();
        for (const auto& j : f.jobs->jobs()) same = same && j.status == JobStatus::done;
        o.expect(same, "fixed_baseline uses configured model and fixed args");
        o.detail << "baseline_runs=" << bench.size() << " ";
    }
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"selector-gradient-check", gradient_check},
        {"synthetic-routing", synthetic_routing},
        {"softmax-regression-oracle", softmax_oracle},
        {"prompt-score", prompt_score_checks},
        {"fid-math", fid_checks},
        {"unified-metric", unified_checks},
        {"end-to-end-mock-run", end_to_end},
        {"benchforge", benchforge_checks},
        {"pipeline-modes", pipeline_modes},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            fn(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "]";
        }
        failures += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures;
}
