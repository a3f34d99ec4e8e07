// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "autot2i/argconf.hpp"
#include "autot2i/digest.hpp"
#include "autot2i/pipeline.hpp"
#include "autot2i/rewriter.hpp"
#include "autot2i/selector.hpp"
#include "autot2i/synth.hpp"

namespace autot2i::testing {

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("autot2i-test-" + random_id().substr(0, 12) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::shared_ptr<ModelRegistry> small_registry(std::size_t models = 4, std::size_t demos = 40, std::uint64_t seed = 1) {
    SynthCorpusConfig c;
    c.models = models;
    c.demos = demos;
    c.seed = seed;
    return std::make_shared<ModelRegistry>(synth_corpus(c).registry());
}

inline Demonstration make_demo(std::string id, std::string model, std::string prompt) {
    Demonstration d;
    d.demo_id = std::move(id);
    d.model_id = std::move(model);
    d.prompt = std::move(prompt);
    d.args = ArgumentSchema::canonical().defaults();
    return d;
}

inline ModelRecord make_model(std::string id, std::size_t token, std::vector<std::string> demo_ids) {
    ModelRecord m;
    m.model_id = id;
    m.display_name = "Model " + id;
    m.description = "test model " + id;
    m.base_family = "sd15";
    m.token_index = token;
    m.default_args = ArgumentSchema::canonical().defaults();
    m.demo_ids = std::move(demo_ids);
    return m;
}

struct PipelineSetup {
    std::shared_ptr<LlmBackend> direct_llm;
    std::shared_ptr<LlmBackend> argconf_llm;
    std::shared_ptr<RewriterBackend> rewriter;
    std::shared_ptr<Renderer> renderer;
    std::filesystem::path traces_path;
    std::filesystem::path images_dir;
    PipelineConfig config;
    std::size_t workers = 2;
};

/// Registry, toy encoder, untrained head and mock backends wired into a Pipeline.
struct PipelineFixture {
    std::shared_ptr<ModelRegistry> registry;
    std::shared_ptr<ToyEncoder> encoder;
    std::shared_ptr<TokenHead> head;
    std::shared_ptr<JobManager> jobs;
    std::shared_ptr<TraceStore> traces;
    std::shared_ptr<Pipeline> pipeline;

    explicit PipelineFixture(PipelineSetup s = {}, std::shared_ptr<ModelRegistry> reg = small_registry()) {
        registry = std::move(reg);
        encoder = std::make_shared<ToyEncoder>(ToyEncoderConfig{32, 99, 1024});
        head = std::make_shared<TokenHead>(init_head(registry->size(), 32, 5, synth_word_rows(16, 32, 3)));
        jobs = std::make_shared<JobManager>(s.renderer ? s.renderer : std::make_shared<MockRenderer>(),
                                            std::make_shared<ImageStore>(s.images_dir), s.workers);
        traces = std::make_shared<TraceStore>(s.traces_path);
        PipelineComponents pc;
        pc.registry = registry;
        pc.encoder = encoder;
        pc.head = head;
        auto rb = s.rewriter ? s.rewriter : std::make_shared<MockRewriter>();
        pc.rewriter = std::make_shared<Rewriter>(rb);
        pc.baseline_rewriter = std::make_shared<Rewriter>(rb);
        pc.configurator = std::make_shared<ArgConfigurator>(*registry, encoder,
                                                            s.argconf_llm ? s.argconf_llm : make_echo_args_llm());
        pc.direct_llm = s.direct_llm;
        pc.jobs = jobs;
        pc.traces = traces;
        if (s.config.baseline_model_id.empty()) s.config.baseline_model_id = registry->models().front().model_id;
        pipeline = std::make_shared<Pipeline>(std::move(pc), s.config);
    }
};

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, Eigen::Index d) {
    Eigen::MatrixXd a = random_matrix(rng, d, d);
    return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace autot2i::testing
