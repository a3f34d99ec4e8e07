// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "autot2i/datastore.hpp"
#include "autot2i/selector.hpp"

namespace autot2i {

struct SynthCorpusConfig {
    std::size_t models = 10;
    std::size_t demos = 500;
    std::uint64_t seed = 0;
    double image_share = 0.5;  // demos carrying a showcase image digest
};

struct SynthCorpus {
    std::vector<ModelMeta> models;
    std::vector<Demonstration> demos;

    ModelRegistry registry() const { return ingest(models, demos); }
};

/// Themed models with a skewed demo count: the last model gets one demo, the one before it two.
SynthCorpus synth_corpus(const SynthCorpusConfig& config);

/// Casual single, multimodal or history requests paraphrasing registry demonstrations.
std::vector<BenchmarkSample> synth_benchmark(const ModelRegistry& registry, std::size_t n, std::uint64_t seed);

struct ClusterSet {
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> heldout;
};

/// Class i is centered on e_i / sqrt(2) (pairwise center distance 1) with isotropic noise `sigma`;
/// samples are L2-normalized.
ClusterSet synth_clusters(std::size_t models, std::size_t dim, std::size_t train_per_model, std::size_t heldout_per_model,
                          double sigma, std::uint64_t seed);

/// (encode(input, gt_prompt), token index of gt model) for each sample.
std::vector<TrainingExample> selector_examples(const std::vector<BenchmarkSample>& samples, const ModelRegistry& registry,
                                               const Encoder& encoder);

}  // namespace autot2i
