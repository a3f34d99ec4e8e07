// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autot2i/encoders.hpp"
#include "autot2i/error.hpp"

namespace autot2i {

/// Language-modeling head extended with one row per registered model.
///
/// Logits are [word_rows; model_rows] * h. Word rows are the frozen vocabulary block and are never
/// written after construction; model rows (one per registry token_index) are the only trainable
/// parameters.
struct TokenHead {
    Eigen::MatrixXd word_rows;   // |V| x d
    Eigen::MatrixXd model_rows;  // |M| x d

    std::size_t dim() const { return static_cast<std::size_t>(model_rows.cols()); }
    std::size_t vocab_size() const { return static_cast<std::size_t>(word_rows.rows()); }
    std::size_t num_models() const { return static_cast<std::size_t>(model_rows.rows()); }

    /// |V| + |M| logits, word block first.
    Eigen::VectorXd logits(const FeatureVector& h) const;

    /// SHA-256 over the row-major little-endian bytes of word_rows.
    std::string word_rows_digest() const;
};

/// Frozen stand-in vocabulary: `vocab` rows drawn from N(0, 1/d) with `seed`.
Eigen::MatrixXd synth_word_rows(std::size_t vocab, std::size_t dim, std::uint64_t seed);

/// Model rows drawn from a seeded Gaussian scaled by 1/sqrt(d). Throws on non-positive sizes or a
/// word block whose width differs from `dim`.
TokenHead init_head(std::size_t num_models, std::size_t dim, std::uint64_t seed, Eigen::MatrixXd word_rows);

/// Which logits enter the softmax normalizer during training. `full` uses the concatenated head
/// (word rows included); `model_only` is kept for ablations.
enum class Denominator { full, model_only };

struct LossGrad {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // |M| x d, gradient w.r.t. model_rows only
};

/// Negative log-probability of model token `target` given h, and its gradient over model rows:
/// row j = (p_j - [j == target]) h^T. Throws on an invalid target or non-finite logits.
LossGrad loss_and_grad(const TokenHead& head, const FeatureVector& h, std::size_t target,
                       Denominator denominator = Denominator::full);

enum class Optimizer { adamw, sgd };

struct TrainConfig {
    double learning_rate = 1e-2;
    double weight_decay = 0.01;  // decoupled for adamw, coupled L2 for sgd
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::adamw;
    Denominator denominator = Denominator::full;
    /// Worker threads for per-example gradients. Reduction always runs in example order, so the
    /// result is bit-identical for any thread count.
    std::size_t threads = 1;

    /// lr 4e-5, weight decay 1.0, 5 epochs, AdamW.
    static TrainConfig paper_preset();
    /// lr 1e-2, weight decay 0.01, 50 epochs, AdamW, batch 8.
    static TrainConfig toy_preset();
    static TrainConfig preset(std::string_view name);

    void validate() const;
};

struct TrainingExample {
    FeatureVector h;
    std::size_t target = 0;  // model token_index
};

struct TrainReport {
    std::vector<double> epoch_mean_loss;
    std::size_t steps = 0;
    std::optional<double> final_train_accuracy;
    std::optional<double> heldout_accuracy;
};

/// Trains model_rows in place. Deterministic for a given config (fixed shuffle and reduction
/// order). Throws TrainingDiverged if a loss turns non-finite.
TrainReport train(TokenHead& head, std::span<const TrainingExample> dataset, const TrainConfig& config,
                  std::span<const TrainingExample> heldout = {});

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

enum class SelectMode { constrained, unconstrained };
std::string_view to_string(SelectMode m);
SelectMode select_mode_from_string(std::string_view s);

struct Selection {
    std::optional<std::size_t> token_index;  // empty when a word token won in unconstrained mode
    std::string model_id;                    // filled by the caller from the registry
    bool no_model = false;
    std::vector<double> full_probs;         // |V| + |M|
    std::vector<double> model_block_probs;  // |M|, renormalized over the model block
    SelectMode mode = SelectMode::constrained;

    double block_prob() const { return token_index ? model_block_probs.at(*token_index) : 0.0; }
};

Selection select(const TokenHead& head, const FeatureVector& h, SelectMode mode = SelectMode::constrained);
/// Same decision from precomputed logits (first `vocab` entries are the word block). Ties go to
/// the lowest index.
Selection select_from_logits(const Eigen::VectorXd& logits, std::size_t vocab, SelectMode mode);

/// Fraction of examples whose constrained selection equals the target.
double selection_accuracy(const TokenHead& head, std::span<const TrainingExample> examples);

/// Binary checkpoint: magic, version, dimensions, word-row digest, then row-major float64 model rows.
std::string serialize_checkpoint(const TokenHead& head);
void save_checkpoint(const std::filesystem::path& path, const TokenHead& head);
/// Rebuilds the head around `word_rows`; throws if their digest differs from the stored one.
TokenHead deserialize_checkpoint(std::string_view bytes, Eigen::MatrixXd word_rows);
TokenHead load_checkpoint(const std::filesystem::path& path, Eigen::MatrixXd word_rows);

}  // namespace autot2i
