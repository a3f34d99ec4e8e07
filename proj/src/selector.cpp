// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/selector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "autot2i/digest.hpp"

namespace autot2i {

namespace {

constexpr char kMagic[8] = {'A', 'T', '2', 'I', 'H', 'E', 'A', 'D'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
    if (in.size() < sizeof(T)) throw ParseError("truncated checkpoint");
    T v;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return v;
}

std::string row_major_bytes(const Eigen::MatrixXd& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * sizeof(double));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
    return out;
}

double log_sum_exp(const Eigen::VectorXd& z) {
    const double mx = z.maxCoeff();
    return mx + std::log((z.array() - mx).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    const double mx = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - mx).exp();
    return e / e.sum();
}

}  // namespace

Eigen::VectorXd TokenHead::logits(const FeatureVector& h) const {
    if (static_cast<std::size_t>(h.size()) != dim())
        throw ValidationError("h", "feature dimension " + std::to_string(h.size()) + " does not match head dimension " +
                                       std::to_string(dim()));
    Eigen::VectorXd z(word_rows.rows() + model_rows.rows());
    z.head(word_rows.rows()).noalias() = word_rows * h;
    z.tail(model_rows.rows()).noalias() = model_rows * h;
    return z;
}

std::string TokenHead::word_rows_digest() const { return sha256_hex(row_major_bytes(word_rows)); }

Eigen::MatrixXd synth_word_rows(std::size_t vocab, std::size_t dim, std::uint64_t seed) {
    if (vocab == 0 || dim == 0) throw ValidationError("word_rows", "vocabulary size and dimension must be > 0");
    Eigen::MatrixXd w(static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = gauss(rng);
    return w;
}

TokenHead init_head(std::size_t num_models, std::size_t dim, std::uint64_t seed, Eigen::MatrixXd word_rows) {
    if (num_models == 0) throw ValidationError("num_models", "must be > 0");
    if (dim == 0) throw ValidationError("dim", "must be > 0");
    if (word_rows.rows() == 0) throw ValidationError("word_rows", "vocabulary block must be non-empty");
    if (static_cast<std::size_t>(word_rows.cols()) != dim)
        throw ValidationError("word_rows", "width " + std::to_string(word_rows.cols()) + " does not match d = " + std::to_string(dim));
    TokenHead head;
    head.word_rows = std::move(word_rows);
    head.model_rows.resize(static_cast<Eigen::Index>(num_models), static_cast<Eigen::Index>(dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index r = 0; r < head.model_rows.rows(); ++r)
        for (Eigen::Index c = 0; c < head.model_rows.cols(); ++c) head.model_rows(r, c) = gauss(rng) * scale;
    return head;
}

// ---------------------------------------------------------------------------

namespace {

// Model-block probabilities under the chosen normalizer, plus the loss for `target`.
double model_probs(const TokenHead& head, const FeatureVector& h, std::size_t target, Denominator denom,
                   Eigen::VectorXd& p_model) {
    Eigen::VectorXd z = head.logits(h);
    if (!z.allFinite()) throw Error("non-finite logits");
    const auto v = static_cast<Eigen::Index>(head.vocab_size());
    const auto m = static_cast<Eigen::Index>(head.num_models());
    const double lse = denom == Denominator::full ? log_sum_exp(z) : log_sum_exp(z.tail(m));
    p_model = (z.tail(m).array() - lse).exp();
    return lse - z[v + static_cast<Eigen::Index>(target)];
}

}  // namespace

LossGrad loss_and_grad(const TokenHead& head, const FeatureVector& h, std::size_t target, Denominator denominator) {
    if (target >= head.num_models())
        throw ValidationError("target", "token index " + std::to_string(target) + " outside model block of size " +
                                            std::to_string(head.num_models()));
    if (!h.allFinite()) throw ValidationError("h", "feature vector has non-finite entries");
    Eigen::VectorXd p;
    LossGrad out;
    out.loss = model_probs(head, h, target, denominator, p);
    p[static_cast<Eigen::Index>(target)] -= 1.0;
    out.grad.noalias() = p * h.transpose();
    return out;
}

// ---------------------------------------------------------------------------

TrainConfig TrainConfig::paper_preset() {
    TrainConfig c;
    c.learning_rate = 4e-5;
    c.weight_decay = 1.0;
    c.epochs = 5;
    c.optimizer = Optimizer::adamw;
    return c;
}

TrainConfig TrainConfig::toy_preset() {
    TrainConfig c;
    c.learning_rate = 1e-2;
    c.weight_decay = 0.01;
    c.epochs = 50;
    c.batch_size = 8;
    c.optimizer = Optimizer::adamw;
    return c;
}

TrainConfig TrainConfig::preset(std::string_view name) {
    if (name == "paper") return paper_preset();
    if (name == "toy") return toy_preset();
    throw ValidationError("preset", "unknown preset '" + std::string(name) + "' (expected paper or toy)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate", "must be > 0");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay", "must be >= 0");
    if (batch_size == 0) throw ValidationError("batch_size", "must be >= 1");
    if (threads == 0) throw ValidationError("threads", "must be >= 1");
}

namespace {

struct AdamState {
    Eigen::MatrixXd m, v;
    std::size_t t = 0;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

// Per-example losses and gradients for one minibatch; slots are filled in parallel and reduced in
// example order by the caller.
void batch_gradients(const TokenHead& head, std::span<const TrainingExample> data, std::span<const std::size_t> idx,
                     Denominator denom, std::size_t threads, std::vector<LossGrad>& out) {
    out.resize(idx.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& ex = data[idx[i]];
            out[i] = loss_and_grad(head, ex.h, ex.target, denom);
        }
    };
    if (threads <= 1 || idx.size() < 2) {
        work(0, idx.size());
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (idx.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk, e = std::min(idx.size(), b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, b, e, t] {
            try {
                work(b, e);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

TrainReport train(TokenHead& head, std::span<const TrainingExample> dataset, const TrainConfig& config,
                  std::span<const TrainingExample> heldout) {
    config.validate();
    TrainReport report;
    if (config.epochs == 0) return report;
    if (dataset.empty()) throw ValidationError("dataset", "training set is empty");
    for (const auto& ex : dataset) {
        if (ex.target >= head.num_models())
            throw ValidationError("target", "token index " + std::to_string(ex.target) + " outside model block");
        if (static_cast<std::size_t>(ex.h.size()) != head.dim())
            throw ValidationError("h", "feature dimension does not match head");
    }

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    AdamState adam{Eigen::MatrixXd::Zero(head.model_rows.rows(), head.model_rows.cols()),
                   Eigen::MatrixXd::Zero(head.model_rows.rows(), head.model_rows.cols()), 0};
    std::vector<LossGrad> per_example;
    Eigen::MatrixXd grad(head.model_rows.rows(), head.model_rows.cols());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - start);
            batch_gradients(head, dataset, std::span(order).subspan(start, n), config.denominator, config.threads, per_example);
            grad.setZero();
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(per_example[i].loss))
                    throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                                           std::to_string(report.steps + 1));
                loss_sum += per_example[i].loss;
                grad += per_example[i].grad;
            }
            grad /= static_cast<double>(n);

            if (config.optimizer == Optimizer::adamw) {
                ++adam.t;
                adam.m = kBeta1 * adam.m + (1.0 - kBeta1) * grad;
                adam.v = kBeta2 * adam.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
                const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
                const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
                head.model_rows.array() -= config.learning_rate * config.weight_decay * head.model_rows.array();
                head.model_rows.array() -= config.learning_rate * (adam.m.array() / c1) / ((adam.v.array() / c2).sqrt() + kEps);
            } else {
                head.model_rows -= config.learning_rate * (grad + config.weight_decay * head.model_rows);
            }
            if (!head.model_rows.allFinite())
                throw TrainingDiverged("model rows became non-finite at epoch " + std::to_string(epoch + 1));
            ++report.steps;
        }
        report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(order.size()));
    }
    report.final_train_accuracy = selection_accuracy(head, dataset);
    if (!heldout.empty()) report.heldout_accuracy = selection_accuracy(head, heldout);
    return report;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SelectMode m) { return m == SelectMode::constrained ? "constrained" : "unconstrained"; }

SelectMode select_mode_from_string(std::string_view s) {
    if (s == "constrained") return SelectMode::constrained;
    if (s == "unconstrained") return SelectMode::unconstrained;
    throw ValidationError("mode", "unknown selection mode '" + std::string(s) + "'");
}

Selection select_from_logits(const Eigen::VectorXd& z, std::size_t vocab, SelectMode mode) {
    if (!z.allFinite()) throw Error("non-finite logits");
    const auto v = static_cast<Eigen::Index>(vocab);
    const auto m = z.size() - v;
    if (m <= 0) throw ValidationError("logits", "no model block");
    Selection s;
    s.mode = mode;
    Eigen::VectorXd full = softmax(z);
    Eigen::VectorXd block = softmax(z.tail(m));
    s.full_probs.assign(full.data(), full.data() + full.size());
    s.model_block_probs.assign(block.data(), block.data() + block.size());

    Eigen::Index best_model = 0;
    for (Eigen::Index j = 1; j < m; ++j)
        if (z[v + j] > z[v + best_model]) best_model = j;

    if (mode == SelectMode::unconstrained) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < z.size(); ++i)
            if (z[i] > z[best]) best = i;
        if (best < v) {
            s.no_model = true;
            return s;
        }
    }
    s.token_index = static_cast<std::size_t>(best_model);
    return s;
}

Selection select(const TokenHead& head, const FeatureVector& h, SelectMode mode) {
    return select_from_logits(head.logits(h), head.vocab_size(), mode);
}

double selection_accuracy(const TokenHead& head, std::span<const TrainingExample> examples) {
    if (examples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& ex : examples) {
        auto s = select(head, ex.h, SelectMode::constrained);
        hits += (s.token_index && *s.token_index == ex.target) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------

std::string serialize_checkpoint(const TokenHead& head) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, head.num_models());
    put<std::uint64_t>(out, head.dim());
    put<std::uint64_t>(out, head.vocab_size());
    out += head.word_rows_digest();
    out += row_major_bytes(head.model_rows);
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const TokenHead& head) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write checkpoint " + tmp.string());
        auto bytes = serialize_checkpoint(head);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TokenHead deserialize_checkpoint(std::string_view in, Eigen::MatrixXd word_rows) {
    if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
        throw ParseError("not a token-head checkpoint");
    in.remove_prefix(sizeof(kMagic));
    if (auto ver = take<std::uint32_t>(in); ver != kCheckpointVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(ver));
    const auto models = take<std::uint64_t>(in);
    const auto dim = take<std::uint64_t>(in);
    const auto vocab = take<std::uint64_t>(in);
    if (in.size() < 64) throw ParseError("truncated checkpoint");
    const std::string digest(in.substr(0, 64));
    in.remove_prefix(64);

    if (static_cast<std::uint64_t>(word_rows.rows()) != vocab || static_cast<std::uint64_t>(word_rows.cols()) != dim)
        throw ValidationError("word_rows", "frozen vocabulary shape differs from checkpoint (" + std::to_string(vocab) + "x" +
                                               std::to_string(dim) + ")");
    TokenHead head;
    head.word_rows = std::move(word_rows);
    if (head.word_rows_digest() != digest)
        throw ValidationError("word_rows", "frozen vocabulary digest differs from checkpoint; the base has drifted");
    if (in.size() != models * dim * sizeof(double)) throw ParseError("checkpoint payload size mismatch");
    head.model_rows.resize(static_cast<Eigen::Index>(models), static_cast<Eigen::Index>(dim));
    for (Eigen::Index r = 0; r < head.model_rows.rows(); ++r)
        for (Eigen::Index c = 0; c < head.model_rows.cols(); ++c) head.model_rows(r, c) = take<double>(in);
    if (!head.model_rows.allFinite()) throw ParseError("checkpoint contains non-finite weights");
    return head;
}

TokenHead load_checkpoint(const std::filesystem::path& path, Eigen::MatrixXd word_rows) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str(), std::move(word_rows));
}

}  // namespace autot2i
