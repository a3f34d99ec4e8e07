// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/encoders.hpp"

#include <cmath>
#include <random>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

namespace {

// Markers start with a control byte so no tokenized word can equal them.
constexpr char kMarker = '\x1f';

FeatureVector normalized(FeatureVector v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw Error("encoder produced a zero or non-finite vector");
    return v / n;
}

}  // namespace

std::string flatten_for_encoding(const ChatInput& input, std::string_view prompt) {
    std::string out;
    for (const auto& t : input.turns) {
        out += t.role == Role::user ? "USER: " : "ASSISTANT: ";
        out += t.text;
        out += '\n';
    }
    if (input.image_ref) out += "[image:" + *input.image_ref + "]\n";
    out += "PROMPT: ";
    out += prompt;
    return out;
}

double cosine(const FeatureVector& a, const FeatureVector& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------

ToyEncoder::ToyEncoder(ToyEncoderConfig config) : config_(config) {
    if (config_.dim == 0) throw ValidationError("dim", "encoder dimension must be > 0");
    if (config_.buckets == 0) throw ValidationError("buckets", "bucket count must be > 0");
    projection_.resize(static_cast<Eigen::Index>(config_.dim), static_cast<Eigen::Index>(config_.buckets));
    std::mt19937_64 rng(config_.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // Column-major fill: column b is the embedding of bucket b.
    for (Eigen::Index c = 0; c < projection_.cols(); ++c)
        for (Eigen::Index r = 0; r < projection_.rows(); ++r) projection_(r, c) = gauss(rng);
}

std::string ToyEncoder::id() const {
    return "toy-fnv-v1:d=" + std::to_string(config_.dim) + ":seed=" + std::to_string(config_.seed) +
           ":buckets=" + std::to_string(config_.buckets);
}

std::size_t ToyEncoder::bucket_of(std::string_view feature) const { return fnv1a64(feature) % config_.buckets; }

FeatureVector ToyEncoder::project(const std::vector<std::string>& stream, std::size_t content_tokens) const {
    if (content_tokens == 0) throw ValidationError("input", "empty input");
    std::vector<double> counts(config_.buckets, 0.0);
    for (std::size_t i = 0; i < stream.size(); ++i) {
        counts[bucket_of(stream[i])] += 1.0;
        if (i + 1 < stream.size()) counts[bucket_of(stream[i] + " " + stream[i + 1])] += 1.0;
    }
    FeatureVector h = FeatureVector::Zero(static_cast<Eigen::Index>(config_.dim));
    for (std::size_t b = 0; b < counts.size(); ++b)
        if (counts[b] != 0.0) h.noalias() += counts[b] * projection_.col(static_cast<Eigen::Index>(b));
    return normalized(std::move(h));
}

FeatureVector ToyEncoder::encode(const ChatInput& input, std::string_view prompt) const {
    std::vector<std::string> stream;
    std::size_t content = 0;
    auto push_text = [&](std::string_view s) {
        for (auto& tok : text::word_tokens(s)) {
            stream.push_back(std::move(tok));
            ++content;
        }
    };
    for (const auto& t : input.turns) {
        stream.push_back(std::string(1, kMarker) + std::string(to_string(t.role)));
        push_text(t.text);
    }
    if (input.image_ref) stream.push_back(std::string(1, kMarker) + "image:" + *input.image_ref);
    stream.push_back(std::string(1, kMarker) + "prompt");
    push_text(prompt);
    return project(stream, content);
}

FeatureVector ToyEncoder::encode_text(std::string_view s) const {
    auto stream = text::word_tokens(s);
    return project(stream, stream.size());
}

// ---------------------------------------------------------------------------

RemoteEncoder::RemoteEncoder(RemoteEncoderConfig config)
    : config_(std::move(config)), client_(std::make_unique<HttpClient>(config_.url, config_.http)) {
    if (config_.dim == 0) throw ValidationError("dim", "remote encoder dimension must be > 0");
}

std::vector<FeatureVector> RemoteEncoder::embed(const std::vector<std::string>& texts) const {
    nlohmann::json body = {{"input", texts}};
    if (!config_.model.empty()) body["model"] = config_.model;
    auto resp = client_->post_json("/embed", body);
    if (!resp.contains("embeddings") || !resp["embeddings"].is_array())
        throw BackendError("embedding response missing 'embeddings'");
    const auto& rows = resp["embeddings"];
    if (rows.size() != texts.size())
        throw BackendError("embedding response has " + std::to_string(rows.size()) + " vectors for " +
                           std::to_string(texts.size()) + " inputs");
    std::vector<FeatureVector> out;
    for (const auto& row : rows) {
        if (!row.is_array() || row.size() != config_.dim)
            throw BackendError("embedding dimension mismatch: expected " + std::to_string(config_.dim) + ", got " +
                               std::to_string(row.is_array() ? row.size() : 0));
        FeatureVector v(static_cast<Eigen::Index>(config_.dim));
        for (std::size_t i = 0; i < config_.dim; ++i) {
            if (!row[i].is_number()) throw BackendError("embedding contains a non-numeric entry");
            v[static_cast<Eigen::Index>(i)] = row[i].get<double>();
        }
        if (!v.allFinite()) throw BackendError("embedding contains non-finite entries");
        out.push_back(normalized(std::move(v)));
    }
    return out;
}

FeatureVector RemoteEncoder::encode(const ChatInput& input, std::string_view prompt) const {
    bool any = false;
    for (const auto& t : input.turns) any = any || !text::trim(t.text).empty();
    if (!any && text::trim(prompt).empty()) throw ValidationError("input", "empty input");
    return embed({flatten_for_encoding(input, prompt)}).at(0);
}

FeatureVector RemoteEncoder::encode_text(std::string_view s) const {
    if (text::trim(s).empty()) throw ValidationError("input", "empty input");
    return embed({std::string(s)}).at(0);
}

}  // namespace autot2i
