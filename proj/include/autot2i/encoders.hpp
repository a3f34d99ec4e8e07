// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "autot2i/datastore.hpp"
#include "autot2i/http.hpp"

namespace autot2i {

/// Frozen feature vector h; unit L2 norm when produced by an Encoder.
using FeatureVector = Eigen::VectorXd;

/// Stands in for the frozen trunk: maps (chat input, prompt) to the last hidden state h.
class Encoder {
public:
    virtual ~Encoder() = default;

    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual bool deterministic() const = 0;

    /// History turns are flattened in order with role markers; the prompt may be empty.
    virtual FeatureVector encode(const ChatInput& input, std::string_view prompt) const = 0;
    /// Plain text, no role markers (used for prompt-to-prompt similarity).
    virtual FeatureVector encode_text(std::string_view text) const = 0;
};

/// Serializes an input + prompt the way remote embedders receive it:
/// "USER: ..." / "ASSISTANT: ..." lines, "[image:<digest>]", then "PROMPT: ...".
std::string flatten_for_encoding(const ChatInput& input, std::string_view prompt);

struct ToyEncoderConfig {
    std::size_t dim = 64;
    std::uint64_t seed = 1234;
    std::size_t buckets = 4096;
};

/// Hashed unigram+bigram counts (64-bit FNV-1a mod `buckets`) projected through a fixed seeded
/// Gaussian d x buckets matrix, then L2-normalized. A pure function of (text, image digest, seed, d).
class ToyEncoder final : public Encoder {
public:
    explicit ToyEncoder(ToyEncoderConfig config = {});

    std::string id() const override;
    std::size_t dimension() const override { return config_.dim; }
    bool deterministic() const override { return true; }

    FeatureVector encode(const ChatInput& input, std::string_view prompt) const override;
    FeatureVector encode_text(std::string_view text) const override;

    /// Bucket index of a unigram or bigram feature (bigrams are "a b").
    std::size_t bucket_of(std::string_view feature) const;
    const ToyEncoderConfig& config() const { return config_; }

private:
    FeatureVector project(const std::vector<std::string>& stream, std::size_t content_tokens) const;

    ToyEncoderConfig config_;
    Eigen::MatrixXd projection_;  // dim x buckets
};

struct RemoteEncoderConfig {
    std::string url;  // base URL; requests go to <url>/embed
    std::size_t dim = 0;
    std::string model;
    HttpOptions http;
};

/// Remote embedding service: POST {"model", "input": [strings]} -> {"embeddings": [[...], ...]}.
/// Responses are checked against the configured dimension and L2-normalized.
class RemoteEncoder final : public Encoder {
public:
    explicit RemoteEncoder(RemoteEncoderConfig config);

    std::string id() const override { return "remote:" + config_.url + (config_.model.empty() ? "" : "#" + config_.model); }
    std::size_t dimension() const override { return config_.dim; }
    bool deterministic() const override { return false; }

    FeatureVector encode(const ChatInput& input, std::string_view prompt) const override;
    FeatureVector encode_text(std::string_view text) const override;
    std::vector<FeatureVector> embed(const std::vector<std::string>& texts) const;

private:
    RemoteEncoderConfig config_;
    std::unique_ptr<HttpClient> client_;
};

double cosine(const FeatureVector& a, const FeatureVector& b);

}  // namespace autot2i
