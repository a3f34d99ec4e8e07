// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "autot2i/args.hpp"
#include "autot2i/http.hpp"

namespace autot2i {

struct RenderRequest {
    std::string model_id;
    std::string prompt;
    ArgumentSet args;
};

/// Digest that keys a render: sha256 over model id, prompt and the canonical argument block.
std::string render_key(const RenderRequest& req);

/// 8-bit RGB PNG (zlib-compressed IDAT, filter 0 on every row).
std::string encode_png(std::uint32_t width, std::uint32_t height, std::span<const std::uint8_t> rgb);

/// Text-to-image backend. `render` returns encoded image bytes (PNG) or throws BackendError.
class Renderer {
public:
    virtual ~Renderer() = default;
    virtual std::string id() const = 0;
    virtual std::string render(const RenderRequest& req) = 0;
};

/// Deterministic placeholder: width x height pixels from a PRNG seeded by render_key(req).
class MockRenderer final : public Renderer {
public:
    std::string id() const override { return "mock-renderer"; }
    std::string render(const RenderRequest& req) override;
};

struct RemoteRendererConfig {
    std::string url;
    std::chrono::milliseconds poll_interval{500};
    std::chrono::milliseconds job_timeout{300000};
    HttpOptions http;
};

/// POST <url>/v1/generate {model_id, prompt, args} -> {"job_id"}; then polls GET <url>/v1/jobs/<id>,
/// which answers image bytes (image/*) when done or JSON {"status", "reason"?} otherwise.
class RemoteRenderer final : public Renderer {
public:
    explicit RemoteRenderer(RemoteRendererConfig config);
    std::string id() const override { return "remote-renderer:" + config_.url; }
    std::string render(const RenderRequest& req) override;

private:
    RemoteRendererConfig config_;
    std::unique_ptr<HttpClient> client_;
};

}  // namespace autot2i
