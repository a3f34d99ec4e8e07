// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/render.hpp"

#include <zlib.h>

#include <random>
#include <thread>
#include <vector>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"

namespace autot2i {

std::string render_key(const RenderRequest& req) {
    std::string material = req.model_id;
    material += '\n';
    material += req.prompt;
    material += '\n';
    material += ArgumentSchema::canonical().canonical_serialization(req.args);
    return sha256_hex(material);
}

namespace {

void put_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

void put_chunk(std::string& out, const char type[4], const std::string& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::string encode_png(std::uint32_t width, std::uint32_t height, std::span<const std::uint8_t> rgb) {
    if (width == 0 || height == 0) throw ValidationError("image", "empty image");
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    if (rgb.size() != stride * height) throw ValidationError("image", "pixel buffer size mismatch");

    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * height);
    for (std::uint32_t y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), rgb.begin() + static_cast<std::ptrdiff_t>(y * stride),
                   rgb.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::string z(zlen, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, raw.data(), static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK)
        throw Error("zlib compression failed");
    z.resize(zlen);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_be32(ihdr, width);
    put_be32(ihdr, height);
    ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit, truecolor, deflate, filter 0, no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", z);
    put_chunk(out, "IEND", {});
    return out;
}

std::string MockRenderer::render(const RenderRequest& req) {
    const auto& schema = ArgumentSchema::canonical();
    schema.validate(req.args);
    const auto w = static_cast<std::uint32_t>(std::get<std::int64_t>(req.args.at("width")));
    const auto h = static_cast<std::uint32_t>(std::get<std::int64_t>(req.args.at("height")));
    const auto key = sha256(render_key(req));
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed = (seed << 8) | key[static_cast<std::size_t>(i)];
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
    std::size_t i = 0;
    while (i < px.size()) {
        auto v = rng();
        for (int b = 0; b < 8 && i < px.size(); ++b, ++i) px[i] = static_cast<std::uint8_t>(v >> (8 * b));
    }
    return encode_png(w, h, px);
}

RemoteRenderer::RemoteRenderer(RemoteRendererConfig config)
    : config_(std::move(config)), client_(std::make_unique<HttpClient>(config_.url, config_.http)) {}

std::string RemoteRenderer::render(const RenderRequest& req) {
    nlohmann::json body = {{"model_id", req.model_id},
                           {"prompt", req.prompt},
                           {"args", ArgumentSchema::canonical().to_json(req.args)}};
    auto resp = client_->post_json("/v1/generate", body);
    if (!resp.contains("job_id") || !resp["job_id"].is_string()) throw BackendError("renderer response missing job_id");
    const auto job_id = resp["job_id"].get<std::string>();
    const auto deadline = std::chrono::steady_clock::now() + config_.job_timeout;
    for (;;) {
        auto r = client_->get("/v1/jobs/" + job_id);
        if (r.status == 200 && r.content_type.rfind("image/", 0) == 0) return r.body;
        if (r.status != 200) throw BackendError("renderer job " + job_id + " returned HTTP " + std::to_string(r.status));
        nlohmann::json st;
        try {
            st = nlohmann::json::parse(r.body);
        } catch (const nlohmann::json::exception&) {
            throw BackendError("renderer job " + job_id + " returned an unreadable status");
        }
        const auto status = st.value("status", "");
        if (status == "failed") throw BackendError("renderer job " + job_id + " failed: " + st.value("reason", "unknown"));
        if (std::chrono::steady_clock::now() >= deadline) throw BackendError("renderer job " + job_id + " timed out");
        std::this_thread::sleep_for(config_.poll_interval);
    }
}

}  // namespace autot2i
