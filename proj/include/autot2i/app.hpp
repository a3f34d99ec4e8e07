// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "autot2i/config.hpp"
#include "autot2i/pipeline.hpp"

namespace autot2i {

std::shared_ptr<Encoder> make_encoder(const AppConfig& config);
/// Remote chat backend for kind "llm"; nullptr for local kinds.
std::shared_ptr<LlmBackend> make_llm(const AppConfig& config, std::string_view prefix);
std::shared_ptr<Renderer> make_renderer(const AppConfig& config);
TrainConfig train_config_from(const AppConfig& config);
Eigen::MatrixXd word_rows_from(const AppConfig& config, std::size_t dim);
/// Schema defaults overlaid with the configured baseline.args, if any.
ArgumentSet fixed_args_from(const AppConfig& config);

struct Runtime {
    std::shared_ptr<const ModelRegistry> registry;
    std::shared_ptr<Encoder> encoder;
    std::shared_ptr<const TokenHead> head;
    std::shared_ptr<JobManager> jobs;
    std::shared_ptr<TraceStore> traces;
    std::shared_ptr<Pipeline> pipeline;
};

Runtime build_runtime(const AppConfig& config, const std::filesystem::path& traces_path,
                      const std::filesystem::path& images_dir);

/// Entry point of the command-line tool. Writes JSON lines to `out`; returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace autot2i
