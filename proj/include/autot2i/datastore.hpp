// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "autot2i/args.hpp"

namespace autot2i {

enum class Role { user, assistant };
enum class InputKind { single, multimodal, history };
enum class Split { train, test };
enum class Setting { supervised, fewshot };

std::string_view to_string(Role r);
std::string_view to_string(InputKind k);
std::string_view to_string(Split s);
std::string_view to_string(Setting s);
Role role_from_string(std::string_view s);
InputKind input_kind_from_string(std::string_view s);
Split split_from_string(std::string_view s);
Setting setting_from_string(std::string_view s);

struct Turn {
    Role role = Role::user;
    std::string text;
    bool operator==(const Turn&) const = default;
};

/// A freestyle user request.
struct ChatInput {
    InputKind kind = InputKind::single;
    std::vector<Turn> turns;
    std::optional<std::string> image_ref;  // hex digest of the image bytes

    static ChatInput single(std::string text);
    static ChatInput multimodal(std::string text, std::string image_digest);
    static ChatInput history(std::vector<Turn> turns);

    /// Throws ValidationError when the kind/turns/image combination is inconsistent.
    void validate() const;
    const Turn& last_user_turn() const;

    bool operator==(const ChatInput&) const = default;
};

struct Demonstration {
    std::string demo_id;
    std::string model_id;
    std::string prompt;
    ArgumentSet args;
    std::map<std::string, std::int64_t> source_quality;  // downloads, upvotes, ...
    std::optional<std::string> image_ref;                // digest of the showcased image, if exported

    std::int64_t quality_sum() const;
    bool operator==(const Demonstration&) const = default;
};

struct ModelRecord {
    std::string model_id;
    std::string display_name;
    std::string description;
    std::string base_family;
    std::size_t token_index = 0;
    ArgumentSet default_args;
    std::vector<std::string> demo_ids;

    bool operator==(const ModelRecord&) const = default;
};

struct BenchmarkSample {
    std::string sample_id;
    ChatInput input;
    std::string gt_prompt;
    std::string gt_model_id;
    ArgumentSet gt_args;
    Split split = Split::train;
    Setting setting = Setting::supervised;

    bool operator==(const BenchmarkSample&) const = default;
};

// JSON mapping. Argument sets are validated against the canonical schema on the way in.
nlohmann::json to_json(const ChatInput& c);
ChatInput chat_input_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Demonstration& d);
Demonstration demonstration_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelRecord& m);
ModelRecord model_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchmarkSample& s);
BenchmarkSample benchmark_sample_from_json(const nlohmann::json& j);

/// Line-delimited records with a "#v1 <kind>" header. Blank lines are ignored; an empty file has
/// no records. Parse errors report the 1-based line number.
namespace jsonl {

inline constexpr std::string_view kVersionTag = "#v1";

std::vector<nlohmann::json> read(const std::filesystem::path& path);
/// Writes header + records to a temp file in the same directory, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view kind, const std::vector<nlohmann::json>& records);
/// Appends by rewriting atomically; writers to the same path are serialized in-process and
/// guarded by an exclusive lock file across processes.
void append_atomic(const std::filesystem::path& path, std::string_view kind, const std::vector<nlohmann::json>& records);

}  // namespace jsonl

/// Immutable after load; safe for concurrent reads.
class ModelRegistry {
public:
    ModelRegistry() = default;
    /// Validates uniqueness, the token_index bijection, demo resolution and argument schemas.
    ModelRegistry(std::vector<ModelRecord> models, std::vector<Demonstration> demos);

    std::size_t size() const { return models_.size(); }
    const std::vector<ModelRecord>& models() const { return models_; }  // ordered by token_index
    const ModelRecord* find(std::string_view model_id) const;
    const ModelRecord& at(std::string_view model_id) const;
    const ModelRecord& at_token(std::size_t token_index) const { return models_.at(token_index); }
    /// Exact id first, then case-insensitive display name.
    const ModelRecord* resolve_name(std::string_view name) const;

    const Demonstration* find_demo(std::string_view demo_id) const;
    const std::vector<Demonstration>& demos() const { return demos_; }
    /// Every demonstration listed for the model, in registry order.
    std::vector<const Demonstration*> demos_of(std::string_view model_id) const;

    /// Up to `limit` demonstrations ordered by quality sum descending, then demo_id ascending.
    std::vector<Demonstration> demos_for(std::string_view model_id, std::size_t limit) const;

private:
    std::vector<ModelRecord> models_;
    std::vector<Demonstration> demos_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> demo_by_id_;
};

ModelRegistry load_registry(const std::filesystem::path& registry_path, const std::filesystem::path& demos_path);
std::vector<Demonstration> load_demos(const std::filesystem::path& path);
void save_registry(const std::filesystem::path& registry_path, const std::filesystem::path& demos_path,
                   const ModelRegistry& registry);

/// Per-field mode of the demonstrations' arguments; ties (and empty input) fall back to the schema default.
ArgumentSet mode_default_args(const std::vector<const Demonstration*>& demos, const ArgumentSchema& schema);

struct ModelMeta {
    std::string model_id;
    std::string display_name;
    std::string description;
    std::string base_family;
};

/// Builds a registry from exported demonstrations: token indices follow `models` order, default
/// arguments are the per-field mode of each model's demonstrations.
ModelRegistry ingest(const std::vector<ModelMeta>& models, std::vector<Demonstration> demos);

std::vector<BenchmarkSample> load_benchmark(const std::filesystem::path& path);
/// Validates every sample before writing; returns the number of samples appended.
std::size_t append_samples(const std::filesystem::path& path, const std::vector<BenchmarkSample>& samples);
void write_benchmark(const std::filesystem::path& path, const std::vector<BenchmarkSample>& samples);

}  // namespace autot2i

namespace autot2i {

/// Cross-checks samples against a registry: every gt_model_id resolves and no sample_id appears in
/// both splits.
void validate_benchmark(const std::vector<BenchmarkSample>& samples, const ModelRegistry& registry);

}  // namespace autot2i
