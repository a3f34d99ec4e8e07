// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/datastore.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Role r) { return r == Role::user ? "user" : "assistant"; }

std::string_view to_string(InputKind k) {
    switch (k) {
        case InputKind::single: return "single";
        case InputKind::multimodal: return "multimodal";
        case InputKind::history: return "history";
    }
    return "single";
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string_view to_string(Setting s) { return s == Setting::supervised ? "supervised" : "fewshot"; }

Role role_from_string(std::string_view s) {
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw ValidationError("role", "unknown role '" + std::string(s) + "'");
}

InputKind input_kind_from_string(std::string_view s) {
    if (s == "single") return InputKind::single;
    if (s == "multimodal") return InputKind::multimodal;
    if (s == "history") return InputKind::history;
    throw ValidationError("kind", "unknown input kind '" + std::string(s) + "'");
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ValidationError("split", "unknown split '" + std::string(s) + "'");
}

Setting setting_from_string(std::string_view s) {
    if (s == "supervised") return Setting::supervised;
    if (s == "fewshot") return Setting::fewshot;
    throw ValidationError("setting", "unknown setting '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// ChatInput

ChatInput ChatInput::single(std::string text) { return {InputKind::single, {{Role::user, std::move(text)}}, std::nullopt}; }

ChatInput ChatInput::multimodal(std::string text, std::string image_digest) {
    return {InputKind::multimodal, {{Role::user, std::move(text)}}, std::move(image_digest)};
}

ChatInput ChatInput::history(std::vector<Turn> turns) { return {InputKind::history, std::move(turns), std::nullopt}; }

void ChatInput::validate() const {
    switch (kind) {
        case InputKind::single:
            if (turns.size() != 1 || turns[0].role != Role::user)
                throw ValidationError("turns", "single input needs exactly one user turn");
            if (image_ref) throw ValidationError("image_ref", "single input cannot carry an image");
            break;
        case InputKind::multimodal:
            if (turns.size() != 1 || turns[0].role != Role::user)
                throw ValidationError("turns", "multimodal input needs exactly one user turn");
            if (!image_ref || image_ref->empty()) throw ValidationError("image_ref", "multimodal input needs an image");
            break;
        case InputKind::history:
            if (turns.size() < 2) throw ValidationError("turns", "history input needs at least two turns");
            if (turns.back().role != Role::user) throw ValidationError("turns", "history input must end with a user turn");
            break;
    }
}

const Turn& ChatInput::last_user_turn() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it)
        if (it->role == Role::user) return *it;
    throw ValidationError("turns", "no user turn");
}

std::int64_t Demonstration::quality_sum() const {
    std::int64_t s = 0;
    for (const auto& [_, v] : source_quality) s += v;
    return s;
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace {

template <typename T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(key, "missing field");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(key, "wrong type");
    }
}

std::string non_empty(const json& j, const char* key) {
    auto s = field<std::string>(j, key);
    if (s.empty()) throw ValidationError(key, "must be non-empty");
    return s;
}

}  // namespace

json to_json(const ChatInput& c) {
    json turns = json::array();
    for (const auto& t : c.turns) turns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
    json j = {{"kind", to_string(c.kind)}, {"turns", std::move(turns)}};
    if (c.image_ref) j["image_ref"] = *c.image_ref;
    return j;
}

ChatInput chat_input_from_json(const json& j) {
    ChatInput c;
    c.kind = input_kind_from_string(field<std::string>(j, "kind"));
    const auto& turns = j.contains("turns") ? j.at("turns") : json();
    if (!turns.is_array()) throw ValidationError("turns", "expected an array");
    for (const auto& t : turns) c.turns.push_back({role_from_string(field<std::string>(t, "role")), field<std::string>(t, "text")});
    if (j.contains("image_ref") && !j.at("image_ref").is_null()) c.image_ref = field<std::string>(j, "image_ref");
    c.validate();
    return c;
}

json to_json(const Demonstration& d) {
    json j = {{"demo_id", d.demo_id},
              {"model_id", d.model_id},
              {"prompt", d.prompt},
              {"args", ArgumentSchema::canonical().to_json(d.args)},
              {"source_quality", d.source_quality}};
    if (d.image_ref) j["image_ref"] = *d.image_ref;
    return j;
}

Demonstration demonstration_from_json(const json& j) {
    Demonstration d;
    d.demo_id = non_empty(j, "demo_id");
    d.model_id = non_empty(j, "model_id");
    d.prompt = field<std::string>(j, "prompt");
    if (text::trim(d.prompt).empty()) throw ValidationError("prompt", "must be non-empty");
    d.args = ArgumentSchema::canonical().args_from_json(j.contains("args") ? j.at("args") : json());
    if (j.contains("source_quality")) {
        d.source_quality = field<std::map<std::string, std::int64_t>>(j, "source_quality");
        for (const auto& [k, v] : d.source_quality)
            if (v < 0) throw ValidationError("source_quality." + k, "counter must be >= 0");
    }
    if (j.contains("image_ref") && !j.at("image_ref").is_null()) d.image_ref = field<std::string>(j, "image_ref");
    return d;
}

json to_json(const ModelRecord& m) {
    return {{"model_id", m.model_id},
            {"display_name", m.display_name},
            {"description", m.description},
            {"base_family", m.base_family},
            {"token_index", m.token_index},
            {"default_args", ArgumentSchema::canonical().to_json(m.default_args)},
            {"demo_ids", m.demo_ids}};
}

ModelRecord model_record_from_json(const json& j) {
    ModelRecord m;
    m.model_id = non_empty(j, "model_id");
    m.display_name = j.value("display_name", m.model_id);
    m.description = j.value("description", "");
    m.base_family = j.value("base_family", "");
    auto idx = field<std::int64_t>(j, "token_index");
    if (idx < 0) throw ValidationError("token_index", "must be >= 0");
    m.token_index = static_cast<std::size_t>(idx);
    m.default_args = ArgumentSchema::canonical().args_from_json(j.contains("default_args") ? j.at("default_args") : json());
    if (j.contains("demo_ids")) m.demo_ids = field<std::vector<std::string>>(j, "demo_ids");
    return m;
}

json to_json(const BenchmarkSample& s) {
    return {{"sample_id", s.sample_id},
            {"input", to_json(s.input)},
            {"gt_prompt", s.gt_prompt},
            {"gt_model_id", s.gt_model_id},
            {"gt_args", ArgumentSchema::canonical().to_json(s.gt_args)},
            {"split", to_string(s.split)},
            {"setting", to_string(s.setting)}};
}

BenchmarkSample benchmark_sample_from_json(const json& j) {
    BenchmarkSample s;
    s.sample_id = non_empty(j, "sample_id");
    if (!j.contains("input")) throw ValidationError("input", "missing field");
    s.input = chat_input_from_json(j.at("input"));
    s.gt_prompt = field<std::string>(j, "gt_prompt");
    s.gt_model_id = non_empty(j, "gt_model_id");
    s.gt_args = ArgumentSchema::canonical().args_from_json(j.contains("gt_args") ? j.at("gt_args") : json());
    s.split = split_from_string(field<std::string>(j, "split"));
    s.setting = setting_from_string(field<std::string>(j, "setting"));
    return s;
}

// ---------------------------------------------------------------------------
// JSONL files

namespace jsonl {

std::vector<json> read(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        if (!header_seen) {
            if (line.rfind(kVersionTag, 0) != 0) throw ParseError("missing \"#v1\" version header", lineno);
            header_seen = true;
            continue;
        }
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
        }
    }
    return out;
}

namespace {

std::mutex& path_mutex(const fs::path& path) {
    static std::mutex registry_mu;
    static std::map<std::string, std::unique_ptr<std::mutex>> mutexes;
    std::lock_guard lock(registry_mu);
    auto key = fs::absolute(path).lexically_normal().string();
    auto& slot = mutexes[key];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

class FileLock {
public:
    explicit FileLock(const fs::path& path) {
        auto lock_path = path.string() + ".lock";
        fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (fd_ >= 0) ::flock(fd_, LOCK_EX);
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

void write_unlocked(const fs::path& path, std::string_view kind, std::string_view existing_body,
                    const std::vector<json>& records) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp-" + random_id().substr(0, 12);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << kVersionTag << ' ' << kind << '\n';
        out << existing_body;
        for (const auto& r : records) out << r.dump() << '\n';
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

void write_atomic(const fs::path& path, std::string_view kind, const std::vector<json>& records) {
    std::lock_guard lock(path_mutex(path));
    FileLock flock(path);
    write_unlocked(path, kind, {}, records);
}

void append_atomic(const fs::path& path, std::string_view kind, const std::vector<json>& records) {
    std::lock_guard lock(path_mutex(path));
    FileLock flock(path);
    std::string body;
    if (fs::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::string line;
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (!header_seen) {
                if (text::trim(line).empty()) continue;
                if (line.rfind(kVersionTag, 0) != 0) throw ParseError("missing \"#v1\" version header in " + path.string(), 1);
                header_seen = true;
                continue;
            }
            body += line;
            body += '\n';
        }
    }
    write_unlocked(path, kind, body, records);
}

}  // namespace jsonl

// ---------------------------------------------------------------------------
// Registry

ModelRegistry::ModelRegistry(std::vector<ModelRecord> models, std::vector<Demonstration> demos)
    : demos_(std::move(demos)) {
    const auto& schema = ArgumentSchema::canonical();
    for (std::size_t i = 0; i < demos_.size(); ++i) {
        if (!demo_by_id_.emplace(demos_[i].demo_id, i).second)
            throw ValidationError("demo_id", "duplicate demonstration id '" + demos_[i].demo_id + "'");
        schema.validate(demos_[i].args);
    }

    std::vector<std::size_t> indices;
    for (const auto& m : models) {
        if (m.model_id.empty()) throw ValidationError("model_id", "must be non-empty");
        if (!by_id_.emplace(m.model_id, 0).second)
            throw ValidationError("model_id", "duplicate model id '" + m.model_id + "'");
        indices.push_back(m.token_index);
        schema.validate(m.default_args);
    }
    std::sort(indices.begin(), indices.end());
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (indices[i] != i)
            throw ValidationError("token_index", "token indices are not a bijection onto 0.." + std::to_string(models.size() - 1));

    std::sort(models.begin(), models.end(), [](const auto& a, const auto& b) { return a.token_index < b.token_index; });
    models_ = std::move(models);
    for (std::size_t i = 0; i < models_.size(); ++i) by_id_[models_[i].model_id] = i;

    for (const auto& m : models_) {
        for (const auto& id : m.demo_ids) {
            auto it = demo_by_id_.find(id);
            if (it == demo_by_id_.end())
                throw ValidationError("demo_ids", "model '" + m.model_id + "' references unknown demonstration '" + id + "'");
            if (demos_[it->second].model_id != m.model_id)
                throw ValidationError("demo_ids", "demonstration '" + id + "' belongs to '" + demos_[it->second].model_id +
                                                      "', not '" + m.model_id + "'");
        }
    }
    for (const auto& d : demos_)
        if (!by_id_.count(d.model_id))
            throw ValidationError("model_id", "demonstration '" + d.demo_id + "' references unknown model '" + d.model_id + "'");
}

const ModelRecord* ModelRegistry::find(std::string_view model_id) const {
    auto it = by_id_.find(std::string(model_id));
    return it == by_id_.end() ? nullptr : &models_[it->second];
}

const ModelRecord& ModelRegistry::at(std::string_view model_id) const {
    const auto* m = find(model_id);
    if (!m) throw ValidationError("model_id", "unknown model '" + std::string(model_id) + "'");
    return *m;
}

const ModelRecord* ModelRegistry::resolve_name(std::string_view name) const {
    auto trimmed = text::trim(name);
    if (const auto* m = find(trimmed)) return m;
    for (const auto& m : models_)
        if (text::iequals(m.display_name, trimmed)) return &m;
    return nullptr;
}

const Demonstration* ModelRegistry::find_demo(std::string_view demo_id) const {
    auto it = demo_by_id_.find(std::string(demo_id));
    return it == demo_by_id_.end() ? nullptr : &demos_[it->second];
}

std::vector<const Demonstration*> ModelRegistry::demos_of(std::string_view model_id) const {
    const auto& m = at(model_id);
    std::vector<const Demonstration*> out;
    out.reserve(m.demo_ids.size());
    for (const auto& id : m.demo_ids) out.push_back(find_demo(id));
    return out;
}

std::vector<Demonstration> ModelRegistry::demos_for(std::string_view model_id, std::size_t limit) const {
    auto ds = demos_of(model_id);
    std::sort(ds.begin(), ds.end(), [](const Demonstration* a, const Demonstration* b) {
        auto qa = a->quality_sum(), qb = b->quality_sum();
        if (qa != qb) return qa > qb;
        return a->demo_id < b->demo_id;
    });
    std::vector<Demonstration> out;
    for (std::size_t i = 0; i < ds.size() && i < limit; ++i) out.push_back(*ds[i]);
    return out;
}

std::vector<Demonstration> load_demos(const fs::path& path) {
    std::vector<Demonstration> out;
    auto records = jsonl::read(path);
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            out.push_back(demonstration_from_json(records[i]));
        } catch (const ValidationError& e) {
            throw ParseError(std::string("demonstration ") + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

namespace {

// Maps record ordinals back to file lines (header + blank lines are skipped by jsonl::read).
std::vector<std::size_t> record_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::size_t> lines;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        if (!header) {
            header = true;
            continue;
        }
        lines.push_back(lineno);
    }
    return lines;
}

}  // namespace

ModelRegistry load_registry(const fs::path& registry_path, const fs::path& demos_path) {
    auto records = jsonl::read(registry_path);
    auto lines = record_lines(registry_path);
    std::vector<ModelRecord> models;
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            models.push_back(model_record_from_json(records[i]));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), lines.at(i));
        }
    }
    std::vector<Demonstration> demos;
    if (!demos_path.empty() && fs::exists(demos_path)) demos = load_demos(demos_path);
    return ModelRegistry(std::move(models), std::move(demos));
}

void save_registry(const fs::path& registry_path, const fs::path& demos_path, const ModelRegistry& registry) {
    std::vector<json> models, demos;
    for (const auto& m : registry.models()) models.push_back(to_json(m));
    for (const auto& d : registry.demos()) demos.push_back(to_json(d));
    jsonl::write_atomic(registry_path, "registry", models);
    jsonl::write_atomic(demos_path, "demos", demos);
}

ArgumentSet mode_default_args(const std::vector<const Demonstration*>& demos, const ArgumentSchema& schema) {
    ArgumentSet out;
    for (const auto& spec : schema.specs()) {
        std::map<std::string, std::pair<std::size_t, const ArgValue*>> counts;
        for (const auto* d : demos) {
            if (const auto* v = d->args.find(spec.name)) {
                auto& slot = counts[format_value(*v)];
                ++slot.first;
                slot.second = v;
            }
        }
        std::size_t best = 0, n_best = 0;
        const ArgValue* winner = nullptr;
        for (const auto& [_, c] : counts) {
            if (c.first > best) {
                best = c.first;
                n_best = 1;
                winner = c.second;
            } else if (c.first == best) {
                ++n_best;
            }
        }
        out.set(spec.name, (winner && n_best == 1) ? *winner : spec.default_value);
    }
    return out;
}

ModelRegistry ingest(const std::vector<ModelMeta>& models, std::vector<Demonstration> demos) {
    std::vector<ModelRecord> records;
    std::map<std::string, std::vector<const Demonstration*>> by_model;
    for (const auto& d : demos) by_model[d.model_id].push_back(&d);
    const auto& schema = ArgumentSchema::canonical();
    for (std::size_t i = 0; i < models.size(); ++i) {
        ModelRecord r;
        r.model_id = models[i].model_id;
        r.display_name = models[i].display_name.empty() ? models[i].model_id : models[i].display_name;
        r.description = models[i].description;
        r.base_family = models[i].base_family;
        r.token_index = i;
        const auto& ds = by_model[r.model_id];
        r.default_args = mode_default_args(ds, schema);
        for (const auto* d : ds) r.demo_ids.push_back(d->demo_id);
        records.push_back(std::move(r));
    }
    return ModelRegistry(std::move(records), std::move(demos));
}

// ---------------------------------------------------------------------------
// Benchmark files

std::vector<BenchmarkSample> load_benchmark(const fs::path& path) {
    auto records = jsonl::read(path);
    auto lines = record_lines(path);
    std::vector<BenchmarkSample> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            out.push_back(benchmark_sample_from_json(records[i]));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), lines.at(i));
        }
    }
    return out;
}

std::size_t append_samples(const fs::path& path, const std::vector<BenchmarkSample>& samples) {
    std::vector<json> records;
    records.reserve(samples.size());
    for (const auto& s : samples) {
        auto j = to_json(s);
        benchmark_sample_from_json(j);  // full invariant check before anything touches disk
        records.push_back(std::move(j));
    }
    jsonl::append_atomic(path, "bench", records);
    return records.size();
}

void write_benchmark(const fs::path& path, const std::vector<BenchmarkSample>& samples) {
    std::vector<json> records;
    for (const auto& s : samples) {
        auto j = to_json(s);
        benchmark_sample_from_json(j);
        records.push_back(std::move(j));
    }
    jsonl::write_atomic(path, "bench", records);
}

void validate_benchmark(const std::vector<BenchmarkSample>& samples, const ModelRegistry& registry) {
    std::set<std::string> train_ids, test_ids;
    for (const auto& s : samples) {
        if (!registry.find(s.gt_model_id))
            throw ValidationError("gt_model_id", "sample '" + s.sample_id + "' references unknown model '" + s.gt_model_id + "'");
        (s.split == Split::train ? train_ids : test_ids).insert(s.sample_id);
    }
    for (const auto& id : test_ids)
        if (train_ids.count(id)) throw ValidationError("sample_id", "sample '" + id + "' appears in both train and test");
}

}  // namespace autot2i
