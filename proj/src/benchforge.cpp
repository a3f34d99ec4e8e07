// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/benchforge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kRoleplaySystem =
    "You are a professional user experience designer who plays various personas to convert complex and "
    "professional content for non-professional users. Please merge the following prompt and model information "
    "into a single freestyle query. Remove any obvious details that non-professional users would avoid. Make it "
    "similar to what non-professional users may write. The converted single-text query should be colloquial and "
    "as brief as possible.";

std::string slot_value(std::string_view s) {
    std::string out = text::trim(s);
    std::replace(out.begin(), out.end(), '"', '\'');
    std::replace(out.begin(), out.end(), '\n', ' ');
    return out;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

std::string between(std::string_view s, std::string_view open, std::string_view close) {
    auto a = s.find(open);
    if (a == std::string_view::npos) return {};
    a += open.size();
    auto b = s.find(close, a);
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(a, b - a));
}

}  // namespace

// ---------------------------------------------------------------------------
// Roles and role-play prompts

std::vector<RoleCard> load_roles(const fs::path& path) {
    std::vector<RoleCard> out;
    std::set<std::string> ids;
    for (const auto& j : jsonl::read(path)) {
        RoleCard r{j.at("role_id").get<std::string>(), j.at("persona").get<std::string>(), j.value("tone", "")};
        if (r.role_id.empty() || text::trim(r.persona).empty())
            throw ValidationError("persona", "role needs an id and a persona");
        if (!ids.insert(r.role_id).second) throw ValidationError("role_id", "duplicate role '" + r.role_id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

fs::path default_roles_path() { return fs::path(AUTOT2I_DATA_DIR) / "roles.jsonl"; }

void GenerationJob::validate() const {
    if (!(temperature > 0.0 && temperature <= 2.0)) throw ValidationError("temperature", "temperature must be in (0, 2]");
    if (demo_id.empty()) throw ValidationError("demo_id", "job has no demonstration");
    if (role_id.empty()) throw ValidationError("role_id", "job has no role");
}

const std::vector<std::string>& default_roleplay_examples() {
    static const std::vector<std::string> examples = {
        "can you make me a cozy picture of a cabin in the snow? like a christmas card",
        "i need a cute cartoon cat for my kid's birthday invite",
        "draw my grandma's old farmhouse but at sunset, make it feel warm",
        "hey, could you do a cool dragon flying over a city, kind of like a movie poster",
    };
    return examples;
}

RoleplayPrompt render_roleplay_prompt(const RoleCard& role, const Demonstration& demo, const ModelRecord& model,
                                      InputKind kind, const std::vector<std::string>& examples) {
    if (text::trim(role.persona).empty()) throw ValidationError("ROLE", "missing slot {ROLE}");
    if (text::trim(demo.prompt).empty()) throw ValidationError("PROMPT", "missing slot {PROMPT}");
    if (text::trim(model.display_name).empty()) throw ValidationError("MODEL", "missing slot {MODEL}");

    RoleplayPrompt out;
    out.system = kRoleplaySystem;
    std::string u = "You are playing the " + slot_value(role.persona);
    if (!text::trim(role.tone).empty()) u += " (" + slot_value(role.tone) + ")";
    u += ". ";
    if (kind == InputKind::history)
        u += "Please generate a conversation of two or three rounds in which you refine your request step by step, ";
    else
        u += "Please generate a single text query ";
    u += "based on the following professional prompt \"" + slot_value(demo.prompt) + "\" for the model \"" +
         slot_value(model.display_name) + "\".";
    if (!examples.empty()) {
        u += " You can refer to following examples:";
        for (std::size_t i = 0; i < examples.size(); ++i)
            u += (i ? "; \"" : " \"") + slot_value(examples[i]) + "\"";
        u += ".";
    }
    if (kind == InputKind::multimodal)
        u += " You also attach a reference image, so leave out details the image already shows.";
    if (kind == InputKind::history)
        u += " Write every line as \"USER: ...\" or \"ASSISTANT: ...\" and end with a USER line.";
    out.user = std::move(u);
    return out;
}

std::shared_ptr<LlmBackend> make_mock_roleplay_llm() {
    return std::make_shared<FunctionLlm>("mock-roleplay", [](const std::vector<ChatMessage>& msgs, const GenerationParams& p) {
        const auto content = user_content(msgs);
        const auto prompt = between(content, "professional prompt \"", "\" for the model");
        if (prompt.empty()) throw BackendError("mock-roleplay: no prompt slot in request");
        auto role = between(content, "You are playing the ", ".");
        if (auto paren = role.find(" ("); paren != std::string::npos) role.resize(paren);

        auto segments = text::split(prompt, ',');
        std::vector<std::string> parts;
        for (auto& s : segments)
            if (auto t = text::to_lower(text::trim(s)); !t.empty()) parts.push_back(t);
        std::string core = parts.empty() ? "something nice" : parts[0];
        auto words = text::whitespace_tokens(core);
        if (words.size() > 10) core = text::truncate_tokens(core, 10);
        const std::string d1 = parts.size() > 1 ? parts[1] : "detailed";
        const std::string d2 = parts.size() > 2 ? parts[2] : "pretty";

        const auto h = mix(fnv1a64(prompt + "\n" + role), static_cast<std::uint64_t>(p.temperature * 1000));
        if (content.find("USER: ...") != std::string::npos) {
            return "USER: can you draw me " + core + "?\nASSISTANT: Sure, here is a first version.\nUSER: nice, now make it more " +
                   d1 + " and a bit " + d2;
        }
        switch (h % 5) {
            case 0: return "can you draw me " + core + "?";
            case 1: return "i want a picture of " + core + ", " + d1 + " if you can";
            case 2: return "hey, could you make " + core + " for me? something " + d1;
            case 3: return "as a " + role + ", i need an image of " + core;
            default: return "please make me " + core + ", kind of " + d1;
        }
    });
}

// ---------------------------------------------------------------------------
// Generation

std::string user_text(const ChatInput& input) {
    std::string out;
    for (const auto& t : input.turns) {
        if (t.role != Role::user) continue;
        if (!out.empty()) out += '\n';
        out += t.text;
    }
    return out;
}

ChatInput parse_generated(std::string_view raw, InputKind kind, const std::optional<std::string>& image_ref) {
    if (kind == InputKind::history) {
        std::vector<Turn> turns;
        for (const auto& line : text::split_lines(raw)) {
            auto t = text::trim(line);
            if (t.empty()) continue;
            if (text::starts_with_ci(t, "USER:"))
                turns.push_back({Role::user, text::trim(std::string_view(t).substr(5))});
            else if (text::starts_with_ci(t, "ASSISTANT:"))
                turns.push_back({Role::assistant, text::trim(std::string_view(t).substr(10))});
            else if (!turns.empty())
                turns.back().text += " " + t;
        }
        std::size_t users = 0;
        for (const auto& t : turns) {
            if (t.text.empty()) throw ParseError("history reply has an empty turn");
            users += t.role == Role::user;
        }
        if (users < 2) throw ParseError("history reply has fewer than two user turns");
        auto in = ChatInput::history(std::move(turns));
        in.validate();
        return in;
    }
    std::string t = text::trim(raw);
    if (text::starts_with_ci(t, "query:")) t = text::trim(std::string_view(t).substr(6));
    if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) t = text::trim(t.substr(1, t.size() - 2));
    if (t.empty()) throw ParseError("empty generation");
    if (kind == InputKind::multimodal) {
        if (!image_ref) throw ValidationError("image_ref", "demonstration has no image for a multimodal job");
        return ChatInput::multimodal(std::move(t), *image_ref);
    }
    return ChatInput::single(std::move(t));
}

std::string sample_id_for(const Candidate& c) {
    return "s-" + sha256_hex(c.demo_id + "\n" + c.role_id + "\n" + std::string(to_string(c.input.kind))).substr(0, 16);
}

GenerationResult generate_inputs(const std::vector<GenerationJob>& jobs, const ModelRegistry& registry,
                                 const std::vector<RoleCard>& roles, LlmBackend& backend, const GenerateOptions& options) {
    std::unordered_map<std::string, const RoleCard*> role_by_id;
    for (const auto& r : roles) role_by_id[r.role_id] = &r;
    std::vector<std::string> examples = default_roleplay_examples();
    if (examples.size() > options.examples) examples.resize(options.examples);

    std::vector<std::optional<Candidate>> slots(jobs.size());
    std::vector<std::string> reasons(jobs.size());
    std::vector<json> raws(jobs.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            std::string raw;
            try {
                job.validate();
                const auto* demo = registry.find_demo(job.demo_id);
                if (!demo) throw ValidationError("demo_id", "unknown demonstration '" + job.demo_id + "'");
                auto rit = role_by_id.find(job.role_id);
                if (rit == role_by_id.end()) throw ValidationError("role_id", "unknown role '" + job.role_id + "'");
                if (job.kind == InputKind::multimodal && !demo->image_ref)
                    throw ValidationError("image_ref", "demonstration '" + demo->demo_id + "' has no image");
                const auto& model = registry.at(demo->model_id);
                auto rp = render_roleplay_prompt(*rit->second, *demo, model, job.kind, examples);
                raw = backend.complete({{"system", rp.system}, {"user", rp.user}},
                                       {job.temperature, static_cast<int>(options.max_tokens)});
                Candidate c;
                c.demo_id = demo->demo_id;
                c.model_id = demo->model_id;
                c.role_id = job.role_id;
                c.backend_id = backend.id();
                c.input = parse_generated(raw, job.kind, demo->image_ref);
                c.candidate_id = sample_id_for(c);
                slots[i] = std::move(c);
            } catch (const std::exception& e) {
                reasons[i] = e.what();
            }
            raws[i] = {{"demo_id", job.demo_id},
                       {"role_id", job.role_id},
                       {"kind", to_string(job.kind)},
                       {"backend", backend.id()},
                       {"temperature", job.temperature},
                       {"raw", raw}};
        }
    };
    const auto n_threads = std::max<std::size_t>(1, std::min(options.max_in_flight, jobs.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    GenerationResult out;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (slots[i])
            out.candidates.push_back(std::move(*slots[i]));
        else
            out.failures.push_back({jobs[i], reasons[i]});
        out.raw_outputs.push_back(std::move(raws[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dedup and split

SimilarityIndex::SimilarityIndex(const std::vector<std::string>& texts, const TokenEmbedder& embedder) {
    rows_.reserve(texts.size());
    for (const auto& t : texts) rows_.push_back(embedder.embed_tokens(t));
}

double SimilarityIndex::operator()(std::size_t a, std::size_t b) const {
    if (rows_.at(a).rows() == 0 || rows_.at(b).rows() == 0) return 0.0;
    return prompt_score(rows_[a], rows_[b]).f1;
}

std::vector<std::size_t> dedup_indices(const std::vector<std::string>& groups,
                                       const std::function<double(std::size_t, std::size_t)>& sim, double threshold) {
    std::unordered_map<std::string, std::vector<std::size_t>> kept_by_group;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto& bucket = kept_by_group[groups[i]];
        bool duplicate = false;
        for (auto k : bucket)
            if (sim(i, k) > threshold) {
                duplicate = true;
                break;
            }
        if (duplicate) continue;
        bucket.push_back(i);
        kept.push_back(i);
    }
    return kept;
}

std::vector<Candidate> dedup(const std::vector<Candidate>& candidates, const TokenEmbedder& embedder, double threshold) {
    std::vector<std::string> texts, groups;
    for (const auto& c : candidates) {
        texts.push_back(user_text(c.input));
        groups.push_back(c.model_id);
    }
    SimilarityIndex sim(texts, embedder);
    std::vector<Candidate> out;
    for (auto i : dedup_indices(groups, std::ref(sim), threshold)) out.push_back(candidates[i]);
    return out;
}

std::size_t test_count(std::size_t n, double frac) {
    if (n < 2) return 0;
    auto k = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-9));
    return std::min(k, n);
}

SplitResult split_test(const std::vector<BenchmarkSample>& samples, const TokenEmbedder& embedder, double frac) {
    if (!(frac > 0.0 && frac < 1.0)) throw ValidationError("test_fraction", "test fraction must be in (0, 1)");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].gt_model_id].push_back(i);

    std::unordered_set<std::size_t> test_idx;
    for (auto& [model, idx] : groups) {
        const auto n = idx.size();
        const auto k = test_count(n, frac);
        if (k == 0) continue;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return samples[a].sample_id < samples[b].sample_id; });
        std::vector<std::string> texts;
        for (auto i : idx) texts.push_back(user_text(samples[i].input));
        SimilarityIndex sim(texts, embedder);
        std::vector<double> mean(n, 0.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                const double s = sim(a, b);
                mean[a] += s;
                mean[b] += s;
            }
        std::vector<std::size_t> order(n);
        for (std::size_t a = 0; a < n; ++a) {
            mean[a] /= static_cast<double>(n - 1);
            order[a] = a;
        }
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mean[a] < mean[b]; });
        for (std::size_t r = 0; r < k; ++r) test_idx.insert(idx[order[r]]);
    }

    SplitResult out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto s = samples[i];
        s.split = test_idx.count(i) ? Split::test : Split::train;
        (s.split == Split::test ? out.test : out.train).push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Filters

namespace {

std::size_t code_points(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

}  // namespace

bool LengthFilter::keep(const BenchmarkSample& sample) {
    if (sample.input.turns.size() > max_turns_) return false;
    std::size_t chars = 0;
    for (const auto& t : sample.input.turns) chars += code_points(t.text);
    return chars <= max_chars_;
}

std::size_t longest_tag_run(std::string_view s) {
    std::size_t best = 0, run = 0;
    for (const auto& seg : text::split(s, ',')) {
        const auto words = text::word_tokens(seg).size();
        if (words >= 1 && words <= 2) {
            best = std::max(best, ++run);
        } else {
            run = 0;
        }
    }
    return best;
}

bool has_personal_pronoun(std::string_view s) {
    static const std::unordered_set<std::string> pronouns = {
        "i",   "me",   "my",    "mine",   "myself", "we",       "us",        "our", "ours",
        "you", "your", "yours", "yourself", "yourselves", "ourselves", "u", "ya"};
    for (const auto& w : text::word_tokens(s))
        if (pronouns.count(w)) return true;
    return false;
}

bool ColloquialismFilter::keep(const BenchmarkSample& sample) {
    bool pronoun = false;
    for (const auto& t : sample.input.turns) {
        if (t.role != Role::user) continue;
        if (longest_tag_run(t.text) > max_tag_run_) return false;
        pronoun = pronoun || has_personal_pronoun(t.text);
    }
    return pronoun;
}

bool LlmJudgeFilter::keep(const BenchmarkSample& sample) {
    std::vector<ChatMessage> msgs = {
        {"system",
         "You review synthetic user requests for a text-to-image benchmark. A good request sounds like a real "
         "non-expert user and still matches the reference prompt. Answer with exactly one word: keep or drop."},
        {"user", "Request:\n" + user_text(sample.input) + "\nReference prompt: " + sample.gt_prompt +
                     "\nModel: " + sample.gt_model_id}};
    auto verdict = text::to_lower(text::trim(llm_->complete(msgs, {0.0, 8})));
    if (verdict.rfind("keep", 0) == 0) return true;
    if (verdict.rfind("drop", 0) == 0) return false;
    throw BackendError("unreadable verdict '" + verdict + "'");
}

FilterReport apply_filters(const std::vector<BenchmarkSample>& samples,
                           const std::vector<std::shared_ptr<SampleFilter>>& filters) {
    FilterReport report;
    for (const auto& f : filters) report.dropped[f->name()] = 0;
    for (const auto& s : samples) {
        bool keep = true;
        for (const auto& f : filters) {
            try {
                if (!f->keep(s)) {
                    ++report.dropped[f->name()];
                    keep = false;
                    break;
                }
            } catch (const BackendError& e) {
                report.warnings.push_back("filter '" + f->name() + "' skipped for sample '" + s.sample_id + "': " + e.what());
            }
        }
        if (keep) report.kept.push_back(s);
    }
    return report;
}

void export_review(const fs::path& path, const std::vector<BenchmarkSample>& samples) {
    std::vector<json> rows;
    for (const auto& s : samples)
        rows.push_back({{"sample_id", s.sample_id},
                        {"text", user_text(s.input)},
                        {"gt_prompt", s.gt_prompt},
                        {"gt_model_id", s.gt_model_id},
                        {"decision", "pending"}});
    jsonl::write_atomic(path, "review", rows);
}

std::map<std::string, bool> import_review(const fs::path& path) {
    std::map<std::string, bool> out;
    for (const auto& j : jsonl::read(path)) {
        const auto id = j.at("sample_id").get<std::string>();
        const auto d = text::to_lower(j.at("decision").get<std::string>());
        if (d == "keep")
            out[id] = true;
        else if (d == "drop")
            out[id] = false;
        else if (d != "pending")
            throw ValidationError("decision", "unknown review decision '" + d + "' for sample '" + id + "'");
    }
    return out;
}

FilterReport apply_review(const std::vector<BenchmarkSample>& samples, const std::map<std::string, bool>& decisions) {
    FilterReport report;
    report.dropped["manual"] = 0;
    for (const auto& s : samples) {
        auto it = decisions.find(s.sample_id);
        if (it != decisions.end() && !it->second) {
            ++report.dropped["manual"];
            continue;
        }
        report.kept.push_back(s);
    }
    return report;
}

void assign_setting(std::vector<BenchmarkSample>& test, const std::vector<BenchmarkSample>& train, std::size_t k) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& s : train) ++counts[s.gt_model_id];
    for (auto& s : test) {
        auto it = counts.find(s.gt_model_id);
        const std::size_t n = it == counts.end() ? 0 : it->second;
        s.setting = n <= k ? Setting::fewshot : Setting::supervised;
    }
}

// ---------------------------------------------------------------------------
// Build

void BenchBuildConfig::validate() const {
    std::vector<std::string> errors;
    if (!(temperature > 0.0 && temperature <= 2.0)) errors.push_back("temperature must be in (0, 2]");
    if (!(dedup_threshold >= 0.0 && dedup_threshold <= 1.0)) errors.push_back("dedup_threshold must be in [0, 1]");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) errors.push_back("test_fraction must be in (0, 1)");
    if (multimodal_share < 0 || history_share < 0 || multimodal_share + history_share > 1.0)
        errors.push_back("input kind shares must be non-negative and sum to at most 1");
    if (generate.max_in_flight == 0) errors.push_back("max_in_flight must be positive");
    if (!errors.empty()) {
        std::string msg;
        for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e;
        throw ValidationError("bench", msg);
    }
}

json BenchBuildConfig::to_json() const {
    return {{"seed", seed},
            {"temperature", temperature},
            {"dedup_threshold", dedup_threshold},
            {"test_fraction", test_fraction},
            {"fewshot_k", fewshot_k},
            {"max_chars", max_chars},
            {"max_turns", max_turns},
            {"multimodal_share", multimodal_share},
            {"history_share", history_share},
            {"llm_filter", llm_filter},
            {"max_in_flight", generate.max_in_flight},
            {"examples", generate.examples}};
}

std::vector<GenerationJob> plan_jobs(const ModelRegistry& registry, const std::vector<RoleCard>& roles,
                                     const std::string& backend_id, const BenchBuildConfig& config) {
    config.validate();
    if (roles.empty()) throw ValidationError("roles", "no roles loaded");
    std::vector<const Demonstration*> demos;
    for (const auto& d : registry.demos()) demos.push_back(&d);
    std::sort(demos.begin(), demos.end(), [](auto a, auto b) { return a->demo_id < b->demo_id; });
    std::vector<GenerationJob> jobs;
    for (const auto* d : demos) {
        const auto h = mix(config.seed, fnv1a64(d->demo_id));
        GenerationJob job;
        job.demo_id = d->demo_id;
        job.role_id = roles[h % roles.size()].role_id;
        job.backend_id = backend_id;
        job.temperature = config.temperature;
        const double u = static_cast<double>((h >> 24) & 0xFFFFFF) / static_cast<double>(0x1000000);
        if (u < config.history_share)
            job.kind = InputKind::history;
        else if (d->image_ref && u < config.history_share + config.multimodal_share)
            job.kind = InputKind::multimodal;
        jobs.push_back(std::move(job));
    }
    return jobs;
}

BenchmarkSample to_sample(const Candidate& c, const ModelRegistry& registry) {
    const auto* demo = registry.find_demo(c.demo_id);
    if (!demo) throw ValidationError("demo_id", "unknown demonstration '" + c.demo_id + "'");
    BenchmarkSample s;
    s.sample_id = c.candidate_id.empty() ? sample_id_for(c) : c.candidate_id;
    s.input = c.input;
    s.gt_prompt = demo->prompt;
    s.gt_model_id = demo->model_id;
    s.gt_args = demo->args;
    return s;
}

json manifest_row(const std::vector<BenchmarkSample>& samples) {
    std::size_t single = 0, mm = 0, hist = 0;
    for (const auto& s : samples) {
        switch (s.input.kind) {
            case InputKind::single: ++single; break;
            case InputKind::multimodal: ++mm; break;
            case InputKind::history: ++hist; break;
        }
    }
    return {{"Total", samples.size()}, {"Single", single}, {"M-Modal", mm}, {"History", hist}};
}

BenchBuildResult build_benchmark(const ModelRegistry& registry, const std::vector<RoleCard>& roles, LlmBackend& backend,
                                 const TokenEmbedder& embedder, const BenchBuildConfig& config,
                                 std::shared_ptr<LlmBackend> judge) {
    BenchBuildResult r;
    auto jobs = plan_jobs(registry, roles, backend.id(), config);
    r.generation = generate_inputs(jobs, registry, roles, backend, config.generate);
    auto kept = dedup(r.generation.candidates, embedder, config.dedup_threshold);
    r.deduped = r.generation.candidates.size() - kept.size();

    std::vector<BenchmarkSample> samples;
    for (const auto& c : kept) samples.push_back(to_sample(c, registry));
    auto split = split_test(samples, embedder, config.test_fraction);
    r.train = std::move(split.train);
    r.test_initial = std::move(split.test);

    std::vector<std::shared_ptr<SampleFilter>> filters = {
        std::make_shared<LengthFilter>(config.max_chars, config.max_turns), std::make_shared<ColloquialismFilter>()};
    if (config.llm_filter) {
        if (!judge) throw ValidationError("llm_filter", "LLM filter enabled without a judge backend");
        filters.push_back(std::make_shared<LlmJudgeFilter>(judge));
    }
    r.filters = apply_filters(r.test_initial, filters);
    r.test = r.filters.kept;
    assign_setting(r.test, r.train, config.fewshot_k);

    std::vector<BenchmarkSample> sup, few;
    for (const auto& s : r.test) (s.setting == Setting::supervised ? sup : few).push_back(s);
    r.manifest = {{"config", config.to_json()},
                  {"backend", backend.id()},
                  {"embedder", embedder.id()},
                  {"fewshot_k", config.fewshot_k},
                  {"rows",
                   {{"TrainSet", manifest_row(r.train)},
                    {"TestSet Init", manifest_row(r.test_initial)},
                    {"Benchmark", manifest_row(r.test)},
                    {"Supervised", manifest_row(sup)},
                    {"Few-Shot", manifest_row(few)}}},
                  {"generation",
                   {{"jobs", jobs.size()},
                    {"candidates", r.generation.candidates.size()},
                    {"failures", r.generation.failures.size()}}},
                  {"dedup", {{"threshold", config.dedup_threshold}, {"dropped", r.deduped}}},
                  {"filters", {{"dropped", r.filters.dropped}, {"warnings", r.filters.warnings}}}};
    return r;
}

}  // namespace autot2i
