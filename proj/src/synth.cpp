// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>

#include "autot2i/digest.hpp"
#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

namespace {

struct Theme {
    const char* name;
    const char* family;
    const char* description;
    std::vector<const char*> styles;
    std::vector<const char*> subjects;
    const char* negative;
};

const std::vector<Theme>& themes() {
    static const std::vector<Theme> t = {
        {"AnimeDream", "sd15", "Anime illustration model with clean line art and bright palettes.",
         {"anime style", "cel shading", "vibrant colors", "clean line art", "key visual"},
         {"a girl with silver hair", "a magical schoolgirl", "a samurai boy", "a fox spirit", "a mecha pilot"},
         "lowres, bad anatomy, extra fingers"},
        {"RealVision", "sd15", "Photorealistic portraits and street photography.",
         {"photorealistic", "85mm lens", "film grain", "natural skin texture", "shallow depth of field"},
         {"an old fisherman", "a woman in a red coat", "a jazz musician", "a street vendor", "a tired nurse"},
         "cartoon, painting, blurry, deformed"},
        {"InkWash", "sd15", "Traditional East Asian ink wash painting.",
         {"ink wash painting", "sumi-e", "rice paper texture", "minimal brush strokes", "monochrome"},
         {"a crane by the river", "bamboo in the wind", "a misty mountain temple", "a lone boat", "plum blossoms"},
         "color, photo, 3d render"},
        {"PixelForge", "sd15", "Retro pixel art sprites and scenes.",
         {"pixel art", "16-bit", "limited palette", "retro game", "isometric"},
         {"a knight with a torch", "a tiny village", "a slime monster", "a spaceship hangar", "a dungeon door"},
         "blurry, smooth shading, photo"},
        {"CyberNeon", "sdxl", "Neon-lit cyberpunk cityscapes.",
         {"cyberpunk", "neon lights", "rain soaked streets", "volumetric fog", "cinematic lighting"},
         {"a hacker in a hoodie", "a flying car", "a night market", "an android bartender", "a megacity skyline"},
         "daylight, pastoral, lowres"},
        {"WatercolorBloom", "sd15", "Loose watercolor illustration with soft edges.",
         {"watercolor", "soft edges", "paper texture", "pastel palette", "loose brushwork"},
         {"a bouquet of peonies", "a cottage garden", "a sleeping cat", "a seaside village", "a hot air balloon"},
         "harsh lines, photo, oversaturated"},
        {"ClayWorks", "sdxl", "Claymation and stop-motion figurines.",
         {"claymation", "stop motion", "handmade texture", "miniature set", "soft studio light"},
         {"a grumpy penguin", "a tiny chef", "a robot family", "a snail mail carrier", "a birthday cake monster"},
         "photo, realistic skin, lowres"},
        {"DarkGothic", "sd15", "Gothic horror and dark fantasy illustration.",
         {"gothic", "dark fantasy", "candlelight", "ornate details", "moody atmosphere"},
         {"a vampire countess", "a haunted cathedral", "a raven on a skull", "a plague doctor", "a cursed mirror"},
         "bright, cheerful, cartoon"},
        {"ArchiViz", "sdxl", "Architectural visualization and interiors.",
         {"architectural render", "global illumination", "wide angle", "clean interior", "golden hour"},
         {"a glass villa on a cliff", "a scandinavian living room", "a brutalist library", "a rooftop garden",
          "a modern kitchen"},
         "people, clutter, distorted lines"},
        {"StoryBook", "sd15", "Children's picture book illustration.",
         {"storybook illustration", "gouache", "whimsical", "warm colors", "rounded shapes"},
         {"a bear having a picnic", "a girl and her kite", "a dragon reading books", "a rabbit postman",
          "a treehouse at night"},
         "scary, realistic, dark"},
    };
    return t;
}

const std::vector<const char*>& details() {
    static const std::vector<const char*> d = {
        "at sunset", "in the rain", "under the stars", "in early morning fog", "surrounded by flowers",
        "in a snowy forest", "by the sea", "in a busy city", "on a quiet street", "in a cozy room",
        "with dramatic shadows", "with soft backlight", "from a low angle", "close-up", "full body",
        "looking at the viewer", "in autumn leaves", "at a festival", "in a desert", "under cherry blossoms"};
    return d;
}

const std::vector<const char*>& quality_tags() {
    static const std::vector<const char*> q = {"masterpiece", "best quality", "highly detailed", "8k", "sharp focus",
                                               "award winning", "intricate"};
    return q;
}

std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '-');
    return out;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

struct Preference {
    std::string sampler;
    std::int64_t steps;
    double cfg;
    std::int64_t width, height;
    std::int64_t clip_skip;
};

}  // namespace

SynthCorpus synth_corpus(const SynthCorpusConfig& config) {
    if (config.models < 3) throw ValidationError("models", "synthetic corpus needs at least 3 models");
    if (config.demos < config.models + 2) throw ValidationError("demos", "not enough demonstrations for every model");
    std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
    const auto& th = themes();
    const auto& samplers = ArgumentSchema::canonical().find("sampler")->allowed;

    SynthCorpus corpus;
    std::vector<Preference> prefs;
    for (std::size_t i = 0; i < config.models; ++i) {
        const auto& t = th[i % th.size()];
        const auto version = i / th.size() + 1;
        ModelMeta m;
        m.display_name = std::string(t.name) + " v" + std::to_string(version);
        m.model_id = "m" + std::to_string(i) + "-" + slug(m.display_name);
        m.description = t.description;
        m.base_family = t.family;
        corpus.models.push_back(m);
        const bool xl = std::string_view(t.family) == "sdxl";
        static const std::int64_t steps[] = {20, 25, 28, 30, 40};
        static const double cfgs[] = {5.0, 6.0, 7.0, 7.5, 9.0};
        Preference p;
        p.sampler = samplers[std::uniform_int_distribution<std::size_t>(0, 12)(rng)];
        p.steps = steps[rng() % 5];
        p.cfg = cfgs[rng() % 5];
        p.width = xl ? 1024 : (rng() % 2 ? 512 : 768);
        p.height = xl ? 1024 : 512;
        p.clip_skip = rng() % 3 == 0 ? 2 : 1;
        prefs.push_back(p);
    }

    // Geometric weights for the head of the registry, then one and two demos for the last two models.
    const std::size_t n = config.models;
    std::vector<std::size_t> counts(n, 1);
    counts[n - 2] = 2;
    std::size_t remaining = config.demos - (n - 2) - 3;
    std::vector<double> w(n - 2);
    double wsum = 0;
    for (std::size_t i = 0; i < n - 2; ++i) wsum += w[i] = std::pow(0.8, static_cast<double>(i));
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n - 2; ++i) {
        const auto extra = static_cast<std::size_t>(std::floor(static_cast<double>(remaining) * w[i] / wsum));
        counts[i] += extra;
        assigned += extra;
    }
    counts[0] += remaining - assigned;

    const auto& schema = ArgumentSchema::canonical();
    std::size_t next_id = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = th[i % th.size()];
        const auto& p = prefs[i];
        for (std::size_t k = 0; k < counts[i]; ++k) {
            Demonstration d;
            char id[24];
            std::snprintf(id, sizeof id, "d%05zu", next_id++);
            d.demo_id = id;
            d.model_id = corpus.models[i].model_id;
            std::string prompt = pick(t.subjects, rng);
            prompt += std::string(", ") + pick(details(), rng);
            std::vector<const char*> styles(t.styles.begin(), t.styles.end());
            std::shuffle(styles.begin(), styles.end(), rng);
            const auto n_styles = 2 + rng() % 2;
            for (std::size_t s = 0; s < n_styles; ++s) prompt += std::string(", ") + styles[s];
            if (rng() % 2) prompt += std::string(", ") + pick(quality_tags(), rng);
            d.prompt = prompt;

            const bool keep = std::uniform_real_distribution<double>(0, 1)(rng) < 0.75;
            ArgumentSet a;
            a.set("sampler", keep ? p.sampler : samplers[rng() % samplers.size()]);
            a.set("steps", keep ? p.steps : static_cast<std::int64_t>(15 + rng() % 36));
            a.set("cfg_scale", keep ? p.cfg : 4.0 + 0.5 * static_cast<double>(rng() % 13));
            a.set("width", p.width);
            a.set("height", p.height);
            a.set("seed", static_cast<std::int64_t>(rng() % 2147483647ULL));
            a.set("negative_prompt", std::string(t.negative));
            a.set("clip_skip", keep ? p.clip_skip : static_cast<std::int64_t>(1 + rng() % 2));
            schema.validate(a);
            d.args = std::move(a);
            d.source_quality = {{"downloads", static_cast<std::int64_t>(rng() % 5000)},
                                {"upvotes", static_cast<std::int64_t>(rng() % 500)}};
            if (std::uniform_real_distribution<double>(0, 1)(rng) < config.image_share)
                d.image_ref = sha256_hex("synthetic-image:" + d.demo_id);
            corpus.demos.push_back(std::move(d));
        }
    }
    return corpus;
}

std::vector<BenchmarkSample> synth_benchmark(const ModelRegistry& registry, std::size_t n, std::uint64_t seed) {
    if (registry.demos().empty()) throw ValidationError("demos", "registry has no demonstrations");
    std::vector<const Demonstration*> demos;
    for (const auto& d : registry.demos()) demos.push_back(&d);
    std::sort(demos.begin(), demos.end(), [](auto a, auto b) { return a->demo_id < b->demo_id; });
    std::mt19937_64 rng(seed ^ 0xbe7c4ULL);
    std::shuffle(demos.begin(), demos.end(), rng);

    static const std::vector<const char*> openers = {"can you draw me ", "i want a picture of ", "please make me ",
                                                     "could you create ", "hey, show me "};
    std::vector<BenchmarkSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = *demos[i % demos.size()];
        auto parts = text::split(d.prompt, ',');
        const std::string core = text::trim(parts[0]);
        const std::string detail = parts.size() > 1 ? text::trim(parts[1]) : "nice";
        std::string ask = std::string(pick(openers, rng)) + core + " " + detail;
        BenchmarkSample s;
        char id[24];
        std::snprintf(id, sizeof id, "b%05zu", i);
        s.sample_id = id;
        const auto r = rng() % 10;
        if (r < 2) {
            s.input = ChatInput::history({{Role::user, std::string(pick(openers, rng)) + core},
                                          {Role::assistant, "Here is a first try."},
                                          {Role::user, "make it " + detail + " please"}});
        } else if (r < 4 && d.image_ref) {
            s.input = ChatInput::multimodal(ask + ", like my photo", *d.image_ref);
        } else {
            s.input = ChatInput::single(ask);
        }
        s.gt_prompt = d.prompt;
        s.gt_model_id = d.model_id;
        s.gt_args = d.args;
        s.split = Split::test;
        s.setting = Setting::supervised;
        out.push_back(std::move(s));
    }
    return out;
}

ClusterSet synth_clusters(std::size_t models, std::size_t dim, std::size_t train_per_model,
                          std::size_t heldout_per_model, double sigma, std::uint64_t seed) {
    if (models == 0 || dim < models) throw ValidationError("dim", "cluster dimension must be at least the model count");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    auto draw = [&](std::size_t m) {
        FeatureVector h = FeatureVector::Zero(static_cast<Eigen::Index>(dim));
        h[static_cast<Eigen::Index>(m)] = 1.0 / std::sqrt(2.0);
        for (Eigen::Index i = 0; i < h.size(); ++i) h[i] += g(rng);
        return TrainingExample{h.normalized(), m};
    };
    ClusterSet out;
    for (std::size_t m = 0; m < models; ++m) {
        for (std::size_t i = 0; i < train_per_model; ++i) out.train.push_back(draw(m));
        for (std::size_t i = 0; i < heldout_per_model; ++i) out.heldout.push_back(draw(m));
    }
    return out;
}

std::vector<TrainingExample> selector_examples(const std::vector<BenchmarkSample>& samples, const ModelRegistry& registry,
                                               const Encoder& encoder) {
    std::vector<TrainingExample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({encoder.encode(s.input, s.gt_prompt), registry.at(s.gt_model_id).token_index});
    return out;
}

}  // namespace autot2i
