// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

#include "autot2i/benchforge.hpp"
#include "autot2i/digest.hpp"
#include "autot2i/evalkit.hpp"
#include "autot2i/gateway.hpp"
#include "autot2i/synth.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::shared_ptr<Encoder> make_encoder(const AppConfig& c) {
    if (c.str("encoder.kind") == "remote")
        return std::make_shared<RemoteEncoder>(RemoteEncoderConfig{c.str("encoder.url"), c.at("encoder.dim").get<std::size_t>(),
                                                                   c.str("encoder.model"), c.http_options()});
    return std::make_shared<ToyEncoder>(ToyEncoderConfig{c.at("encoder.dim").get<std::size_t>(),
                                                         c.at("encoder.seed").get<std::uint64_t>(),
                                                         c.at("encoder.buckets").get<std::size_t>()});
}

std::shared_ptr<LlmBackend> make_llm(const AppConfig& c, std::string_view prefix) {
    const std::string p(prefix);
    if (c.str(p + ".kind") != "llm") return nullptr;
    return std::make_shared<RemoteLlm>(RemoteLlmConfig{c.str(p + ".url"), c.str(p + ".model"), c.http_options()});
}

std::shared_ptr<Renderer> make_renderer(const AppConfig& c) {
    if (c.str("renderer.kind") == "remote") {
        RemoteRendererConfig rc;
        rc.url = c.str("renderer.url");
        rc.poll_interval = std::chrono::milliseconds(c.at("renderer.poll_ms").get<std::int64_t>());
        rc.job_timeout = std::chrono::milliseconds(c.at("renderer.timeout_ms").get<std::int64_t>());
        rc.http = c.http_options();
        return std::make_shared<RemoteRenderer>(rc);
    }
    return std::make_shared<MockRenderer>();
}

TrainConfig train_config_from(const AppConfig& c) {
    auto tc = TrainConfig::preset(c.str("selector.preset"));
    tc.seed = c.at("seed").get<std::uint64_t>();
    tc.threads = c.at("selector.threads").get<std::size_t>();
    tc.denominator = c.str("selector.denominator") == "model_only" ? Denominator::model_only : Denominator::full;
    if (c.has("selector.optimizer")) tc.optimizer = c.str("selector.optimizer") == "sgd" ? Optimizer::sgd : Optimizer::adamw;
    if (c.has("selector.learning_rate")) tc.learning_rate = c.at("selector.learning_rate").get<double>();
    if (c.has("selector.weight_decay")) tc.weight_decay = c.at("selector.weight_decay").get<double>();
    if (c.has("selector.epochs")) tc.epochs = c.at("selector.epochs").get<std::size_t>();
    if (c.has("selector.batch_size")) tc.batch_size = c.at("selector.batch_size").get<std::size_t>();
    tc.validate();
    return tc;
}

Eigen::MatrixXd word_rows_from(const AppConfig& c, std::size_t dim) {
    return synth_word_rows(c.at("selector.vocab").get<std::size_t>(), dim, c.at("selector.word_seed").get<std::uint64_t>());
}

ArgumentSet fixed_args_from(const AppConfig& c) {
    const auto& schema = ArgumentSchema::canonical();
    auto args = schema.defaults();
    if (c.has("baseline.args")) {
        const auto& j = c.at("baseline.args");
        if (!j.is_object()) throw ValidationError("baseline.args", "expected an object");
        for (const auto& [k, v] : j.items()) {
            if (!schema.find(k)) throw ValidationError("baseline.args." + k, "unknown argument");
            args.set(k, schema.from_json(k, v));
        }
    }
    schema.validate(args);
    return args;
}

Runtime build_runtime(const AppConfig& c, const fs::path& traces_path, const fs::path& images_dir) {
    Runtime rt;
    auto registry = std::make_shared<ModelRegistry>(load_registry(c.path("registry"), c.path("demos")));
    rt.registry = registry;
    rt.encoder = make_encoder(c);
    const auto mode = pipeline_mode_from_string(c.str("pipeline.mode"));

    PipelineComponents pc;
    pc.registry = registry;
    pc.encoder = rt.encoder;
    if (!c.str("selector.checkpoint").empty() && fs::exists(c.path("selector.checkpoint"))) {
        rt.head = std::make_shared<TokenHead>(
            load_checkpoint(c.path("selector.checkpoint"), word_rows_from(c, rt.encoder->dimension())));
        pc.head = rt.head;
    } else if (mode == PipelineMode::evo) {
        throw ConfigError(std::vector<ConfigIssue>{{"selector.checkpoint", "evo mode needs a trained checkpoint"}});
    }
    RewriterOptions ro;
    ro.token_cap = c.at("rewriter.token_cap").get<std::size_t>();
    if (auto llm = make_llm(c, "rewriter"))
        pc.rewriter = std::make_shared<Rewriter>(std::make_shared<LlmRewriter>(llm, true), ro);
    else
        pc.rewriter = std::make_shared<Rewriter>(std::make_shared<MockRewriter>(), ro);
    if (auto llm = make_llm(c, "baseline.rewriter"))
        pc.baseline_rewriter = std::make_shared<Rewriter>(std::make_shared<LlmRewriter>(llm, false), ro);
    else
        pc.baseline_rewriter = std::make_shared<Rewriter>(std::make_shared<MockRewriter>(), ro);

    ArgConfOptions ao;
    ao.k = c.at("argconf.k").get<std::size_t>();
    ao.budget_chars = c.at("argconf.budget_chars").get<std::size_t>();
    ao.max_retries = c.at("argconf.max_retries").get<std::size_t>();
    std::shared_ptr<LlmBackend> argconf_llm = make_llm(c, "argconf");
    if (!argconf_llm) argconf_llm = make_echo_args_llm();
    pc.configurator = std::make_shared<ArgConfigurator>(*registry, rt.encoder, argconf_llm, ao);
    pc.direct_llm = make_llm(c, "direct");

    rt.jobs = std::make_shared<JobManager>(make_renderer(c), std::make_shared<ImageStore>(images_dir),
                                           c.at("renderer.workers").get<std::size_t>());
    rt.traces = std::make_shared<TraceStore>(traces_path);
    pc.jobs = rt.jobs;
    pc.traces = rt.traces;

    PipelineConfig cfg;
    cfg.select_mode = select_mode_from_string(c.str("selector.select_mode"));
    cfg.baseline_model_id = c.str("baseline.model_id");
    cfg.fixed_args = fixed_args_from(c);
    cfg.direct_max_retries = c.at("direct.max_retries").get<std::size_t>();
    rt.pipeline = std::make_shared<Pipeline>(std::move(pc), std::move(cfg));
    return rt;
}

namespace {

void emit(std::ostream& out, const json& j) { out << j.dump() << std::endl; }

json issues_json(const std::vector<ConfigIssue>& issues) {
    json a = json::array();
    for (const auto& i : issues) a.push_back({{"field", i.field}, {"message", i.message}});
    return a;
}

void write_jsonl(const fs::path& path, std::string_view kind, const std::vector<json>& rows) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    jsonl::write_atomic(path, kind, rows);
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream o(path, std::ios::trunc);
    o << j.dump(2) << '\n';
    if (!o) throw Error("cannot write " + path.string());
}

std::vector<BenchmarkSample> only(const std::vector<BenchmarkSample>& samples, Split split) {
    std::vector<BenchmarkSample> out;
    for (const auto& s : samples)
        if (s.split == split) out.push_back(s);
    return out;
}

struct Flags {
    // build-bench
    std::string review_import;
    // train-selector
    bool synthetic = false;
    // evaluate
    std::vector<std::string> traces;
    std::vector<std::string> system_ids;
    std::string report;
    // ingest
    std::string models_file, demos_file;
    // synth-corpus
    std::size_t synth_models = 10, synth_demos = 500, synth_bench = 100, synth_train = 400;
};

json cmd_build_bench(const AppConfig& c, const Flags& f) {
    const fs::path out = c.path("out_dir");
    if (!f.review_import.empty()) {
        auto bench = load_benchmark(out / "benchmark.jsonl");
        auto r = apply_review(bench, import_review(f.review_import));
        write_benchmark(out / "benchmark.jsonl", r.kept);
        return {{"benchmark", (out / "benchmark.jsonl").string()}, {"kept", r.kept.size()}, {"dropped", r.dropped}};
    }
    auto registry = load_registry(c.path("registry"), c.path("demos"));
    const auto roles_path = c.str("bench.roles").empty() ? default_roles_path() : c.path("bench.roles");
    auto roles = load_roles(roles_path);
    BenchBuildConfig bc;
    bc.seed = c.at("seed").get<std::uint64_t>();
    bc.temperature = c.at("bench.temperature").get<double>();
    bc.dedup_threshold = c.at("bench.dedup_threshold").get<double>();
    bc.test_fraction = c.at("bench.test_fraction").get<double>();
    bc.fewshot_k = c.at("bench.fewshot_k").get<std::size_t>();
    bc.max_chars = c.at("bench.max_chars").get<std::size_t>();
    bc.max_turns = c.at("bench.max_turns").get<std::size_t>();
    bc.multimodal_share = c.at("bench.multimodal_share").get<double>();
    bc.history_share = c.at("bench.history_share").get<double>();
    bc.llm_filter = c.at("bench.llm_filter").get<bool>();
    bc.generate.max_in_flight = c.at("bench.max_in_flight").get<std::size_t>();
    bc.generate.examples = c.at("bench.examples").get<std::size_t>();
    auto llm = make_llm(c, "bench.llm");
    if (!llm) llm = make_mock_roleplay_llm();
    ToyTokenEmbedder embedder(c.at("eval.embedder_dim").get<std::size_t>(), c.at("eval.embedder_seed").get<std::uint64_t>());
    auto r = build_benchmark(registry, roles, *llm, embedder, bc, make_llm(c, "bench.judge"));

    fs::create_directories(out);
    write_benchmark(out / "train.jsonl", r.train);
    write_benchmark(out / "test_init.jsonl", r.test_initial);
    write_benchmark(out / "benchmark.jsonl", r.test);
    write_jsonl(out / "raw_outputs.jsonl", "raw", r.generation.raw_outputs);
    std::vector<json> failures;
    for (const auto& fl : r.generation.failures)
        failures.push_back({{"demo_id", fl.job.demo_id},
                            {"role_id", fl.job.role_id},
                            {"kind", to_string(fl.job.kind)},
                            {"reason", fl.reason}});
    write_jsonl(out / "failures.jsonl", "failures", failures);
    export_review(out / "review.jsonl", r.test);
    write_json(out / "manifest.json", r.manifest);
    return {{"out_dir", out.string()}, {"manifest", r.manifest}};
}

json cmd_train_selector(const AppConfig& c, const Flags& f) {
    auto tc = train_config_from(c);
    const auto dim = c.at("encoder.dim").get<std::size_t>();
    std::vector<TrainingExample> train_set, heldout;
    std::size_t num_models = 0;
    if (f.synthetic) {
        num_models = 10;
        auto cs = synth_clusters(num_models, dim, 50, 20, 0.1, tc.seed);
        train_set = std::move(cs.train);
        heldout = std::move(cs.heldout);
    } else {
        auto registry = load_registry(c.path("registry"), c.path("demos"));
        num_models = registry.size();
        auto encoder = make_encoder(c);
        auto train_samples = only(load_benchmark(c.path("train_set")), Split::train);
        if (train_samples.empty()) throw ValidationError("train_set", "no train-split samples in " + c.str("train_set"));
        train_set = selector_examples(train_samples, registry, *encoder);
        if (!c.str("benchmark").empty() && fs::exists(c.path("benchmark")))
            heldout = selector_examples(only(load_benchmark(c.path("benchmark")), Split::test), registry, *encoder);
    }
    auto head = init_head(num_models, dim, tc.seed, word_rows_from(c, dim));
    auto report = train(head, train_set, tc, heldout);
    save_checkpoint(c.path("selector.checkpoint"), head);
    json r = {{"checkpoint", c.str("selector.checkpoint")},
              {"checkpoint_sha256", sha256_hex(serialize_checkpoint(head))},
              {"examples", train_set.size()},
              {"steps", report.steps},
              {"epoch_mean_loss", report.epoch_mean_loss}};
    r["train_accuracy"] = report.final_train_accuracy ? json(*report.final_train_accuracy) : json(nullptr);
    r["heldout_accuracy"] = report.heldout_accuracy ? json(*report.heldout_accuracy) : json(nullptr);
    return r;
}

json cmd_run_pipeline(const AppConfig& c) {
    const fs::path out = c.path("out_dir");
    fs::create_directories(out);
    fs::remove(out / "traces.jsonl");
    auto rt = build_runtime(c, out / "traces.jsonl", out / "images");
    const auto mode = pipeline_mode_from_string(c.str("pipeline.mode"));
    auto samples = load_benchmark(c.path("benchmark"));
    auto test = only(samples, Split::test);
    if (test.empty()) test = samples;
    const auto limit = c.at("pipeline.limit").get<std::size_t>();
    if (limit > 0 && test.size() > limit) test.resize(limit);

    std::size_t failed = 0;
    for (const auto& s : test) failed += rt.pipeline->run(s.input, mode, s.sample_id).failed();
    rt.jobs->wait_all();
    std::vector<json> jobs;
    std::size_t done = 0;
    for (const auto& j : rt.jobs->jobs()) {
        done += j.status == JobStatus::done;
        jobs.push_back(to_json(j));
    }
    write_jsonl(out / "jobs.jsonl", "jobs", jobs);
    return {{"traces", (out / "traces.jsonl").string()},
            {"samples", test.size()},
            {"failed_traces", failed},
            {"jobs_done", done},
            {"jobs_failed", jobs.size() - done}};
}

json cmd_evaluate(const AppConfig& c, const Flags& f) {
    if (f.traces.empty()) throw ConfigError(std::vector<ConfigIssue>{{"traces", "at least one --traces file is required"}});
    if (!f.system_ids.empty() && f.system_ids.size() != f.traces.size())
        throw ConfigError(std::vector<ConfigIssue>{{"system-id", "give one --system-id per --traces file"}});
    auto bench = load_benchmark(c.path("benchmark"));
    std::vector<SystemRun> systems;
    std::set<std::string> traced;
    for (std::size_t i = 0; i < f.traces.size(); ++i) {
        const fs::path p = f.traces[i];
        SystemRun run;
        run.system_id = f.system_ids.empty() ? (p.parent_path() / p.stem()).string() : f.system_ids[i];
        for (const auto& j : jsonl::read(p)) run.traces.push_back(trace_from_json(j));
        const auto jobs_path = p.parent_path() / "jobs.jsonl";
        if (fs::exists(jobs_path))
            for (const auto& j : jsonl::read(jobs_path)) {
                auto ref = job_ref_from_json(j);
                run.jobs.emplace(ref.job_id, ref);
            }
        for (const auto& t : run.traces)
            if (t.sample_id) traced.insert(*t.sample_id);
        systems.push_back(std::move(run));
    }

    EvalOptions opts;
    opts.threads = c.at("eval.threads").get<std::size_t>();
    opts.config = c.resolved();
    const auto kind = c.str("eval.scorers");
    if (kind == "mock") {
        opts.scorers = ScorerSet::mock(c.at("seed").get<std::uint64_t>());
    } else if (kind == "remote") {
        const auto http = c.http_options();
        opts.scorers.features = std::make_shared<RemoteFeatureExtractor>(c.str("eval.features_url"), http);
        opts.scorers.clip = std::make_shared<RemoteImageScorer>("clip", c.str("eval.clip_url"), http);
        opts.scorers.hps = std::make_shared<RemoteImageScorer>("hps", c.str("eval.hps_url"), http);
        opts.scorers.reward = std::make_shared<RemoteImageScorer>("reward", c.str("eval.reward_url"), http);
    }
    if (opts.scorers.complete()) {
        // Reference distribution: the ground-truth trail of every evaluated sample, rendered once.
        auto renderer = make_renderer(c);
        ImageStore store(c.path("out_dir") / "reference_images");
        for (const auto& s : bench)
            if (traced.count(s.sample_id))
                opts.reference_digests.push_back(store.put(renderer->render({s.gt_model_id, s.gt_prompt, s.gt_args})));
    }
    ToyTokenEmbedder embedder(c.at("eval.embedder_dim").get<std::size_t>(), c.at("eval.embedder_seed").get<std::uint64_t>());
    auto report = evaluate_run(systems, bench, embedder, opts);
    const fs::path out = f.report.empty() ? c.path("out_dir") / "report.json" : fs::path(f.report);
    report.write(out);
    auto j = report.to_json();
    return {{"report", out.string()}, {"rows", j["rows"]}};
}

json cmd_serve(const AppConfig& c, std::ostream& out) {
    const fs::path dir = c.path("out_dir");
    fs::create_directories(dir);
    auto rt = build_runtime(c, dir / "traces.jsonl", dir / "images");
    GatewayOptions go;
    go.mode = pipeline_mode_from_string(c.str("pipeline.mode"));
    go.max_in_flight = c.at("server.max_in_flight").get<std::size_t>();
    go.page_size = c.at("server.page_size").get<std::size_t>();
    Gateway gw(rt.pipeline, go);
    const auto port = gw.bind(c.str("server.host"), c.at("server.port").get<int>());
    if (port < 0) throw Error("cannot bind " + c.str("server.host") + ":" + std::to_string(c.at("server.port").get<int>()));
    emit(out, {{"event", "listening"}, {"host", c.str("server.host")}, {"port", port}});
    gw.listen_after_bind();
    return {{"stopped", true}};
}

json cmd_ingest(const AppConfig& c, const Flags& f) {
    if (f.models_file.empty() || f.demos_file.empty())
        throw ConfigError(std::vector<ConfigIssue>{{"models", "--models and --demos are required"}});
    std::vector<ModelMeta> metas;
    for (const auto& j : jsonl::read(f.models_file))
        metas.push_back({j.at("model_id").get<std::string>(), j.value("display_name", ""), j.value("description", ""),
                         j.value("base_family", "")});
    auto registry = ingest(metas, load_demos(f.demos_file));
    const fs::path out = c.path("out_dir");
    fs::create_directories(out);
    save_registry(out / "registry.jsonl", out / "demos.jsonl", registry);
    return {{"registry", (out / "registry.jsonl").string()},
            {"demos", (out / "demos.jsonl").string()},
            {"models", registry.size()},
            {"demonstrations", registry.demos().size()}};
}

json cmd_synth_corpus(const AppConfig& c, const Flags& f) {
    SynthCorpusConfig sc;
    sc.models = f.synth_models;
    sc.demos = f.synth_demos;
    sc.seed = c.at("seed").get<std::uint64_t>();
    auto corpus = synth_corpus(sc);
    auto registry = corpus.registry();
    const fs::path out = c.path("out_dir");
    fs::create_directories(out);
    save_registry(out / "registry.jsonl", out / "demos.jsonl", registry);
    auto bench = synth_benchmark(registry, f.synth_bench, sc.seed + 1);
    write_benchmark(out / "bench.jsonl", bench);
    auto train_samples = synth_benchmark(registry, f.synth_train, sc.seed + 2);
    for (std::size_t i = 0; i < train_samples.size(); ++i) {
        train_samples[i].split = Split::train;
        train_samples[i].sample_id = "t" + train_samples[i].sample_id.substr(1);
    }
    write_benchmark(out / "train.jsonl", train_samples);
    return {{"registry", (out / "registry.jsonl").string()},
            {"demos", (out / "demos.jsonl").string()},
            {"benchmark", (out / "bench.jsonl").string()},
            {"train_set", (out / "train.jsonl").string()},
            {"models", registry.size()},
            {"demonstrations", registry.demos().size()}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Automatic text-to-image pipeline engine"};
    app.require_subcommand(1);
    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--set", sets, "Override a dotted config key, e.g. --set selector.preset=paper");

    Flags f;
    std::map<std::string, std::string> overrides;
    auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
    };

    auto* bb = app.add_subcommand("build-bench", "Generate, dedup, split and filter a benchmark from demonstrations");
    bind(bb, "--out", "out_dir", "Output directory");
    bind(bb, "--seed", "seed", "Planning seed");
    bb->add_option("--review-import", f.review_import, "Apply manual review decisions to <out>/benchmark.jsonl");

    auto* ts = app.add_subcommand("train-selector", "Train the model-token head");
    bind(ts, "--preset", "selector.preset", "toy or paper");
    bind(ts, "--seed", "seed", "Initialization and shuffle seed");
    bind(ts, "--out", "selector.checkpoint", "Checkpoint path");
    bind(ts, "--train-set", "train_set", "Benchmark file with train-split samples");
    ts->add_flag("--synthetic-clusters", f.synthetic, "Train on 10 separated Gaussian clusters instead of a benchmark");

    auto* rp = app.add_subcommand("run-pipeline", "Run every test sample of a benchmark through the pipeline");
    bind(rp, "--mode", "pipeline.mode", "evo, direct or fixed_baseline");
    bind(rp, "--bench", "benchmark", "Benchmark file");
    bind(rp, "--out", "out_dir", "Output directory for traces.jsonl, jobs.jsonl and images/");
    bind(rp, "--checkpoint", "selector.checkpoint", "Selector checkpoint");
    bind(rp, "--limit", "pipeline.limit", "Maximum number of samples (0 = all)");

    auto* ev = app.add_subcommand("evaluate", "Score one or more trace files against a benchmark");
    ev->add_option("--traces", f.traces, "traces.jsonl (repeat for several systems)");
    ev->add_option("--system-id", f.system_ids, "Row name per traces file");
    bind(ev, "--bench", "benchmark", "Benchmark file");
    ev->add_option("--report", f.report, "Report path (default <out_dir>/report.json)");
    bind(ev, "--out", "out_dir", "Output directory");

    auto* sv = app.add_subcommand("serve", "Serve the HTTP gateway");
    bind(sv, "--host", "server.host", "Bind address");
    bind(sv, "--port", "server.port", "Port (0 = any free port)");
    bind(sv, "--mode", "pipeline.mode", "Pipeline mode for /v1/chat");

    auto* in = app.add_subcommand("ingest", "Build a registry from exported model metadata and demonstrations");
    in->add_option("--models", f.models_file, "models.jsonl");
    in->add_option("--demos", f.demos_file, "demos.jsonl");
    bind(in, "--out", "out_dir", "Output directory");

    auto* sc = app.add_subcommand("synth-corpus", "Write a deterministic synthetic registry, train set and benchmark");
    sc->add_option("--models", f.synth_models, "Number of models");
    sc->add_option("--demos", f.synth_demos, "Number of demonstrations");
    sc->add_option("--bench-samples", f.synth_bench, "Benchmark (test) samples");
    sc->add_option("--train-samples", f.synth_train, "Selector training samples");
    bind(sc, "--seed", "seed", "Corpus seed");
    bind(sc, "--out", "out_dir", "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        emit(out, {{"event", "error"}, {"ok", false}, {"errors", {{{"field", "argv"}, {"message", e.what()}}}}});
        return 2;
    }
    const auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    try {
        AppConfig c = config_path.empty() ? AppConfig::from_json(json::object()) : AppConfig::load(config_path);
        for (const auto& s : sets) {
            auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError(std::vector<ConfigIssue>{{s, "expected key=value"}});
            c.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : overrides) c.set(k, v);

        auto issues = c.check(command);
        if (command == "train-selector" && f.synthetic)
            std::erase_if(issues, [](const ConfigIssue& i) { return i.field == "registry" || i.field == "demos"; });
        if (command == "train-selector" && !f.synthetic) {
            if (c.str("train_set").empty())
                issues.push_back({"train_set", "path is required unless --synthetic-clusters is given"});
            else if (!fs::exists(c.path("train_set")))
                issues.push_back({"train_set", "file not found: " + c.str("train_set")});
        }
        if (!issues.empty()) throw ConfigError(std::move(issues));
        emit(out, {{"event", "config"}, {"command", command}, {"config", c.resolved()}});

        json result;
        if (command == "build-bench") result = cmd_build_bench(c, f);
        else if (command == "train-selector") result = cmd_train_selector(c, f);
        else if (command == "run-pipeline") result = cmd_run_pipeline(c);
        else if (command == "evaluate") result = cmd_evaluate(c, f);
        else if (command == "serve") result = cmd_serve(c, out);
        else if (command == "ingest") result = cmd_ingest(c, f);
        else if (command == "synth-corpus") result = cmd_synth_corpus(c, f);
        emit(out, {{"event", "result"}, {"ok", true}, {"command", command}, {"result", result}});
        return 0;
    } catch (const ConfigError& e) {
        emit(out, {{"event", "error"}, {"ok", false}, {"command", command}, {"errors", issues_json(e.issues())}});
        return 2;
    } catch (const ValidationError& e) {
        emit(out, {{"event", "error"},
                   {"ok", false},
                   {"command", command},
                   {"errors", {{{"field", e.field()}, {"message", e.what()}}}}});
        return 1;
    } catch (const ParseError& e) {
        emit(out, {{"event", "error"},
                   {"ok", false},
                   {"command", command},
                   {"errors", {{{"field", "input"}, {"message", e.what()}, {"line", e.line()}}}}});
        return 1;
    } catch (const std::exception& e) {
        emit(out, {{"event", "error"}, {"ok", false}, {"command", command}, {"errors", {{{"field", ""}, {"message", e.what()}}}}});
        return 1;
    }
}

}  // namespace autot2i
