#include "edgeprobe/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgeprobe/analysis.hpp"
#include "edgeprobe/corpus.hpp"
#include "edgeprobe/error.hpp"
#include "edgeprobe/json_io.hpp"
#include "edgeprobe/lef.hpp"
#include "edgeprobe/report.hpp"

namespace edgeprobe {

namespace fs = std::filesystem;

std::filesystem::path Paths::dataset(std::string_view task) const {
    return datasets() / (file_stem(task) + ".jsonl");
}

std::filesystem::path Paths::probe_base(std::string_view task) const {
    return probes() / file_stem(task);
}

std::filesystem::path Paths::history(std::string_view task) const {
    return probes() / (file_stem(task) + ".history.csv");
}

namespace {

const fs::path& require_file(const std::optional<fs::path>& p, const std::string& what) {
    if (!p) throw ValidationError("config: " + what + " path is not set");
    if (!fs::is_regular_file(*p)) throw ValidationError(what + " not found: " + p->string());
    return *p;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

bool is_xnli(std::string_view task) { return task == "xnli"; }

Corpus load_corpus(const ExperimentConfig& cfg) {
    Corpus c;
    c.train = parse_conll(require_file(cfg.corpus.train, "train corpus"));
    c.dev = parse_conll(require_file(cfg.corpus.dev, "dev corpus"));
    if (cfg.corpus.test) c.test = parse_conll(require_file(cfg.corpus.test, "test corpus"));
    if (cfg.corpus.spr) attach_spr(c, parse_spr(require_file(cfg.corpus.spr, "SPR file")));
    return c;
}

PairSplits load_pairs(const ExperimentConfig& cfg) {
    PairSplits p;
    p.train = parse_xnli(require_file(cfg.corpus.xnli_train, "xnli train file"));
    p.dev = parse_xnli(require_file(cfg.corpus.xnli_dev, "xnli dev file"));
    if (cfg.corpus.xnli_test) p.test = parse_xnli(require_file(cfg.corpus.xnli_test, "xnli test file"));
    return p;
}

// One dataset per configured task, in config order.
std::vector<Dataset> build_datasets(const ExperimentConfig& cfg) {
    bool word_tasks = false;
    bool pair_tasks = false;
    for (const auto& t : cfg.tasks) (is_xnli(t.name) ? pair_tasks : word_tasks) = true;
    const Corpus corpus = word_tasks ? load_corpus(cfg) : Corpus{};
    const PairSplits pairs = pair_tasks ? load_pairs(cfg) : PairSplits{};

    std::vector<Dataset> out;
    for (const auto& t : cfg.tasks) {
        if (is_xnli(t.name)) {
            out.push_back(extract_xnli(pairs));
            continue;
        }
        ExtractConfig ec;
        if (t.max_labels) ec.max_labels = *t.max_labels;
        out.push_back(extract_task(corpus, t.name, ec));
    }
    return out;
}

EmbeddingStore open_store(const ExperimentConfig& cfg) {
    return EmbeddingStore::open(require_file(cfg.embeddings, "embedding store"));
}

struct SynthRun {
    PlantedData data;
    fs::path lef;
};

SynthRun materialize_synth(const ExperimentConfig& cfg, std::ostream& log) {
    const Paths paths{cfg.output_dir};
    SynthRun run{generate_planted(cfg.synth->plant), paths.synth_lef()};
    make_dir(paths.synth());
    write_lef(run.data.embeddings, run.lef);
    save_dataset(run.data.dataset, paths.synth() / (file_stem(run.data.dataset.spec.name) + ".jsonl"));
    log << "synth: " << run.data.embeddings.size() << " sentences, " << run.data.dataset.examples.size()
        << " examples -> " << run.lef.string() << "\n";
    return run;
}

TrainedProbe train_and_save(const Dataset& ds, const EmbeddingStore& store, const TrainConfig& tc, const Paths& paths,
                            std::ostream& log) {
    make_dir(paths.probes());
    TrainedProbe probe = train(ds, store, tc);
    save_probe(probe, paths.probe_base(ds.spec.name));
    write_history_csv(probe, paths.history(ds.spec.name));
    log << "train: " << ds.spec.name << " best epoch " << probe.best_epoch << ", dev " << to_string(ds.spec.metric) << " "
        << format_number(probe.best_dev_metric()) << "\n";
    return probe;
}

TrainedProbe load_trained(const Paths& paths, std::string_view task) {
    const auto files = probe_files(paths.probe_base(task));
    for (const auto& f : {files.metadata, files.blob}) {
        if (!fs::is_regular_file(f)) throw ValidationError("no trained probe for '" + std::string(task) + "': " + f.string() + " not found");
    }
    return load_probe(paths.probe_base(task));
}

// Every probe the config can produce: configured tasks, then the synth task.
std::vector<std::string> probe_names(const ExperimentConfig& cfg) {
    std::vector<std::string> names;
    for (const auto& t : cfg.tasks) names.push_back(t.name);
    if (cfg.synth) names.push_back(cfg.synth->plant.task_name);
    return names;
}

std::vector<MixDistribution> resolve_refs(const std::vector<MixRef>& refs, std::map<std::string, TrainedProbe>& probes,
                                          const Paths& paths) {
    std::vector<MixDistribution> out;
    for (const auto& r : refs) {
        auto it = probes.find(r.task);
        if (it == probes.end()) it = probes.emplace(r.task, load_trained(paths, r.task)).first;
        if (r.role) {
            out.push_back(mix_distribution(it->second, *r.role));
        } else {
            for (auto role : roles_for(it->second.spec.arity)) out.push_back(mix_distribution(it->second, role));
        }
    }
    return out;
}

void require_same_layers(const std::vector<MixDistribution>& ds) {
    for (const auto& d : ds) {
        if (d.n_layers() != ds.front().n_layers()) {
            throw ValidationError("layer count mismatch: " + ds.front().label() + " has " + std::to_string(ds.front().n_layers()) +
                                  " layers, " + d.label() + " has " + std::to_string(d.n_layers()));
        }
    }
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void append_log(const fs::path& root, const std::string& line) {
    std::error_code ec;
    fs::create_directories(root, ec);
    std::ofstream out(root / "run.log", std::ios::app);
    if (out) out << timestamp() << " " << line << "\n";
}

}  // namespace

std::vector<DatasetStats> cmd_ingest(const ExperimentConfig& config, std::ostream& log) {
    if (config.tasks.empty()) throw ValidationError("config lists no tasks to ingest");
    const Paths paths{config.output_dir};
    const auto datasets = build_datasets(config);
    make_dir(paths.datasets());

    std::vector<DatasetStats> stats;
    auto counts = open_out(paths.datasets() / "stats.csv");
    auto labels = open_out(paths.datasets() / "labels.csv");
    counts << "task,kind,arity,n_labels,truncated,train,dev,test,total,dropped\n";
    labels << "task,label,count\n";
    for (const auto& ds : datasets) {
        save_dataset(ds, paths.dataset(ds.spec.name));
        auto s = dataset_stats(ds);
        counts << s.task << ',' << to_string(ds.spec.kind) << ',' << to_string(ds.spec.arity) << ',' << ds.spec.labels.size() << ','
               << (ds.spec.labels.truncated() ? "true" : "false") << ',' << s.counts.train << ',' << s.counts.dev << ','
               << s.counts.test << ',' << s.counts.total() << ','
               << s.dropped.total() << '\n';
        for (const auto& [label, n] : s.histogram) labels << s.task << ',' << label << ',' << n << '\n';
        log << "ingest: " << s.task << " " << s.counts.train << "/" << s.counts.dev << "/" << s.counts.test << "\n";
        stats.push_back(std::move(s));
    }
    if (!counts || !labels) throw IoError("failed writing statistics under " + paths.datasets().string());
    return stats;
}

std::vector<TrainedProbe> cmd_train(const ExperimentConfig& config, std::ostream& log) {
    if (config.tasks.empty() && !config.synth) throw ValidationError("config lists no tasks to train");
    const Paths paths{config.output_dir};
    std::vector<TrainedProbe> out;
    if (!config.tasks.empty()) {
        const auto store = open_store(config);
        const auto datasets = build_datasets(config);
        for (std::size_t i = 0; i < datasets.size(); ++i) {
            out.push_back(train_and_save(datasets[i], store, config.training_for(config.tasks[i]), paths, log));
        }
    }
    if (config.synth) {
        const auto run = materialize_synth(config, log);
        const auto store = EmbeddingStore::open(run.lef);
        out.push_back(train_and_save(run.data.dataset, store, config.synth->training, paths, log));
    }
    return out;
}

std::vector<fs::path> cmd_analyze(const ExperimentConfig& config, std::ostream& log) {
    const Paths paths{config.output_dir};
    std::map<std::string, TrainedProbe> probes;
    ReportInput input;
    if (config.anchors.empty() && config.targets.empty()) {
        std::vector<MixRef> all;
        for (const auto& n : probe_names(config)) all.push_back(MixRef{n, std::nullopt});
        if (all.empty()) throw ValidationError("config lists no probes to analyze");
        input.distributions = resolve_refs(all, probes, paths);
    } else {
        auto targets = resolve_refs(config.targets, probes, paths);
        auto anchors = resolve_refs(config.anchors, probes, paths);
        input.distributions = targets;
        input.distributions.insert(input.distributions.end(), anchors.begin(), anchors.end());
        require_same_layers(input.distributions);
        if (!targets.empty() && !anchors.empty()) input.anchors = anchor_matrix(targets, anchors);
    }
    require_same_layers(input.distributions);
    auto written = render_report(input, paths.analysis());
    for (const auto& d : input.distributions) log << "analyze: " << d.label() << " cog " << format_number(d.cog) << "\n";
    return written;
}

Verdict cmd_synth(const ExperimentConfig& config, std::ostream& log) {
    if (!config.synth) throw ValidationError("config has no synth section");
    const Paths paths{config.output_dir};
    const auto run = materialize_synth(config, log);
    const auto store = EmbeddingStore::open(run.lef);
    const auto probe = train_and_save(run.data.dataset, store, config.synth->training, paths, log);
    const Verdict verdict = verify_localization(probe, config.synth->plant, config.synth->thresholds);

    nlohmann::json j;
    j["task"] = probe.spec.name;
    j["passed"] = verdict.passed();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : verdict.checks) {
        j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        log << "synth: " << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    }
    ReportInput input;
    for (auto role : roles_for(probe.spec.arity)) input.distributions.push_back(mix_distribution(probe, role));
    render_report(input, paths.synth() / "analysis");
    write_json_file(j, paths.synth() / "verdict.json");
    return verdict;
}

std::vector<fs::path> cmd_report(const ExperimentConfig& config, std::ostream& log) {
    const Paths paths{config.output_dir};
    make_dir(paths.report());
    std::vector<fs::path> written;

    const fs::path scores_path = paths.report() / "scores.csv";
    auto scores = open_out(scores_path);
    scores << "task,metric,best_epoch,dev,test\n";
    auto row = [&](const TrainedProbe& probe, std::optional<double> test) {
        scores << probe.spec.name << ',' << to_string(probe.spec.metric) << ',' << probe.best_epoch << ','
               << format_number(probe.best_dev_metric()) << ',' << (test ? format_number(*test) : "") << '\n';
        log << "report: " << probe.spec.name << " dev " << format_number(probe.best_dev_metric()) << "\n";
    };

    std::optional<EmbeddingStore> store;
    if (!config.tasks.empty() || !config.similarity_sentences.empty()) store = open_store(config);
    if (!config.tasks.empty()) {
        const auto datasets = build_datasets(config);
        for (const auto& ds : datasets) {
            const auto probe = load_trained(paths, ds.spec.name);
            std::optional<double> test;
            if (ds.counts().test > 0) test = evaluate(probe, ds, Split::test, *store);
            row(probe, test);
        }
    }
    if (config.synth) {
        const auto probe = load_trained(paths, config.synth->plant.task_name);
        const auto data = load_dataset(paths.synth() / (file_stem(probe.spec.name) + ".jsonl"));
        const auto synth_store = EmbeddingStore::open(paths.synth_lef());
        std::optional<double> test;
        if (data.counts().test > 0) test = evaluate(probe, data, Split::test, synth_store);
        row(probe, test);
    }
    if (!scores) throw IoError("cannot write " + scores_path.string());
    scores.close();
    written.push_back(scores_path);

    if (!config.similarity_sentences.empty()) {
        ReportInput input;
        for (const auto& id : config.similarity_sentences) {
            if (!store->contains(id)) throw ValidationError("similarity sentence '" + id + "' not in " + store->path().string());
            input.similarities.push_back(intra_sentence_similarity(store->lookup(id)));
        }
        auto files = render_report(input, paths.report() / "similarity");
        written.insert(written.end(), files.begin(), files.end());
    }
    return written;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Layer-wise edge probing for frozen encoders"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    app.add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "override the output directory");

    app.add_subcommand("ingest", "extract probing datasets and write label statistics");
    app.add_subcommand("train", "train one probe per task");
    app.add_subcommand("analyze", "mix distributions, centers of gravity, anchor KL");
    app.add_subcommand("synth", "planted-layer self-check");
    app.add_subcommand("report", "score table and similarity matrices");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    ExperimentConfig config;
    try {
        config = load_config(config_path);
        if (out_dir) config.output_dir = fs::absolute(*out_dir);
        if (seed) config.set_seed(*seed);
    } catch (const Error& e) {
        err << "edgeprobe: " << e.what() << "\n";
        return 1;
    }

    int code = 0;
    try {
        if (command == "ingest") {
            cmd_ingest(config, out);
        } else if (command == "train") {
            cmd_train(config, out);
        } else if (command == "analyze") {
            cmd_analyze(config, out);
        } else if (command == "synth") {
            if (!cmd_synth(config, out).passed()) {
                err << "edgeprobe: synth verdict failed (see " << (Paths{config.output_dir}.synth() / "verdict.json").string() << ")\n";
                code = 2;
            }
        } else {
            cmd_report(config, out);
        }
    } catch (const ValidationError& e) {
        err << "edgeprobe " << command << ": " << e.what() << "\n";
        code = 1;
    } catch (const NotFoundError& e) {
        err << "edgeprobe " << command << ": " << e.what() << "\n";
        code = 1;
    } catch (const std::exception& e) {
        err << "edgeprobe " << command << ": " << e.what() << "\n";
        code = 2;
    }
    append_log(config.output_dir, command + " exit " + std::to_string(code));
    return code;
}

}  // namespace edgeprobe
