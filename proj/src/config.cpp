#include "edgeprobe/config.hpp"

#include <algorithm>
#include <initializer_list>

#include "edgeprobe/corpus.hpp"
#include "edgeprobe/error.hpp"
#include "edgeprobe/json_io.hpp"

namespace edgeprobe {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& section) {
    if (!j.is_object()) throw ValidationError("config: '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError("config: unknown key '" + key + "' in " + section);
        }
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::optional<std::filesystem::path> opt_path(const json& j, const char* key, const std::filesystem::path& base) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return resolve(base, j.at(key).get<std::string>());
}

void read_training(const json& j, TrainConfig& t, const std::string& section) {
    check_keys(j, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon"}, section);
    if (j.contains("epochs")) t.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("learning_rate")) t.adam.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("beta1")) t.adam.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) t.adam.beta2 = j.at("beta2").get<double>();
    if (j.contains("epsilon")) t.adam.epsilon = j.at("epsilon").get<double>();
}

PlantSpec read_plant(const json& j) {
    PlantSpec p;
    if (j.contains("n_layers")) p.n_layers = j.at("n_layers").get<std::uint32_t>();
    if (j.contains("dim")) p.dim = j.at("dim").get<std::uint32_t>();
    if (j.contains("n_sentences")) p.n_sentences = j.at("n_sentences").get<std::uint32_t>();
    if (j.contains("words_per_sentence")) p.words_per_sentence = j.at("words_per_sentence").get<std::uint32_t>();
    if (j.contains("examples_per_sentence")) p.examples_per_sentence = j.at("examples_per_sentence").get<std::uint32_t>();
    if (j.contains("kind")) p.kind = parse_task_kind(j.at("kind").get<std::string>());
    if (j.contains("arity")) p.arity = parse_arity(j.at("arity").get<std::string>());
    if (j.contains("plant_src_layer")) p.plant_src_layer = j.at("plant_src_layer").get<std::uint32_t>();
    if (j.contains("plant_tgt_layer") && !j.at("plant_tgt_layer").is_null()) {
        p.plant_tgt_layer = j.at("plant_tgt_layer").get<std::uint32_t>();
    }
    if (j.contains("n_classes")) p.n_classes = j.at("n_classes").get<std::uint32_t>();
    if (j.contains("value_min")) p.value_min = j.at("value_min").get<double>();
    if (j.contains("value_max")) p.value_max = j.at("value_max").get<double>();
    if (j.contains("noise_sigma")) p.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("dev_fraction")) p.dev_fraction = j.at("dev_fraction").get<double>();
    if (j.contains("test_fraction")) p.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("task_name")) p.task_name = j.at("task_name").get<std::string>();
    return p;
}

}  // namespace

MixRef MixRef::parse(std::string_view text) {
    MixRef ref;
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        ref.task = std::string(text);
    } else {
        ref.task = std::string(text.substr(0, colon));
        ref.role = parse_position_role(text.substr(colon + 1));
    }
    if (ref.task.empty()) throw ValidationError("empty task in mix reference '" + std::string(text) + "'");
    return ref;
}

void ExperimentConfig::validate() const {
    for (const auto& t : tasks) {
        if (!is_known_task(t.name)) throw ValidationError("unknown task '" + t.name + "'");
        if (t.max_labels && *t.max_labels == 0) throw ValidationError("task '" + t.name + "': max_labels must be >= 1");
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        for (std::size_t k = i + 1; k < tasks.size(); ++k) {
            if (tasks[i].name == tasks[k].name) throw ValidationError("task '" + tasks[i].name + "' listed twice");
        }
    }
    for (const auto* refs : {&anchors, &targets}) {
        for (const auto& r : *refs) {
            if (!find_task(r.task)) throw ValidationError("analysis refers to '" + r.task + "', which is not in the task list");
        }
    }
    if (training.epochs < 1 || training.batch_size < 1 || !(training.adam.learning_rate > 0.0)) {
        throw ValidationError("training: epochs, batch_size and learning_rate must be positive");
    }
    if (synth) synth->plant.validate();
}

TrainConfig ExperimentConfig::training_for(const TaskEntry& task) const {
    TrainConfig t = training;
    if (task.epochs) t.epochs = *task.epochs;
    if (task.batch_size) t.batch_size = *task.batch_size;
    if (task.learning_rate) t.adam.learning_rate = *task.learning_rate;
    return t;
}

const TaskEntry* ExperimentConfig::find_task(std::string_view name) const {
    for (const auto& t : tasks) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

void ExperimentConfig::set_seed(std::uint64_t s) {
    seed = s;
    training.seed = s;
    if (synth) {
        synth->plant.seed = s;
        synth->training.seed = s;
    }
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    try {
        check_keys(j, {"seed", "output_dir", "corpus", "embeddings", "tasks", "training", "analysis", "report", "synth"},
                   "config");
        if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
        else cfg.output_dir = base_dir / "out";
        cfg.embeddings = opt_path(j, "embeddings", base_dir);

        if (j.contains("corpus")) {
            const auto& c = j.at("corpus");
            check_keys(c, {"train", "dev", "test", "spr", "xnli"}, "corpus");
            cfg.corpus.train = opt_path(c, "train", base_dir);
            cfg.corpus.dev = opt_path(c, "dev", base_dir);
            cfg.corpus.test = opt_path(c, "test", base_dir);
            cfg.corpus.spr = opt_path(c, "spr", base_dir);
            if (c.contains("xnli")) {
                const auto& x = c.at("xnli");
                check_keys(x, {"train", "dev", "test"}, "corpus.xnli");
                cfg.corpus.xnli_train = opt_path(x, "train", base_dir);
                cfg.corpus.xnli_dev = opt_path(x, "dev", base_dir);
                cfg.corpus.xnli_test = opt_path(x, "test", base_dir);
            }
        }

        if (j.contains("tasks")) {
            for (const auto& t : j.at("tasks")) {
                TaskEntry e;
                if (t.is_string()) {
                    e.name = t.get<std::string>();
                } else {
                    check_keys(t, {"name", "max_labels", "epochs", "batch_size", "learning_rate"}, "tasks[]");
                    e.name = t.at("name").get<std::string>();
                    if (t.contains("max_labels")) e.max_labels = t.at("max_labels").get<std::size_t>();
                    if (t.contains("epochs")) e.epochs = t.at("epochs").get<int>();
                    if (t.contains("batch_size")) e.batch_size = t.at("batch_size").get<std::size_t>();
                    if (t.contains("learning_rate")) e.learning_rate = t.at("learning_rate").get<double>();
                }
                cfg.tasks.push_back(std::move(e));
            }
        }

        if (j.contains("training")) read_training(j.at("training"), cfg.training, "training");

        if (j.contains("analysis")) {
            const auto& a = j.at("analysis");
            check_keys(a, {"anchors", "targets"}, "analysis");
            for (const auto& s : a.value("anchors", json::array())) cfg.anchors.push_back(MixRef::parse(s.get<std::string>()));
            for (const auto& s : a.value("targets", json::array())) cfg.targets.push_back(MixRef::parse(s.get<std::string>()));
        }

        if (j.contains("report")) {
            const auto& r = j.at("report");
            check_keys(r, {"similarity_sentences"}, "report");
            cfg.similarity_sentences = r.value("similarity_sentences", std::vector<std::string>{});
        }

        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            check_keys(s,
                       {"n_layers", "dim", "n_sentences", "words_per_sentence", "examples_per_sentence", "kind", "arity",
                        "plant_src_layer", "plant_tgt_layer", "n_classes", "value_min", "value_max", "noise_sigma",
                        "dev_fraction", "test_fraction", "task_name", "thresholds", "training"},
                       "synth");
            SynthSection section;
            section.plant = read_plant(s);
            section.training = cfg.training;
            section.training.adam.learning_rate = kSynthLearningRate;
            if (s.contains("training")) read_training(s.at("training"), section.training, "synth.training");
            if (s.contains("thresholds")) {
                const auto& th = s.at("thresholds");
                check_keys(th, {"cog_tolerance", "min_accuracy", "max_mse"}, "synth.thresholds");
                section.thresholds.cog_tolerance = th.value("cog_tolerance", section.thresholds.cog_tolerance);
                section.thresholds.min_accuracy = th.value("min_accuracy", section.thresholds.min_accuracy);
                section.thresholds.max_mse = th.value("max_mse", section.thresholds.max_mse);
            }
            cfg.synth = std::move(section);
        }

        cfg.set_seed(j.value("seed", std::uint64_t{0}));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
    return parse_config(read_json_file(path), std::filesystem::absolute(path).parent_path());
}

}  // namespace edgeprobe
