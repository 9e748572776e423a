#include "edgeprobe/task.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>
#include <unordered_map>

#include "edgeprobe/error.hpp"
#include "edgeprobe/json_io.hpp"

namespace edgeprobe {

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::classification ? "classification" : "regression";
}

std::string_view to_string(Arity arity) {
    switch (arity) {
    case Arity::unary: return "unary";
    case Arity::binary: return "binary";
    case Arity::sentence: return "sentence";
    }
    return "?";
}

std::string_view to_string(Metric metric) { return metric == Metric::accuracy ? "accuracy" : "mse"; }

std::string_view to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    }
    return "?";
}

TaskKind parse_task_kind(std::string_view text) {
    if (text == "classification") return TaskKind::classification;
    if (text == "regression") return TaskKind::regression;
    throw ValidationError("unknown task kind '" + std::string(text) + "'");
}

Arity parse_arity(std::string_view text) {
    if (text == "unary") return Arity::unary;
    if (text == "binary") return Arity::binary;
    if (text == "sentence") return Arity::sentence;
    throw ValidationError("unknown arity '" + std::string(text) + "'");
}

Metric parse_metric(std::string_view text) {
    if (text == "accuracy") return Metric::accuracy;
    if (text == "mse") return Metric::mse;
    throw ValidationError("unknown metric '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "dev") return Split::dev;
    if (text == "test") return Split::test;
    throw ValidationError("unknown split '" + std::string(text) + "'");
}

//
// LabelVocab
//

LabelVocab::LabelVocab(std::vector<std::string> labels, bool truncated)
    : labels_(std::move(labels))
    , truncated_(truncated) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (!index_.emplace(labels_[i], i).second) {
            throw ValidationError("duplicate label '" + labels_[i] + "' in vocabulary");
        }
    }
}

std::optional<std::size_t> LabelVocab::index_of(std::string_view label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void TaskSpec::validate() const {
    if (name.empty()) throw ValidationError("task spec without a name");
    if (metric != metric_for(kind)) {
        throw ValidationError("task '" + name + "': metric " + std::string(to_string(metric)) +
                              " does not match kind " + std::string(to_string(kind)));
    }
    if (kind == TaskKind::regression && !labels.empty()) {
        throw ValidationError("task '" + name + "': regression task carries a label vocabulary");
    }
}

//
// Dataset
//

std::size_t& SplitCounts::operator[](Split s) {
    switch (s) {
    case Split::train: return train;
    case Split::dev: return dev;
    case Split::test: return test;
    }
    return train;
}

std::size_t SplitCounts::operator[](Split s) const { return const_cast<SplitCounts&>(*this)[s]; }

SplitCounts Dataset::counts() const {
    SplitCounts c;
    for (const auto& ex : examples) ++c[ex.split];
    return c;
}

std::vector<const ExampleRecord*> Dataset::split(Split s) const {
    std::vector<const ExampleRecord*> out;
    for (const auto& ex : examples) {
        if (ex.split == s) out.push_back(&ex);
    }
    return out;
}

void Dataset::validate() const {
    spec.validate();
    std::set<std::tuple<std::string, std::uint32_t, std::int64_t>> seen;
    for (const auto& ex : examples) {
        const std::string where = "task '" + spec.name + "', sentence '" + ex.sentence_id + "'";
        if (spec.arity == Arity::binary && !ex.tgt) {
            throw ValidationError(where + ": binary task example without tgt");
        }
        if (spec.arity != Arity::binary && ex.tgt) {
            throw ValidationError(where + ": " + std::string(to_string(spec.arity)) + " task example with tgt");
        }
        if (spec.kind == TaskKind::classification) {
            if (!std::holds_alternative<std::string>(ex.label)) {
                throw ValidationError(where + ": classification example with numeric label");
            }
            if (!spec.labels.empty() && !spec.labels.contains(ex.class_label())) {
                throw ValidationError(where + ": label '" + ex.class_label() + "' not in vocabulary");
            }
        } else if (!std::holds_alternative<double>(ex.label)) {
            throw ValidationError(where + ": regression example with string label");
        }
        const std::int64_t tgt = ex.tgt ? static_cast<std::int64_t>(*ex.tgt) : -1;
        if (!seen.emplace(ex.sentence_id, ex.src, tgt).second) {
            throw ValidationError(where + ": duplicate example (src " + std::to_string(ex.src) + ")");
        }
    }
}

LabelVocab build_label_vocab(std::span<const ExampleRecord> examples, std::size_t max_size) {
    if (max_size == 0) throw ValidationError("label vocabulary size must be at least 1");
    std::unordered_map<std::string, std::size_t> freq;
    std::size_t n_train = 0;
    for (const auto& ex : examples) {
        if (ex.split != Split::train) continue;
        ++n_train;
        ++freq[ex.class_label()];
    }
    if (n_train == 0) throw ValidationError("no training data");

    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    const bool truncated = ranked.size() > max_size;
    if (truncated) ranked.resize(max_size);

    std::vector<std::string> labels;
    labels.reserve(ranked.size());
    for (auto& [label, count] : ranked) labels.push_back(std::move(label));
    return LabelVocab(std::move(labels), truncated);
}

DropReport restrict_to_vocab(Dataset& dataset, LabelVocab vocab) {
    DropReport report;
    std::vector<ExampleRecord> kept;
    kept.reserve(dataset.examples.size());
    for (auto& ex : dataset.examples) {
        if (vocab.contains(ex.class_label())) {
            ++report.retained[ex.split];
            kept.push_back(std::move(ex));
        } else {
            ++report.dropped[ex.split];
        }
    }
    dataset.examples = std::move(kept);
    dataset.spec.labels = std::move(vocab);
    return report;
}

DropReport finalize_labels(Dataset& dataset, std::size_t max_size) {
    if (dataset.spec.kind != TaskKind::classification) {
        throw ValidationError("task '" + dataset.spec.name + "' is not a classification task");
    }
    return restrict_to_vocab(dataset, build_label_vocab(dataset.examples, max_size));
}

DatasetStats dataset_stats(const Dataset& dataset) {
    DatasetStats stats;
    stats.task = dataset.spec.name;
    stats.counts = dataset.counts();
    stats.dropped = dataset.dropped;
    for (const auto& ex : dataset.examples) {
        if (const auto* s = std::get_if<std::string>(&ex.label)) {
            ++stats.histogram[*s];
        } else {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%g", std::get<double>(ex.label));
            ++stats.histogram[buf];
        }
    }
    return stats;
}

//
// JSON
//

nlohmann::json to_json(const TaskSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["kind"] = to_string(spec.kind);
    j["arity"] = to_string(spec.arity);
    j["metric"] = to_string(spec.metric);
    j["labels"] = spec.labels.labels();
    j["truncated"] = spec.labels.truncated();
    return j;
}

TaskSpec task_spec_from_json(const nlohmann::json& j) {
    try {
        TaskSpec spec;
        spec.name = j.at("name").get<std::string>();
        spec.kind = parse_task_kind(j.at("kind").get<std::string>());
        spec.arity = parse_arity(j.at("arity").get<std::string>());
        spec.metric = parse_metric(j.at("metric").get<std::string>());
        spec.labels = LabelVocab(j.value("labels", std::vector<std::string>{}), j.value("truncated", false));
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed task spec: ") + e.what());
    }
}

nlohmann::json to_json(const ExampleRecord& record) {
    nlohmann::json j;
    j["sentence_id"] = record.sentence_id;
    j["src"] = record.src;
    if (record.tgt) j["tgt"] = *record.tgt;
    if (const auto* s = std::get_if<std::string>(&record.label)) {
        j["label"] = *s;
    } else {
        j["label"] = std::get<double>(record.label);
    }
    j["split"] = to_string(record.split);
    return j;
}

ExampleRecord example_from_json(const nlohmann::json& j) {
    ExampleRecord ex;
    ex.sentence_id = j.at("sentence_id").get<std::string>();
    ex.src = j.at("src").get<std::uint32_t>();
    if (auto it = j.find("tgt"); it != j.end() && !it->is_null()) ex.tgt = it->get<std::uint32_t>();
    const auto& label = j.at("label");
    if (label.is_string()) {
        ex.label = label.get<std::string>();
    } else if (label.is_number()) {
        ex.label = label.get<double>();
    } else {
        throw ValidationError("label must be a string or a number");
    }
    ex.split = parse_split(j.at("split").get<std::string>());
    return ex;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_examples_jsonl(const std::vector<ExampleRecord>& examples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

std::vector<ExampleRecord> read_examples_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<ExampleRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(example_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string(), lineno, e.what());
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), lineno, e.what());
        }
    }
    return out;
}

std::filesystem::path task_sidecar_path(const std::filesystem::path& jsonl_path) {
    auto p = jsonl_path;
    p.replace_extension(".task.json");
    return p;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& jsonl_path) {
    write_examples_jsonl(dataset.examples, jsonl_path);
    write_json_file(to_json(dataset.spec), task_sidecar_path(jsonl_path));
}

Dataset load_dataset(const std::filesystem::path& jsonl_path) {
    Dataset ds;
    ds.spec = task_spec_from_json(read_json_file(task_sidecar_path(jsonl_path)));
    ds.examples = read_examples_jsonl(jsonl_path);
    ds.validate();
    return ds;
}

}  // namespace edgeprobe
