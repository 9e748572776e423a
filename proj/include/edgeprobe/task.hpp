#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace edgeprobe {

enum class TaskKind { classification, regression };
enum class Arity { unary, binary, sentence };
enum class Metric { accuracy, mse };
enum class Split { train, dev, test };

inline constexpr std::size_t kDefaultMaxLabels = 250;
inline constexpr std::size_t kUnlimitedLabels = std::numeric_limits<std::size_t>::max();

std::string_view to_string(TaskKind kind);
std::string_view to_string(Arity arity);
std::string_view to_string(Metric metric);
std::string_view to_string(Split split);
TaskKind parse_task_kind(std::string_view text);
Arity parse_arity(std::string_view text);
Metric parse_metric(std::string_view text);
Split parse_split(std::string_view text);

constexpr Metric metric_for(TaskKind kind) {
    return kind == TaskKind::classification ? Metric::accuracy : Metric::mse;
}

// Ordered label inventory: descending training frequency, ties lexicographic.
class LabelVocab {
public:
    LabelVocab() = default;
    LabelVocab(std::vector<std::string> labels, bool truncated);

    const std::vector<std::string>& labels() const noexcept { return labels_; }
    bool truncated() const noexcept { return truncated_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    std::optional<std::size_t> index_of(std::string_view label) const;
    bool contains(std::string_view label) const { return index_of(label).has_value(); }

    bool operator==(const LabelVocab&) const = default;

private:
    std::vector<std::string> labels_;
    bool truncated_ = false;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::classification;
    Arity arity = Arity::unary;
    LabelVocab labels;  // classification only
    Metric metric = Metric::accuracy;

    // kind/metric agreement; regression specs carry no labels.
    void validate() const;
    std::size_t output_dim() const { return kind == TaskKind::regression ? 1 : labels.size(); }
};

using Label = std::variant<std::string, double>;

struct ExampleRecord {
    std::string sentence_id;
    std::uint32_t src = 0;
    std::optional<std::uint32_t> tgt;
    Label label;
    Split split = Split::train;

    const std::string& class_label() const { return std::get<std::string>(label); }
    double value() const { return std::get<double>(label); }
    bool operator==(const ExampleRecord&) const = default;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test = 0;

    std::size_t total() const { return train + dev + test; }
    std::size_t& operator[](Split s);
    std::size_t operator[](Split s) const;
    bool operator==(const SplitCounts&) const = default;
};

struct Dataset {
    TaskSpec spec;
    std::vector<ExampleRecord> examples;
    SplitCounts dropped;  // out-of-vocabulary examples removed at extraction

    SplitCounts counts() const;
    std::vector<const ExampleRecord*> split(Split s) const;

    // Arity/label-type agreement, vocabulary membership, disjoint splits.
    void validate() const;
};

struct DropReport {
    SplitCounts dropped;
    SplitCounts retained;
};

// Vocabulary from the training-split members of `examples`; other splits are
// ignored. Throws ValidationError("no training data") if none are present.
LabelVocab build_label_vocab(std::span<const ExampleRecord> examples, std::size_t max_size);

// Removes every example whose label falls outside `vocab` and installs the vocab.
DropReport restrict_to_vocab(Dataset& dataset, LabelVocab vocab);

// build_label_vocab + restrict_to_vocab for classification datasets.
DropReport finalize_labels(Dataset& dataset, std::size_t max_size);

struct DatasetStats {
    std::string task;
    SplitCounts counts;
    SplitCounts dropped;
    std::map<std::string, std::size_t> histogram;  // regression values formatted with %g
};

DatasetStats dataset_stats(const Dataset& dataset);

// JSON-lines: one ExampleRecord per line. The TaskSpec goes to a sidecar
// "<stem>.task.json" next to the records file.
void write_examples_jsonl(const std::vector<ExampleRecord>& examples, const std::filesystem::path& path);
std::vector<ExampleRecord> read_examples_jsonl(const std::filesystem::path& path);

void save_dataset(const Dataset& dataset, const std::filesystem::path& jsonl_path);
Dataset load_dataset(const std::filesystem::path& jsonl_path);
std::filesystem::path task_sidecar_path(const std::filesystem::path& jsonl_path);

}  // namespace edgeprobe
