#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgeprobe/adam.hpp"
#include "edgeprobe/lef.hpp"
#include "edgeprobe/probe.hpp"
#include "edgeprobe/task.hpp"

namespace edgeprobe {

struct TrainConfig {
    std::uint64_t seed = 0;
    int epochs = 20;
    std::size_t batch_size = 32;
    AdamConfig adam;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_metric = 0.0;
    double dev_loss = 0.0;
    bool operator==(const EpochRecord&) const = default;
};

struct TrainedProbe {
    ProbeParams params;  // best-dev epoch
    TaskSpec spec;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    std::uint64_t seed = 0;

    double best_dev_metric() const;
};

// Per-example layer stacks resolved from the store: words through their first
// wordpiece, sentence-arity examples through wordpiece 0. Each distinct
// (sentence, wordpiece) is copied once and shared by the examples using it.
class FeatureBank {
public:
    static FeatureBank build(const Dataset& dataset, const EmbeddingStore& store);

    std::size_t n_layers() const noexcept { return n_layers_; }
    std::size_t dim() const noexcept { return dim_; }

    // Views stay valid for the lifetime of the bank.
    std::vector<ProbeExample> examples(Split split) const;

private:
    struct Slot {
        std::size_t src = 0;
        std::size_t tgt = 0;
        bool has_tgt = false;
        Target target;
        Split split = Split::train;
    };

    LayerStack stack(std::size_t offset) const;

    std::size_t n_layers_ = 0;
    std::size_t dim_ = 0;
    std::vector<float> pool_;
    std::vector<Slot> slots_;
};

// Encodes a dataset label against the task's vocabulary.
Target encode_target(const TaskSpec& spec, const ExampleRecord& example);

// Accuracy (argmax, lowest index on ties) or mean squared error.
double evaluate(const ProbeParams& params, TaskKind kind, std::span<const ProbeExample> examples);
double evaluate(const TrainedProbe& probe, const Dataset& dataset, Split split, const EmbeddingStore& store);

// Reported metric improves when accuracy rises or MSE falls.
bool metric_improves(Metric metric, double candidate, double incumbent);

// Mean training objective (cross-entropy in nats, or squared error).
double mean_loss(const ProbeParams& params, TaskKind kind, std::span<const ProbeExample> examples);

TrainedProbe train(const Dataset& dataset, const FeatureBank& features, const TrainConfig& config);
TrainedProbe train(const Dataset& dataset, const EmbeddingStore& store, const TrainConfig& config);

// "<base>.probe.json" (metadata) + "<base>.probe.bin" (float32 parameters).
struct ProbeFiles {
    std::filesystem::path metadata;
    std::filesystem::path blob;
};

ProbeFiles probe_files(const std::filesystem::path& base);
ProbeFiles save_probe(const TrainedProbe& probe, const std::filesystem::path& base);
TrainedProbe load_probe(const std::filesystem::path& base);

void write_history_csv(const TrainedProbe& probe, const std::filesystem::path& path);

}  // namespace edgeprobe
