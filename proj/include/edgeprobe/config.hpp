#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeprobe/analysis.hpp"
#include "edgeprobe/synth.hpp"
#include "edgeprobe/trainer.hpp"

namespace edgeprobe {

struct TaskEntry {
    std::string name;
    std::optional<std::size_t> max_labels;
    std::optional<int> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
};

// "task" (every role of the probe) or "task:role".
struct MixRef {
    std::string task;
    std::optional<PositionRole> role;

    static MixRef parse(std::string_view text);
};

struct CorpusPaths {
    std::optional<std::filesystem::path> train;
    std::optional<std::filesystem::path> dev;
    std::optional<std::filesystem::path> test;
    std::optional<std::filesystem::path> spr;
    std::optional<std::filesystem::path> xnli_train;
    std::optional<std::filesystem::path> xnli_dev;
    std::optional<std::filesystem::path> xnli_test;
};

struct SynthSection {
    PlantSpec plant;
    LocalizationThresholds thresholds;
    TrainConfig training;
};

// One declarative JSON file per experiment. Relative paths resolve against
// the directory holding the config file.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    CorpusPaths corpus;
    std::optional<std::filesystem::path> embeddings;
    std::vector<TaskEntry> tasks;
    TrainConfig training;
    std::vector<MixRef> anchors;
    std::vector<MixRef> targets;
    std::vector<std::string> similarity_sentences;
    std::optional<SynthSection> synth;

    // Task names known, anchor/target tasks drawn from the task list.
    void validate() const;

    TrainConfig training_for(const TaskEntry& task) const;
    const TaskEntry* find_task(std::string_view name) const;

    // Seed overrides propagate to every seeded component.
    void set_seed(std::uint64_t seed);
};

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace edgeprobe
