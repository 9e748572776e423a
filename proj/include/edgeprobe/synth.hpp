#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edgeprobe/lef.hpp"
#include "edgeprobe/task.hpp"
#include "edgeprobe/trainer.hpp"

namespace edgeprobe {

// Synthetic layered embeddings where the label is written into one known
// layer of the src word (and, for binary tasks, another layer of the tgt word).
struct PlantSpec {
    std::uint32_t n_layers = 13;
    std::uint32_t dim = 32;
    std::uint32_t n_sentences = 500;
    std::uint32_t words_per_sentence = 10;
    std::uint32_t examples_per_sentence = 4;
    TaskKind kind = TaskKind::classification;
    Arity arity = Arity::unary;
    std::uint32_t plant_src_layer = 6;
    std::optional<std::uint32_t> plant_tgt_layer;
    std::uint32_t n_classes = 4;
    double value_min = 1.0;  // regression targets are uniform on [value_min, value_max]
    double value_max = 5.0;
    double noise_sigma = 0.1;
    double dev_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
    std::string task_name = "synth";

    void validate() const;
    std::size_t n_examples() const { return std::size_t(n_sentences) * examples_per_sentence; }
};

struct PlantedData {
    std::vector<LayeredSentenceEmbedding> embeddings;
    Dataset dataset;
};

PlantedData generate_planted(const PlantSpec& spec);

// Default step size for planted-layer runs. The probe-training default (1e-3)
// moves mix logits too little in 20 epochs to concentrate on one layer.
inline constexpr double kSynthLearningRate = 0.3;

struct LocalizationThresholds {
    double cog_tolerance = 0.75;
    double min_accuracy = 0.95;
    double max_mse = 0.05;  // regression plants; targets span value_max - value_min
};

struct VerdictCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct Verdict {
    std::vector<VerdictCheck> checks;
    bool passed() const;
};

Verdict verify_localization(const TrainedProbe& probe, const PlantSpec& spec, const LocalizationThresholds& thresholds);

}  // namespace edgeprobe
