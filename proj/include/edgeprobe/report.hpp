#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgeprobe/analysis.hpp"

namespace edgeprobe {

struct ReportInput {
    std::vector<MixDistribution> distributions;
    std::optional<AnchorMatrix> anchors;
    std::vector<SimilarityMatrices> similarities;
};

// Writes, under out_dir:
//   mix_weights.csv  task,role,layer,weight
//   cog.csv          task,role,cog
//   anchor_kl.csv    target,anchor,kl_nats          (when anchors are given)
//   report.json      everything above plus the KL convention
//   mix_<task>_<role>.svg per distribution, layer_mix.svg, anchor_kl.svg,
//   similarity_<sentence>.csv/.svg per similarity input
// Numbers are printed with 9 significant digits. Returns the files written.
std::vector<std::filesystem::path> render_report(const ReportInput& input, const std::filesystem::path& out_dir);

// "%.9g"
std::string format_number(double v);

// File-name-safe variant of a task or sentence name.
std::string file_stem(std::string_view name);

}  // namespace edgeprobe
