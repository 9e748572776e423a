#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "edgeprobe/config.hpp"
#include "edgeprobe/synth.hpp"

namespace edgeprobe {

// Output layout under ExperimentConfig::output_dir:
//   datasets/<task>.jsonl (+ .task.json), datasets/stats.csv, datasets/labels.csv
//   probes/<task>.probe.json, probes/<task>.probe.bin, probes/<task>.history.csv
//   analysis/...   (render_report output)
//   synth/embeddings.lef, synth/<task>.jsonl, synth/verdict.json
//   report/scores.csv, report/similarity_*.csv|svg
//   run.log        the only file that carries timestamps

struct Paths {
    std::filesystem::path root;

    std::filesystem::path datasets() const { return root / "datasets"; }
    std::filesystem::path dataset(std::string_view task) const;
    std::filesystem::path probes() const { return root / "probes"; }
    std::filesystem::path probe_base(std::string_view task) const;
    std::filesystem::path history(std::string_view task) const;
    std::filesystem::path analysis() const { return root / "analysis"; }
    std::filesystem::path synth() const { return root / "synth"; }
    std::filesystem::path synth_lef() const { return synth() / "embeddings.lef"; }
    std::filesystem::path report() const { return root / "report"; }
    std::filesystem::path log() const { return root / "run.log"; }
};

std::vector<DatasetStats> cmd_ingest(const ExperimentConfig& config, std::ostream& log);
std::vector<TrainedProbe> cmd_train(const ExperimentConfig& config, std::ostream& log);
std::vector<std::filesystem::path> cmd_analyze(const ExperimentConfig& config, std::ostream& log);
Verdict cmd_synth(const ExperimentConfig& config, std::ostream& log);
std::vector<std::filesystem::path> cmd_report(const ExperimentConfig& config, std::ostream& log);

// Exit codes: 0 success, 1 validation/config/usage error, 2 runtime failure
// (including a failed synth verdict).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edgeprobe
