#include "edgeprobe/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "edgeprobe/error.hpp"
#include "edgeprobe/json_io.hpp"

namespace edgeprobe {

namespace {

constexpr char kBlobMagic[4] = {'E', 'P', 'B', '1'};

// Fisher-Yates with rejection sampling on mt19937_64, so shuffles do not depend
// on the standard library's distribution implementations.
void seeded_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = rng();
        } while (r >= limit);
        std::swap(v[i - 1], v[r % bound]);
    }
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

double TrainedProbe::best_dev_metric() const {
    for (const auto& r : history) {
        if (r.epoch == best_epoch) return r.dev_metric;
    }
    throw ValidationError("probe '" + spec.name + "' has no history entry for its best epoch");
}

//
// FeatureBank
//

Target encode_target(const TaskSpec& spec, const ExampleRecord& example) {
    if (spec.kind == TaskKind::regression) return example.value();
    const auto idx = spec.labels.index_of(example.class_label());
    if (!idx) throw ValidationError("label '" + example.class_label() + "' not in the vocabulary of '" + spec.name + "'");
    return *idx;
}

FeatureBank FeatureBank::build(const Dataset& dataset, const EmbeddingStore& store) {
    FeatureBank bank;
    bank.n_layers_ = store.n_layers();
    bank.dim_ = store.dim();

    std::map<std::string, std::vector<const ExampleRecord*>> by_sentence;
    for (const auto& ex : dataset.examples) by_sentence[ex.sentence_id].push_back(&ex);

    std::unordered_map<const ExampleRecord*, Slot> slot_of;
    for (const auto& [sid, exs] : by_sentence) {
        if (!store.contains(sid)) throw NotFoundError("sentence '" + sid + "' missing from embedding store " + store.path().string());
        const auto emb = store.lookup(sid);
        std::map<std::uint32_t, std::size_t> wp_offset;

        auto resolve = [&](std::uint32_t position) -> std::size_t {
            std::uint32_t wp = 0;
            if (dataset.spec.arity != Arity::sentence) {
                if (position >= emb.n_words()) {
                    throw ValidationError("sentence '" + sid + "': word " + std::to_string(position) + " beyond its " +
                                          std::to_string(emb.n_words()) + " aligned words");
                }
                wp = emb.word_to_first_wp[position];
            } else if (position != 0) {
                throw ValidationError("sentence '" + sid + "': sentence-level example must use slot 0");
            }
            auto [it, fresh] = wp_offset.emplace(wp, bank.pool_.size());
            if (fresh) {
                for (std::uint32_t l = 0; l < emb.n_layers; ++l) {
                    const auto v = emb.vector(l, wp);
                    bank.pool_.insert(bank.pool_.end(), v.begin(), v.end());
                }
            }
            return it->second;
        };

        for (const auto* ex : exs) {
            Slot s;
            s.src = resolve(ex->src);
            if (ex->tgt) {
                s.tgt = resolve(*ex->tgt);
                s.has_tgt = true;
            }
            s.target = encode_target(dataset.spec, *ex);
            s.split = ex->split;
            slot_of.emplace(ex, s);
        }
    }

    bank.slots_.reserve(dataset.examples.size());
    for (const auto& ex : dataset.examples) bank.slots_.push_back(slot_of.at(&ex));
    return bank;
}

LayerStack FeatureBank::stack(std::size_t offset) const {
    return LayerStack{std::span<const float>(pool_).subspan(offset, n_layers_ * dim_), n_layers_, dim_};
}

std::vector<ProbeExample> FeatureBank::examples(Split split) const {
    std::vector<ProbeExample> out;
    for (const auto& s : slots_) {
        if (s.split != split) continue;
        ProbeExample ex{ProbeInput{stack(s.src), std::nullopt}, s.target};
        if (s.has_tgt) ex.input.tgt = stack(s.tgt);
        out.push_back(ex);
    }
    return out;
}

//
// evaluation
//

double evaluate(const ProbeParams& params, TaskKind kind, std::span<const ProbeExample> examples) {
    if (examples.empty()) throw ValidationError("cannot evaluate on an empty split");
    double total = 0.0;
    for (const auto& ex : examples) {
        const auto z = probe_forward(params, ex.input);
        if (kind == TaskKind::classification) {
            total += argmax(z) == std::get<std::size_t>(ex.target) ? 1.0 : 0.0;
        } else {
            const double r = z.at(0) - std::get<double>(ex.target);
            total += r * r;
        }
    }
    return total / static_cast<double>(examples.size());
}

double evaluate(const TrainedProbe& probe, const Dataset& dataset, Split split, const EmbeddingStore& store) {
    if (probe.spec.name != dataset.spec.name || probe.spec.kind != dataset.spec.kind ||
        probe.spec.arity != dataset.spec.arity || probe.spec.labels != dataset.spec.labels) {
        throw ValidationError("probe for '" + probe.spec.name + "' does not match dataset '" + dataset.spec.name + "'");
    }
    const auto bank = FeatureBank::build(dataset, store);
    return evaluate(probe.params, dataset.spec.kind, bank.examples(split));
}

double mean_loss(const ProbeParams& params, TaskKind kind, std::span<const ProbeExample> examples) {
    if (examples.empty()) throw ValidationError("cannot evaluate on an empty split");
    double total = 0.0;
    for (const auto& ex : examples) total += loss(kind, probe_forward(params, ex.input), ex.target);
    return total / static_cast<double>(examples.size());
}

bool metric_improves(Metric metric, double candidate, double incumbent) {
    return metric == Metric::accuracy ? candidate > incumbent : candidate < incumbent;
}

//
// training
//

TrainedProbe train(const Dataset& dataset, const FeatureBank& features, const TrainConfig& config) {
    dataset.spec.validate();
    if (config.epochs < 1) throw ValidationError("epochs must be at least 1");
    if (config.batch_size < 1) throw ValidationError("batch size must be at least 1");

    const auto train_set = features.examples(Split::train);
    const auto dev_set = features.examples(Split::dev);
    if (train_set.empty()) throw ValidationError("task '" + dataset.spec.name + "': no training data");
    if (dev_set.empty()) throw ValidationError("task '" + dataset.spec.name + "': no dev data");
    if (dataset.spec.output_dim() == 0) throw ValidationError("task '" + dataset.spec.name + "': empty label space");

    TrainedProbe probe;
    probe.spec = dataset.spec;
    probe.seed = config.seed;

    ProbeParams params = ProbeParams::initial(features.n_layers(), features.dim(), dataset.spec.output_dim(),
                                              dataset.spec.arity == Arity::binary);
    Adam adam(params.parameter_count(), config.adam);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> flat = params.flatten();
    std::vector<ProbeExample> batch;
    batch.reserve(config.batch_size);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        seeded_shuffle(order, rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
            const auto result = backward(params, dataset.spec.kind, batch);
            loss_sum += result.mean_loss * static_cast<double>(batch.size());
            adam.step(flat, result.gradients.flatten());
            params.assign(flat);
        }
        const double dev = evaluate(params, dataset.spec.kind, dev_set);
        const double dev_loss = mean_loss(params, dataset.spec.kind, dev_set);
        probe.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), dev, dev_loss});
        // Equal dev metrics (common once accuracy saturates) go to the lower dev loss.
        const auto& best = epoch == 1 ? probe.history.back() : probe.history[probe.best_epoch - 1];
        const bool better = metric_improves(dataset.spec.metric, dev, best.dev_metric) ||
                            (dev == best.dev_metric && dev_loss < best.dev_loss);
        if (epoch == 1 || better) {
            probe.best_epoch = epoch;
            probe.params = params;
        }
    }
    return probe;
}

TrainedProbe train(const Dataset& dataset, const EmbeddingStore& store, const TrainConfig& config) {
    return train(dataset, FeatureBank::build(dataset, store), config);
}

//
// serialization
//

ProbeFiles probe_files(const std::filesystem::path& base) {
    return {std::filesystem::path(base.string() + ".probe.json"), std::filesystem::path(base.string() + ".probe.bin")};
}

ProbeFiles save_probe(const TrainedProbe& probe, const std::filesystem::path& base) {
    const auto files = probe_files(base);
    const auto flat = probe.params.flatten();

    std::string blob(kBlobMagic, 4);
    put_u32(blob, 1);
    put_u32(blob, static_cast<std::uint32_t>(flat.size()));
    for (double v : flat) put_u32(blob, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    std::ofstream out(files.blob, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + files.blob.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.close();
    if (out.fail()) throw IoError("cannot finish " + files.blob.string());

    nlohmann::json j;
    j["spec"] = to_json(probe.spec);
    j["seed"] = probe.seed;
    j["best_epoch"] = probe.best_epoch;
    j["n_layers"] = probe.params.n_layers();
    j["dim"] = probe.params.dim();
    j["output_dim"] = probe.params.output_dim;
    j["binary"] = probe.params.binary();
    j["parameters"] = files.blob.filename().string();
    auto& hist = j["history"] = nlohmann::json::array();
    for (const auto& r : probe.history) {
        hist.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"dev_metric", r.dev_metric}, {"dev_loss", r.dev_loss}});
    }
    write_json_file(j, files.metadata);
    return files;
}

TrainedProbe load_probe(const std::filesystem::path& base) {
    const auto files = probe_files(base);
    const auto j = read_json_file(files.metadata);
    TrainedProbe probe;
    try {
        probe.spec = task_spec_from_json(j.at("spec"));
        probe.seed = j.at("seed").get<std::uint64_t>();
        probe.best_epoch = j.at("best_epoch").get<int>();
        probe.params = ProbeParams::initial(j.at("n_layers").get<std::size_t>(), j.at("dim").get<std::size_t>(),
                                            j.at("output_dim").get<std::size_t>(), j.at("binary").get<bool>());
        for (const auto& h : j.at("history")) {
            probe.history.push_back({h.at("epoch").get<int>(), h.at("train_loss").get<double>(), h.at("dev_metric").get<double>(),
                                     h.at("dev_loss").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(files.metadata.string() + ": " + e.what());
    }

    std::ifstream in(files.blob, std::ios::binary);
    if (!in) throw IoError("cannot open " + files.blob.string());
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 12 || std::memcmp(raw.data(), kBlobMagic, 4) != 0) {
        throw ValidationError(files.blob.string() + ": not a probe parameter blob");
    }
    const auto count = get_u32(raw.data() + 8);
    if (count != probe.params.parameter_count() || raw.size() != 12 + std::size_t(count) * 4) {
        throw ValidationError(files.blob.string() + ": parameter count does not match the metadata");
    }
    std::vector<double> flat(count);
    for (std::size_t i = 0; i < count; ++i) flat[i] = std::bit_cast<float>(get_u32(raw.data() + 12 + 4 * i));
    probe.params.assign(flat);
    probe.params.validate();
    return probe;
}

void write_history_csv(const TrainedProbe& probe, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,train_loss," << (probe.spec.metric == Metric::accuracy ? "dev_accuracy" : "dev_mse") << ",dev_loss,best\n";
    char buf[128];
    for (const auto& r : probe.history) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%d\n", r.epoch, r.train_loss, r.dev_metric, r.dev_loss, r.epoch == probe.best_epoch ? 1 : 0);
        out << buf;
    }
}

}  // namespace edgeprobe
