// Writes a Gaussian-noise LEF store covering every sentence of the given
// CoNLL files (and sentence slots for XNLI pair files), so the pipeline can be
// exercised without running an encoder.

#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edgeprobe/corpus.hpp"
#include "edgeprobe/error.hpp"
#include "edgeprobe/lef.hpp"

using namespace edgeprobe;

int main(int argc, char** argv) {
    CLI::App app{"noise embeddings for toy corpora"};
    std::string out;
    std::vector<std::string> conll;
    std::vector<std::string> pairs;
    std::uint32_t layers = 13;
    std::uint32_t dim = 16;
    std::uint64_t seed = 0;
    app.add_option("-o,--out", out, "output LEF file")->required();
    app.add_option("--conll", conll, "CoNLL files");
    app.add_option("--pairs", pairs, "sentence-pair TSV files");
    app.add_option("--layers", layers);
    app.add_option("--dim", dim);
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);

    try {
        std::mt19937_64 rng(seed);
        std::normal_distribution<float> noise(0.0f, 1.0f);
        LefWriter writer(out, layers, dim);
        auto emit = [&](const std::string& id, std::size_t n_words) {
            LayeredSentenceEmbedding e;
            e.sentence_id = id;
            e.n_layers = layers;
            e.dim = dim;
            std::uint32_t wp = 1;
            for (std::size_t i = 0; i < n_words; ++i) {
                e.word_to_first_wp.push_back(wp);
                wp += 1 + static_cast<std::uint32_t>(rng() % 2);
            }
            e.n_wordpieces = wp;
            e.data.resize(std::size_t(layers) * wp * dim);
            for (auto& x : e.data) x = noise(rng);
            writer.write(e);
        };
        for (const auto& f : conll) {
            for (const auto& s : parse_conll(std::filesystem::path(f))) emit(s.id, s.words.size());
        }
        for (const auto& f : pairs) {
            for (const auto& p : parse_xnli(std::filesystem::path(f))) emit(p.pair_id, 0);
        }
        writer.close();
        std::cout << writer.records_written() << " records -> " << out << "\n";
    } catch (const Error& e) {
        std::cerr << "toy_lef: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
