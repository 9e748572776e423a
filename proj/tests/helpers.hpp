#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "edgeprobe/lef.hpp"

namespace testing {

inline std::filesystem::path toy_dir() { return EDGEPROBE_TOY_DIR; }
inline std::filesystem::path config_dir() { return EDGEPROBE_CONFIG_DIR; }

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("edgeprobe-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline edgeprobe::LayeredSentenceEmbedding random_embedding(const std::string& id, std::uint32_t n_layers, std::uint32_t dim,
                                                            std::uint32_t n_words, std::mt19937_64& rng) {
    edgeprobe::LayeredSentenceEmbedding e;
    e.sentence_id = id;
    e.n_layers = n_layers;
    e.dim = dim;
    std::uint32_t wp = 1;
    for (std::uint32_t i = 0; i < n_words; ++i) {
        e.word_to_first_wp.push_back(wp);
        wp += 1 + static_cast<std::uint32_t>(rng() % 3);
    }
    e.n_wordpieces = wp;
    std::uniform_real_distribution<float> u(-2.0f, 2.0f);
    e.data.resize(std::size_t(n_layers) * wp * dim);
    for (auto& x : e.data) x = u(rng);
    return e;
}

}  // namespace testing
