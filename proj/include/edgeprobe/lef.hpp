#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "edgeprobe/error.hpp"

namespace edgeprobe {

// One sentence worth of frozen encoder states: n_layers x n_wordpieces x dim,
// layer-major. Wordpiece 0 is the sentence-level ([CLS]) slot.
struct LayeredSentenceEmbedding {
    std::string sentence_id;
    std::uint32_t n_layers = 0;
    std::uint32_t n_wordpieces = 0;
    std::uint32_t dim = 0;
    std::vector<std::uint32_t> word_to_first_wp;
    std::vector<float> data;

    std::size_t n_words() const noexcept { return word_to_first_wp.size(); }
    std::span<const float> vector(std::uint32_t layer, std::uint32_t wordpiece) const;
    std::span<float> vector(std::uint32_t layer, std::uint32_t wordpiece);

    // Shape, alignment and finiteness invariants; throws LefError.
    void validate() const;
    bool operator==(const LayeredSentenceEmbedding&) const = default;
};

class LefError : public ValidationError {
public:
    enum class Code { bad_magic, bad_version, truncated, duplicate_id, non_finite, inconsistent_shape, bad_alignment };

    LefError(Code code, const std::string& what)
        : ValidationError(what)
        , code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

inline constexpr char kLefMagic[4] = {'L', 'E', 'F', '1'};
inline constexpr std::uint32_t kLefVersion = 1;

// Streams records to a LEF file. Every record must match the geometry declared
// at construction.
class LefWriter {
public:
    LefWriter(const std::filesystem::path& path, std::uint32_t n_layers, std::uint32_t dim);

    void write(const LayeredSentenceEmbedding& record);
    void close();
    std::size_t records_written() const noexcept { return count_; }

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::uint32_t n_layers_;
    std::uint32_t dim_;
    std::size_t count_ = 0;
    std::set<std::string> ids_;
};

// Geometry is taken from the first record; an empty span writes a 0x0 header.
void write_lef(std::span<const LayeredSentenceEmbedding> records, const std::filesystem::path& path);

// Read-only, indexed view over a LEF file. Opening scans record headers and
// checks sizes; payloads are loaded on lookup.
class EmbeddingStore {
public:
    static EmbeddingStore open(const std::filesystem::path& path);

    std::uint32_t n_layers() const noexcept { return n_layers_; }
    std::uint32_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return order_.size(); }
    const std::vector<std::string>& ids() const noexcept { return order_; }
    bool contains(const std::string& id) const { return index_.contains(id); }

    // Throws NotFoundError for unknown ids, LefError(non_finite) for NaN/Inf payloads.
    LayeredSentenceEmbedding lookup(const std::string& id) const;

    // Full payload scan (finiteness included).
    void validate() const;

    // id -> byte offset of the record; regenerable at any time.
    const std::map<std::string, std::uint64_t>& offsets() const noexcept { return index_; }
    void write_index_json(const std::filesystem::path& path) const;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::uint32_t n_layers_ = 0;
    std::uint32_t dim_ = 0;
    std::vector<std::string> order_;
    std::map<std::string, std::uint64_t> index_;
};

std::vector<LayeredSentenceEmbedding> read_all(const EmbeddingStore& store);

}  // namespace edgeprobe
