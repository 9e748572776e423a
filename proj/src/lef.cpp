#include "edgeprobe/lef.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <utility>

#include "edgeprobe/json_io.hpp"

namespace edgeprobe {

namespace {

constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint64_t payload_bytes(std::uint32_t n_layers, std::uint32_t n_wp, std::uint32_t dim) {
    return std::uint64_t(n_layers) * n_wp * dim * sizeof(float);
}

void check_alignment(const std::string& id, std::uint32_t n_wp, const std::vector<std::uint32_t>& align) {
    if (n_wp == 0) {
        throw LefError(LefError::Code::inconsistent_shape, "record '" + id + "': zero wordpieces");
    }
    for (std::size_t i = 0; i < align.size(); ++i) {
        if (align[i] == 0 || align[i] >= n_wp || (i > 0 && align[i] <= align[i - 1])) {
            throw LefError(LefError::Code::bad_alignment,
                           "record '" + id + "': word " + std::to_string(i) + " maps to wordpiece " +
                               std::to_string(align[i]) + " (alignment must be strictly increasing within 1.." +
                               std::to_string(n_wp - 1) + ")");
        }
    }
}

void check_finite(const std::string& id, std::span<const float> data) {
    const auto it = std::find_if(data.begin(), data.end(), [](float x) { return !std::isfinite(x); });
    if (it != data.end()) {
        throw LefError(LefError::Code::non_finite,
                       "record '" + id + "': non-finite value at payload index " + std::to_string(it - data.begin()));
    }
}

class Reader {
public:
    explicit Reader(const std::filesystem::path& path)
        : in_(path, std::ios::binary)
        , path_(path) {
        if (!in_) throw IoError("cannot open " + path.string());
        in_.seekg(0, std::ios::end);
        size_ = static_cast<std::uint64_t>(in_.tellg());
        in_.seekg(0);
    }

    std::uint64_t pos() { return static_cast<std::uint64_t>(in_.tellg()); }
    std::uint64_t remaining() { return size_ - pos(); }
    void seek(std::uint64_t off) { in_.seekg(static_cast<std::streamoff>(off)); }

    void read(void* dst, std::size_t n, const char* what) {
        if (remaining() < n) {
            throw LefError(LefError::Code::truncated, path_.string() + ": truncated " + what + " at byte " +
                                                          std::to_string(pos()));
        }
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    }

    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        read(b, 4, what);
        return get_u32(b);
    }

private:
    std::ifstream in_;
    std::filesystem::path path_;
    std::uint64_t size_ = 0;
};

struct RecordHead {
    std::string id;
    std::uint32_t n_wp = 0;
    std::vector<std::uint32_t> align;
};

RecordHead read_record_head(Reader& r) {
    RecordHead h;
    const auto id_len = r.u32("id length");
    h.id.resize(id_len);
    r.read(h.id.data(), id_len, "sentence id");
    h.n_wp = r.u32("wordpiece count");
    const auto n_words = r.u32("word count");
    if (std::uint64_t(n_words) * 4 > r.remaining()) {
        throw LefError(LefError::Code::truncated, "record '" + h.id + "': truncated alignment map");
    }
    h.align.resize(n_words);
    for (auto& a : h.align) a = r.u32("alignment");
    check_alignment(h.id, h.n_wp, h.align);
    return h;
}

}  // namespace

//
// LayeredSentenceEmbedding
//

std::span<const float> LayeredSentenceEmbedding::vector(std::uint32_t layer, std::uint32_t wordpiece) const {
    if (layer >= n_layers || wordpiece >= n_wordpieces) {
        throw ShapeError("record '" + sentence_id + "': (layer " + std::to_string(layer) + ", wordpiece " +
                         std::to_string(wordpiece) + ") out of range");
    }
    return std::span<const float>(data).subspan((std::size_t(layer) * n_wordpieces + wordpiece) * dim, dim);
}

std::span<float> LayeredSentenceEmbedding::vector(std::uint32_t layer, std::uint32_t wordpiece) {
    auto c = std::as_const(*this).vector(layer, wordpiece);
    return {const_cast<float*>(c.data()), c.size()};
}

void LayeredSentenceEmbedding::validate() const {
    check_alignment(sentence_id, n_wordpieces, word_to_first_wp);
    if (data.size() != std::size_t(n_layers) * n_wordpieces * dim) {
        throw LefError(LefError::Code::inconsistent_shape,
                       "record '" + sentence_id + "': payload has " + std::to_string(data.size()) + " values, expected " +
                           std::to_string(std::size_t(n_layers) * n_wordpieces * dim));
    }
    check_finite(sentence_id, data);
}

//
// writing
//

LefWriter::LefWriter(const std::filesystem::path& path, std::uint32_t n_layers, std::uint32_t dim)
    : out_(path, std::ios::binary | std::ios::trunc)
    , path_(path)
    , n_layers_(n_layers)
    , dim_(dim) {
    if (!out_) throw IoError("cannot write " + path.string());
    std::string header(kLefMagic, 4);
    put_u32(header, kLefVersion);
    put_u32(header, n_layers);
    put_u32(header, dim);
    out_.write(header.data(), static_cast<std::streamsize>(header.size()));
}

void LefWriter::write(const LayeredSentenceEmbedding& record) {
    if (record.n_layers != n_layers_ || record.dim != dim_) {
        throw LefError(LefError::Code::inconsistent_shape,
                       "record '" + record.sentence_id + "' has " + std::to_string(record.n_layers) + " layers x dim " +
                           std::to_string(record.dim) + ", file declares " + std::to_string(n_layers_) + " x " +
                           std::to_string(dim_));
    }
    record.validate();
    if (ids_.contains(record.sentence_id)) {
        throw LefError(LefError::Code::duplicate_id, path_.string() + ": duplicate sentence id '" + record.sentence_id + "'");
    }
    std::string buf;
    buf.reserve(12 + record.sentence_id.size() + 4 * record.word_to_first_wp.size() + 4 * record.data.size());
    put_u32(buf, static_cast<std::uint32_t>(record.sentence_id.size()));
    buf += record.sentence_id;
    put_u32(buf, record.n_wordpieces);
    put_u32(buf, static_cast<std::uint32_t>(record.word_to_first_wp.size()));
    for (auto a : record.word_to_first_wp) put_u32(buf, a);
    for (float x : record.data) put_u32(buf, std::bit_cast<std::uint32_t>(x));
    out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out_) throw IoError("write failed: " + path_.string());
    ids_.insert(record.sentence_id);
    ++count_;
}

void LefWriter::close() {
    out_.close();
    if (out_.fail()) throw IoError("cannot finish " + path_.string());
}

void write_lef(std::span<const LayeredSentenceEmbedding> records, const std::filesystem::path& path) {
    const std::uint32_t n_layers = records.empty() ? 0 : records.front().n_layers;
    const std::uint32_t dim = records.empty() ? 0 : records.front().dim;
    LefWriter writer(path, n_layers, dim);
    for (const auto& r : records) writer.write(r);
    writer.close();
}

//
// reading
//

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& path) {
    Reader r(path);
    EmbeddingStore store;
    store.path_ = path;

    char magic[4] = {};
    r.read(magic, 4, "header");
    if (std::memcmp(magic, kLefMagic, 4) != 0) throw LefError(LefError::Code::bad_magic, path.string() + ": bad magic");
    if (r.remaining() < kHeaderBytes - 4) throw LefError(LefError::Code::truncated, path.string() + ": truncated header");
    const auto version = r.u32("version");
    if (version != kLefVersion) {
        throw LefError(LefError::Code::bad_version, path.string() + ": unsupported version " + std::to_string(version));
    }
    store.n_layers_ = r.u32("layer count");
    store.dim_ = r.u32("dim");

    while (r.remaining() > 0) {
        const std::uint64_t offset = r.pos();
        auto head = read_record_head(r);
        if (store.n_layers_ == 0 || store.dim_ == 0) {
            throw LefError(LefError::Code::inconsistent_shape, path.string() + ": records in a file declaring zero layers or dim");
        }
        const auto bytes = payload_bytes(store.n_layers_, head.n_wp, store.dim_);
        if (r.remaining() < bytes) {
            throw LefError(LefError::Code::truncated, "record '" + head.id + "': truncated payload (" +
                                                          std::to_string(r.remaining()) + " of " + std::to_string(bytes) +
                                                          " bytes)");
        }
        if (!store.index_.emplace(head.id, offset).second) {
            throw LefError(LefError::Code::duplicate_id, path.string() + ": duplicate sentence id '" + head.id + "'");
        }
        store.order_.push_back(std::move(head.id));
        r.seek(r.pos() + bytes);
    }
    return store;
}

LayeredSentenceEmbedding EmbeddingStore::lookup(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("sentence '" + id + "' not found in " + path_.string());

    Reader r(path_);
    r.seek(it->second);
    auto head = read_record_head(r);

    LayeredSentenceEmbedding e;
    e.sentence_id = std::move(head.id);
    e.n_layers = n_layers_;
    e.n_wordpieces = head.n_wp;
    e.dim = dim_;
    e.word_to_first_wp = std::move(head.align);
    const auto bytes = payload_bytes(n_layers_, head.n_wp, dim_);
    std::vector<unsigned char> raw(bytes);
    r.read(raw.data(), raw.size(), "payload");
    e.data.resize(bytes / 4);
    for (std::size_t i = 0; i < e.data.size(); ++i) e.data[i] = std::bit_cast<float>(get_u32(raw.data() + 4 * i));
    check_finite(e.sentence_id, e.data);
    return e;
}

void EmbeddingStore::validate() const {
    for (const auto& id : order_) (void)lookup(id);
}

void EmbeddingStore::write_index_json(const std::filesystem::path& path) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, off] : index_) j[id] = off;
    write_json_file(j, path);
}

std::vector<LayeredSentenceEmbedding> read_all(const EmbeddingStore& store) {
    std::vector<LayeredSentenceEmbedding> out;
    out.reserve(store.size());
    for (const auto& id : store.ids()) out.push_back(store.lookup(id));
    return out;
}

}  // namespace edgeprobe
