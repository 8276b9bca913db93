#include "disrank/embedding_store.hpp"

#include "binary_io.hpp"
#include "disrank/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

namespace disrank {

namespace {
constexpr std::string_view kMagic = "EMBS";
constexpr std::uint16_t kVersion = 1;
} // namespace

namespace detail {

std::string read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open {}", path.string()));
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_binary_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(fmt::format("cannot open {} for writing", path.string()));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError(fmt::format("write to {} failed", path.string()));
    }
}

} // namespace detail

std::string context_key(std::string_view instance_id, int context) {
    return fmt::format("{}#{}", instance_id, context);
}

EmbeddingStore::EmbeddingStore(std::uint32_t dim) : m_dim(dim) {
    if (dim == 0) {
        throw ValidationError("embedding dimension must be positive");
    }
}

void EmbeddingStore::insert(std::string key, std::vector<double> vector) {
    if (vector.size() != m_dim) {
        throw ValidationError(fmt::format("embedding {} has dimension {}, store expects {}", key,
                                          vector.size(), m_dim));
    }
    if (!std::all_of(vector.begin(), vector.end(), [](double v) { return std::isfinite(v); })) {
        throw ValidationError(fmt::format("embedding {} has a non-finite component", key));
    }
    const auto [it, inserted] = m_records.try_emplace(std::move(key), std::move(vector));
    if (!inserted) {
        throw ValidationError(fmt::format("duplicate embedding key {}", it->first));
    }
}

bool EmbeddingStore::contains(std::string_view key) const {
    return m_records.find(key) != m_records.end();
}

std::span<const double> EmbeddingStore::at(std::string_view key) const {
    const auto it = m_records.find(key);
    if (it == m_records.end()) {
        throw LookupError(fmt::format("embedding key {} not found", key));
    }
    return it->second;
}

std::string encode_store(std::span<const EmbeddingRecord> records, std::uint32_t dim) {
    if (dim == 0) {
        throw ValidationError("embedding dimension must be positive");
    }
    std::vector<const EmbeddingRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) {
        if (r.vector.size() != dim) {
            throw ValidationError(fmt::format("embedding {} has dimension {}, expected {}", r.key,
                                              r.vector.size(), dim));
        }
        if (r.key.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw ValidationError(fmt::format("embedding key of {} bytes is too long",
                                              r.key.size()));
        }
        for (double v : r.vector) {
            if (!std::isfinite(static_cast<float>(v))) {
                throw ValidationError(
                    fmt::format("embedding {} has a component not representable as float", r.key));
            }
        }
        sorted.push_back(&r);
    }
    // std::string comparison is bytewise on char_traits<char>, which compares
    // as unsigned char; that is the canonical order.
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->key < b->key; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->key == sorted[i - 1]->key) {
            throw ValidationError(fmt::format("duplicate embedding key {}", sorted[i]->key));
        }
    }

    detail::ByteWriter w;
    w.put_bytes(kMagic);
    w.put_u16(kVersion);
    w.put_u32(dim);
    w.put_u64(sorted.size());
    for (const auto* r : sorted) {
        w.put_u16(static_cast<std::uint16_t>(r->key.size()));
        w.put_bytes(r->key);
        for (double v : r->vector) {
            w.put_f32(static_cast<float>(v));
        }
    }
    return w.take();
}

void write_store(std::span<const EmbeddingRecord> records, std::uint32_t dim,
                 const std::filesystem::path& path) {
    detail::write_binary_file(path, encode_store(records, dim));
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::vector<EmbeddingRecord> records;
    records.reserve(store.size());
    for (const auto& [k, v] : store.records()) {
        records.push_back({k, v});
    }
    write_store(records, store.dim(), path);
}

EmbeddingStore decode_store(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.get_bytes(kMagic.size(), "magic") != kMagic) {
        throw FormatError("bad magic, not an EMBS file", 0);
    }
    const auto version_at = r.offset();
    const auto version = r.get_u16("version");
    if (version != kVersion) {
        throw FormatError(fmt::format("unsupported EMBS version {}", version), version_at);
    }
    const auto dim_at = r.offset();
    const auto dim = r.get_u32("dim");
    if (dim == 0) {
        throw FormatError("EMBS dimension is zero", dim_at);
    }
    const auto count = r.get_u64("count");
    EmbeddingStore store(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto record_at = r.offset();
        const auto key_len = r.get_u16("key length");
        std::string key(r.get_bytes(key_len, "key"));
        std::vector<double> vec(dim);
        for (auto& v : vec) {
            const auto at = r.offset();
            v = r.get_f32("vector component");
            if (!std::isfinite(v)) {
                throw FormatError(fmt::format("non-finite component in record {}", key), at);
            }
        }
        if (store.contains(key)) {
            throw FormatError(fmt::format("duplicate key {}", key), record_at);
        }
        store.insert(std::move(key), std::move(vec));
    }
    if (r.remaining() != 0) {
        throw FormatError(
            fmt::format("{} trailing bytes after the declared {} records", r.remaining(), count),
            r.offset());
    }
    return store;
}

EmbeddingStore read_store(const std::filesystem::path& path) {
    return decode_store(detail::read_binary_file(path));
}

PairFeature pair_feature(const EmbeddingStore& store, std::string_view instance_id) {
    const auto first = store.at(context_key(instance_id, 1));
    const auto second = store.at(context_key(instance_id, 2));
    PairFeature f;
    f.instance_id = std::string(instance_id);
    f.x.reserve(first.size() + second.size());
    f.x.insert(f.x.end(), first.begin(), first.end());
    f.x.insert(f.x.end(), second.begin(), second.end());
    return f;
}

std::vector<std::string> missing_keys(const EmbeddingStore& store,
                                      std::span<const std::string> instance_ids) {
    std::vector<std::string> missing;
    for (const auto& id : instance_ids) {
        for (int c : {1, 2}) {
            auto key = context_key(id, c);
            if (!store.contains(key)) {
                missing.push_back(std::move(key));
            }
        }
    }
    return missing;
}

} // namespace disrank
