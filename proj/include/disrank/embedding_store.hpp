#pragma once

#include "disrank/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace disrank {

inline constexpr std::uint32_t kDefaultEmbeddingDim = 768;

struct EmbeddingRecord {
    std::string key;
    std::vector<double> vector;
};

/// Key for context 1 or 2 of an instance: "<instance_id>#1" / "#2".
std::string context_key(std::string_view instance_id, int context);

/// Immutable-after-load map from key to a fixed-dimension vector. Values are
/// held in 64-bit; on disk they are 32-bit floats.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::uint32_t dim);

    /// Rejects duplicate keys, wrong dimensions and non-finite components.
    void insert(std::string key, std::vector<double> vector);

    std::uint32_t dim() const noexcept { return m_dim; }
    std::size_t size() const noexcept { return m_records.size(); }
    bool contains(std::string_view key) const;

    /// Throws LookupError naming the key when absent.
    std::span<const double> at(std::string_view key) const;

    const std::map<std::string, std::vector<double>, std::less<>>& records() const noexcept {
        return m_records;
    }

private:
    std::uint32_t m_dim;
    std::map<std::string, std::vector<double>, std::less<>> m_records;
};

/// Serializes records in canonical (key-sorted) EMBS form. Vectors are
/// narrowed to float32. An empty list is valid and needs `dim` for the header.
std::string encode_store(std::span<const EmbeddingRecord> records, std::uint32_t dim);
void write_store(std::span<const EmbeddingRecord> records, std::uint32_t dim,
                 const std::filesystem::path& path);
void write_store(const EmbeddingStore& store, const std::filesystem::path& path);

EmbeddingStore decode_store(std::string_view bytes);
EmbeddingStore read_store(const std::filesystem::path& path);

struct PairFeature {
    std::string instance_id;
    std::vector<double> x; ///< [E(C1), E(C2)], length 2 * dim
};

PairFeature pair_feature(const EmbeddingStore& store, std::string_view instance_id);
inline PairFeature pair_feature(const EmbeddingStore& store, const UsePair& pair) {
    return pair_feature(store, pair.instance_id);
}

/// Keys that pair_feature would need but the store lacks, in order.
std::vector<std::string> missing_keys(const EmbeddingStore& store,
                                      std::span<const std::string> instance_ids);

} // namespace disrank
