#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "redmotion/nn/tensor.hpp"

namespace redmotion::nn {

struct ParamId {
    std::size_t index = 0;
    friend bool operator==(ParamId, ParamId) = default;
};

enum class Init {
    zeros,
    ones,
    // U(-sqrt(3/fan_in), sqrt(3/fan_in)), fan_in = rows
    variance_scaled,
    // N(0, 0.02^2), used for embedding tables and learned tokens
    normal_small,
};

/// Named parameter tensors. Each tensor's initial values depend only on
/// (store seed, parameter name), so adding or removing unrelated modules never
/// shifts the initialization of the others.
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

    ParamId add(const std::string& name, std::size_t rows, std::size_t cols, Init init);

    [[nodiscard]] std::optional<ParamId> find(const std::string& name) const;
    [[nodiscard]] ParamId at(const std::string& name) const;

    [[nodiscard]] Tensor& value(ParamId id) { return values_.at(id.index); }
    [[nodiscard]] const Tensor& value(ParamId id) const { return values_.at(id.index); }
    [[nodiscard]] const std::string& name(ParamId id) const { return names_.at(id.index); }

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::size_t element_count() const noexcept;
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    // FNV-1a over names, shapes and raw value bytes, in registration order.
    [[nodiscard]] std::uint64_t digest() const;

private:
    std::uint64_t seed_;
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

// Binary archive: magic, format version, config digest, then named tensors
// with dtype tag and shape. Values are stored as raw little-endian IEEE-754
// doubles so a save/load round trip is exact.
struct Checkpoint {
    std::string config_digest;
    std::vector<NamedTensor> tensors;

    [[nodiscard]] const NamedTensor* find(const std::string& name) const;
};

Checkpoint snapshot(const ParameterStore& store, std::string config_digest);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct LoadSummary {
    std::vector<std::string> loaded;
    std::vector<std::string> missing;  // in store, not in checkpoint
    std::vector<std::string> unused;   // in checkpoint, not in store
};

// Copies every checkpoint tensor whose name exists in the store. Shape
// mismatches throw. With `strict`, any missing or unused name throws as well.
LoadSummary load_into(ParameterStore& store, const Checkpoint& checkpoint, bool strict);

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t value);

}  // namespace redmotion::nn
