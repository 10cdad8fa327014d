#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "redmotion/nn/layers.hpp"

namespace redmotion {

enum class PoolAxis { tokens, features };

struct ModelConfig {
    std::size_t model_dim = 64;       // d
    std::size_t heads = 4;            // h
    std::size_t local_blocks = 3;     // L
    std::size_t decoder_blocks = 1;   // D
    std::size_t descriptors = 16;     // K
    std::size_t window = 16;          // w
    std::size_t future_steps = 50;    // T
    std::size_t ego_blocks = 2;
    std::size_t mlp_ratio = 2;
    std::size_t head_hidden = 128;
    std::array<std::size_t, 3> projector{256, 512, 512};
    PoolAxis pool = PoolAxis::tokens;
    // Positions enter the network multiplied by this factor; regressed
    // trajectories are divided by it.
    double coordinate_scale = 0.1;

    // Raster baselines.
    std::size_t vit_dim = 64;
    std::size_t vit_heads = 4;
    std::size_t vit_depth = 4;

    void validate() const;
    [[nodiscard]] nn::AttentionConfig attention() const { return {model_dim, heads, window}; }
    [[nodiscard]] nn::AttentionConfig vit_attention() const { return {vit_dim, vit_heads, window}; }
    // Canonical key=value text covering every field, used for checkpoint digests.
    [[nodiscard]] std::string canonical() const;
};

std::string to_string(PoolAxis axis);
PoolAxis parse_pool_axis(const std::string& text);

}  // namespace redmotion
