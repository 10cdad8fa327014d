#pragma once

// Structural checks shared by the unit tests and the acceptance runner.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "redmotion/nn/layers.hpp"
#include "redmotion/red_encoder.hpp"
#include "support.hpp"

namespace rmtest {

// Max |local - band-masked global| over a random sequence of n tokens.
inline double local_attention_gap(std::size_t n, std::size_t window, std::uint64_t seed)
{
    namespace nn = redmotion::nn;
    nn::ParameterStore store(seed);
    const nn::AttentionConfig cfg{8, 2, window};
    nn::MultiHeadAttention mha(store, "mha", cfg, false);
    std::mt19937_64 rng(seed);
    const Tensor x = random_tensor(rng, n, cfg.model_dim, -2.0, 2.0);
    Tape tape(&store);
    Var in = tape.constant(x);
    const Var local = mha.local_self_attention(tape, in, window);
    const nn::AttentionMask band = nn::AttentionMask::band(n, window);
    const Var global = mha.self_attention(tape, in, &band);
    return max_abs_diff(local.value(), global.value());
}

struct ReceptiveField {
    bool zero_outside = true;   // every |i - j| > L*w/2 entry is exactly zero
    bool nonzero_inside = true; // every |i - j| <= L*w/2 entry moved
};

/// Perturbs each input token of an L-block local stack in turn and records
/// which outputs change.
inline ReceptiveField receptive_field(std::size_t layers, std::size_t window, std::size_t n = 20, std::uint64_t seed = 3)
{
    namespace nn = redmotion::nn;
    nn::ParameterStore store(seed);
    const nn::AttentionConfig cfg{8, 2, window};
    std::vector<nn::TransformerBlock> blocks;
    for (std::size_t l = 0; l < layers; ++l)
        blocks.emplace_back(store, "block" + std::to_string(l), cfg, nn::BlockKind::local, 2, false);
    const auto run = [&](const Tensor& x) {
        Tape tape(&store);
        Var h = tape.constant(x);
        for (const auto& b : blocks) h = b.forward(tape, h);
        return h.value();
    };
    std::mt19937_64 rng(seed);
    const Tensor x = random_tensor(rng, n, cfg.model_dim);
    const Tensor base = run(x);
    const std::size_t reach = layers * window / 2;
    ReceptiveField rf;
    for (std::size_t j = 0; j < n; ++j) {
        Tensor xp = x;
        // Not a uniform shift, which LayerNorm would cancel.
        for (std::size_t c = 0; c < cfg.model_dim; ++c) xp(j, c) += 0.5 * std::cos(double(c + j));
        const Tensor out = run(xp);
        for (std::size_t i = 0; i < n; ++i) {
            double delta = 0.0;
            for (std::size_t c = 0; c < cfg.model_dim; ++c) delta = std::max(delta, std::abs(out(i, c) - base(i, c)));
            const std::size_t dist = i > j ? i - j : j - i;
            if (dist > reach && delta != 0.0) rf.zero_outside = false;
            if (dist <= reach && delta == 0.0) rf.nonzero_inside = false;
        }
    }
    return rf;
}

inline std::vector<redmotion::RoadEnvToken> random_road_tokens(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_int_distribution<int> type(0, static_cast<int>(redmotion::kTokenTypeCount) - 1);
    std::uniform_real_distribution<double> pos(-50.0, 50.0);
    std::vector<redmotion::RoadEnvToken> tokens(n);
    for (std::size_t i = 0; i < n; ++i) {
        tokens[i].type = static_cast<redmotion::TokenType>(type(rng));
        tokens[i].position = {pos(rng), pos(rng)};
        if (!redmotion::is_agent_type(tokens[i].type)) tokens[i].polyline_id = static_cast<std::int64_t>(i / 4);
    }
    return tokens;
}

}  // namespace rmtest
