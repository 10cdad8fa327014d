#include "redmotion/red_encoder.hpp"

#include <stdexcept>

namespace redmotion {

using nn::Init;
using nn::Tape;
using nn::Tensor;
using nn::Var;

RedEncoder::RedEncoder(nn::ParameterStore& store, const ModelConfig& config, bool with_projector)
    : config_(config), has_projector_(with_projector)
{
    config_.validate();
    const std::string p = kPrefix;
    const std::size_t d = config_.model_dim;
    type_table_ = store.add(p + "/type_embedding", kTokenTypeCount, d - 2, Init::normal_small);
    input_ = nn::Linear(store, p + "/input", d, d);
    for (std::size_t i = 0; i < config_.local_blocks; ++i) {
        local_.emplace_back(store, p + "/local" + std::to_string(i), config_.attention(), nn::BlockKind::local, config_.mlp_ratio);
    }
    seeds_ = store.add(p + "/descriptor_seeds", config_.descriptors, d, Init::normal_small);
    for (std::size_t i = 0; i < config_.decoder_blocks; ++i) {
        // The seeds are input independent, so the decoder must transmit the context from the start.
        decoder_.emplace_back(store, p + "/decoder" + std::to_string(i), config_.attention(), nn::BlockKind::cross,
                              config_.mlp_ratio, false);
    }
    out_norm_ = nn::LayerNorm(store, p + "/descriptor_norm", d);
    if (with_projector) {
        const std::size_t widths[] = {config_.descriptors * d, config_.projector[0], config_.projector[1], config_.projector[2]};
        projector_ = nn::Mlp(store, p + "/projector", widths);
    }
}

Var RedEncoder::embed_road_tokens(Tape& tape, std::span<const RoadEnvToken> tokens) const
{
    if (tokens.empty()) throw std::invalid_argument("embed_road_tokens: empty token sequence");
    std::vector<std::size_t> types(tokens.size());
    Tensor positions(tokens.size(), 2);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto type = static_cast<std::size_t>(tokens[i].type);
        if (type >= kTokenTypeCount) throw std::invalid_argument("embed_road_tokens: unknown token type " + std::to_string(type));
        types[i] = type;
        positions(i, 0) = tokens[i].position.x * config_.coordinate_scale;
        positions(i, 1) = tokens[i].position.y * config_.coordinate_scale;
    }
    const Var parts[] = {nn::gather_rows(tape.param(type_table_), types), tape.constant(std::move(positions))};
    return input_(tape, nn::concat_cols(parts));
}

Var RedEncoder::encode_environment(Tape& tape, Var x) const
{
    if (x.rows() == 0) throw std::invalid_argument("encode_environment: empty sequence");
    for (const auto& block : local_) x = block.forward(tape, x);
    return x;
}

Var RedEncoder::decode_descriptors(Tape& tape, Var env, nn::AttentionProbe* probe) const
{
    if (env.rows() == 0) throw std::invalid_argument("decode_descriptors: empty environment");
    Var x = tape.param(seeds_);
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        x = decoder_[i].forward_cross(tape, x, env, nullptr, i + 1 == decoder_.size() ? probe : nullptr);
    }
    return out_norm_(tape, x);
}

Var RedEncoder::encode(Tape& tape, std::span<const RoadEnvToken> tokens) const
{
    return decode_descriptors(tape, encode_environment(tape, embed_road_tokens(tape, tokens)));
}

Var RedEncoder::project(Tape& tape, Var descriptors) const
{
    if (!has_projector_) throw std::logic_error("red encoder was built without a projector");
    return projector_(tape, nn::reshape(descriptors, 1, descriptors.rows() * descriptors.cols()));
}

std::pair<Var, Var> RedEncoder::forward_views(Tape& tape, const AugmentedPair<std::vector<RoadEnvToken>>& pair) const
{
    return {project(tape, encode(tape, pair.view_a)), project(tape, encode(tape, pair.view_b))};
}

std::pair<Var, Var> RedEncoder::forward_views(Tape& tape, std::span<const AugmentedPair<std::vector<RoadEnvToken>>> pairs) const
{
    std::vector<Var> a;
    std::vector<Var> b;
    for (const auto& pair : pairs) {
        auto [za, zb] = forward_views(tape, pair);
        a.push_back(za);
        b.push_back(zb);
    }
    return {nn::concat_rows(a), nn::concat_rows(b)};
}

}  // namespace redmotion
