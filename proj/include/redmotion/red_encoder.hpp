#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "redmotion/model_config.hpp"
#include "redmotion/nn/layers.hpp"
#include "redmotion/tokenizer.hpp"

namespace redmotion {

/// Road environment encoder: typed token embedding, a stack of local
/// attention blocks, and a parallel decoder that reduces any number of
/// environment tokens to K descriptors. The optional projector maps the
/// flattened descriptor set to the twin-loss embedding.
class RedEncoder {
public:
    static constexpr const char* kPrefix = "red_encoder";

    RedEncoder() = default;
    RedEncoder(nn::ParameterStore& store, const ModelConfig& config, bool with_projector);

    // [n, d]; row i projects [type_embedding(type_i) | scale * (x_i, y_i)].
    nn::Var embed_road_tokens(nn::Tape& tape, std::span<const RoadEnvToken> tokens) const;
    nn::Var encode_environment(nn::Tape& tape, nn::Var x) const;
    // [K, d] for any n >= 1.
    nn::Var decode_descriptors(nn::Tape& tape, nn::Var env, nn::AttentionProbe* probe = nullptr) const;
    nn::Var encode(nn::Tape& tape, std::span<const RoadEnvToken> tokens) const;
    // [1, p] from the flattened [K, d] descriptors.
    nn::Var project(nn::Tape& tape, nn::Var descriptors) const;

    // Both views through the same weights; returns the two [1, p] embeddings.
    std::pair<nn::Var, nn::Var> forward_views(nn::Tape& tape, const AugmentedPair<std::vector<RoadEnvToken>>& pair) const;
    // B pairs -> two [B, p] matrices.
    std::pair<nn::Var, nn::Var> forward_views(nn::Tape& tape,
                                              std::span<const AugmentedPair<std::vector<RoadEnvToken>>> pairs) const;

    [[nodiscard]] bool has_projector() const noexcept { return has_projector_; }
    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    [[nodiscard]] nn::ParamId type_table() const noexcept { return type_table_; }
    [[nodiscard]] const nn::Linear& input_projection() const noexcept { return input_; }
    [[nodiscard]] const std::vector<nn::TransformerBlock>& local_blocks() const noexcept { return local_; }
    [[nodiscard]] const std::vector<nn::TransformerBlock>& decoder_blocks() const noexcept { return decoder_; }

private:
    ModelConfig config_;
    nn::ParamId type_table_;
    nn::Linear input_;
    std::vector<nn::TransformerBlock> local_;
    nn::ParamId seeds_;
    std::vector<nn::TransformerBlock> decoder_;
    nn::LayerNorm out_norm_;
    nn::Mlp projector_;
    bool has_projector_ = false;
};

}  // namespace redmotion
