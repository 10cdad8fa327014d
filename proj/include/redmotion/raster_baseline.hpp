#pragma once

#include <string>
#include <vector>

#include "redmotion/model_config.hpp"
#include "redmotion/motion_model.hpp"
#include "redmotion/nn/layers.hpp"
#include "redmotion/raster.hpp"

namespace redmotion {

inline constexpr std::size_t kPatchSize = 16;
inline constexpr std::size_t kPatchesPerSide = RasterImage::kSize / kPatchSize;
inline constexpr std::size_t kPatchCount = kPatchesPerSide * kPatchesPerSide;  // 196
inline constexpr std::size_t kPatchFeatures = RasterImage::kChannels * kPatchSize * kPatchSize;

// [196, 768]: row-major patch order, features ordered (channel, row, col).
nn::Tensor patch_pixels(const RasterImage& image);

/// Linear patch projection with a learned class token (row 0) and learned
/// positional embeddings -> [1 + 196, d].
class PatchEmbedding {
public:
    PatchEmbedding() = default;
    PatchEmbedding(nn::ParameterStore& store, const std::string& name, std::size_t dim);
    nn::Var operator()(nn::Tape& tape, const RasterImage& image) const;

    [[nodiscard]] nn::ParamId class_token() const noexcept { return cls_; }
    [[nodiscard]] nn::ParamId positions() const noexcept { return pos_; }
    [[nodiscard]] const nn::Linear& projection() const noexcept { return proj_; }

private:
    nn::Linear proj_;
    nn::ParamId cls_;
    nn::ParamId pos_;
};

class VitEncoder {
public:
    VitEncoder() = default;
    VitEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config);
    // [197, d] after the global blocks and a final LayerNorm.
    nn::Var operator()(nn::Tape& tape, const RasterImage& image) const;
    [[nodiscard]] const PatchEmbedding& embedding() const noexcept { return embed_; }

private:
    PatchEmbedding embed_;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm norm_;
};

/// Single encoder over the full raster; the class token feeds one linear layer.
class MotionVit {
public:
    static constexpr const char* kPrefix = "motion_vit";

    MotionVit() = default;
    MotionVit(nn::ParameterStore& store, const ModelConfig& config, bool motion_head = true);
    HeadOutput forward(nn::Tape& tape, const RasterImage& image) const;
    // Encoder class token [1, d].
    nn::Var class_token(nn::Tape& tape, const RasterImage& image) const;
    HeadOutput head(nn::Tape& tape, nn::Var class_token) const;
    [[nodiscard]] const VitEncoder& encoder() const noexcept { return encoder_; }

private:
    ModelConfig config_;
    VitEncoder encoder_;
    nn::Linear head_;
    bool has_head_ = true;
};

/// Separate map and agent encoders. The agent class token is the single query
/// of a cross-attention over the 196 map patch tokens.
class DualMotionVit {
public:
    static constexpr const char* kPrefix = "dual_motion_vit";

    DualMotionVit() = default;
    DualMotionVit(nn::ParameterStore& store, const ModelConfig& config, bool motion_head = true);
    // Fused class token [1, d].
    nn::Var fuse(nn::Tape& tape, const RasterImage& map_image, const RasterImage& agent_image,
                 nn::AttentionProbe* probe = nullptr) const;
    HeadOutput forward(nn::Tape& tape, const RasterImage& map_image, const RasterImage& agent_image,
                       nn::AttentionProbe* probe = nullptr) const;

    [[nodiscard]] const VitEncoder& map_encoder() const noexcept { return map_; }
    [[nodiscard]] const VitEncoder& agent_encoder() const noexcept { return agent_; }
    [[nodiscard]] const nn::TransformerBlock& fusion() const noexcept { return fusion_; }

private:
    ModelConfig config_;
    VitEncoder map_;
    VitEncoder agent_;
    nn::TransformerBlock fusion_;
    nn::Linear head_;
    bool has_head_ = true;
};

}  // namespace redmotion
