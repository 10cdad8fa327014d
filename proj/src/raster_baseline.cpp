#include "redmotion/raster_baseline.hpp"

#include <stdexcept>

namespace redmotion {

using nn::Init;
using nn::Tape;
using nn::Tensor;
using nn::Var;

Tensor patch_pixels(const RasterImage& image)
{
    if (image.data.size() != RasterImage::kChannels * RasterImage::kPixels) {
        throw std::invalid_argument("patchify: expected a 3x224x224 image, got " + std::to_string(image.data.size()) + " values");
    }
    Tensor out(kPatchCount, kPatchFeatures);
    for (std::size_t pr = 0; pr < kPatchesPerSide; ++pr) {
        for (std::size_t pc = 0; pc < kPatchesPerSide; ++pc) {
            double* row = out.data.data() + (pr * kPatchesPerSide + pc) * kPatchFeatures;
            for (std::size_t ch = 0; ch < RasterImage::kChannels; ++ch) {
                for (std::size_t r = 0; r < kPatchSize; ++r) {
                    for (std::size_t c = 0; c < kPatchSize; ++c) {
                        *row++ = image.at(ch, pr * kPatchSize + r, pc * kPatchSize + c);
                    }
                }
            }
        }
    }
    return out;
}

PatchEmbedding::PatchEmbedding(nn::ParameterStore& store, const std::string& name, std::size_t dim)
    : proj_(store, name + "/projection", kPatchFeatures, dim),
      cls_(store.add(name + "/class_token", 1, dim, Init::normal_small)),
      pos_(store.add(name + "/positions", kPatchCount + 1, dim, Init::normal_small))
{
}

Var PatchEmbedding::operator()(Tape& tape, const RasterImage& image) const
{
    Var patches = proj_(tape, tape.constant(patch_pixels(image)));
    const Var rows[] = {tape.param(cls_), patches};
    return nn::add(nn::concat_rows(rows), tape.param(pos_));
}

VitEncoder::VitEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config)
    : embed_(store, name + "/patch", config.vit_dim)
{
    for (std::size_t i = 0; i < config.vit_depth; ++i) {
        blocks_.emplace_back(store, name + "/block" + std::to_string(i), config.vit_attention(), nn::BlockKind::global,
                             config.mlp_ratio, false);
    }
    norm_ = nn::LayerNorm(store, name + "/norm", config.vit_dim);
}

Var VitEncoder::operator()(Tape& tape, const RasterImage& image) const
{
    Var x = embed_(tape, image);
    for (const auto& block : blocks_) x = block.forward(tape, x);
    return norm_(tape, x);
}

MotionVit::MotionVit(nn::ParameterStore& store, const ModelConfig& config, bool motion_head)
    : config_(config), encoder_(store, std::string(kPrefix) + "/encoder", config), has_head_(motion_head)
{
    config_.validate();
    if (motion_head) head_ = nn::Linear(store, std::string(kPrefix) + "/head", config.vit_dim, kModes * 2 * config.future_steps + kModes);
}

Var MotionVit::class_token(Tape& tape, const RasterImage& image) const { return nn::slice_rows(encoder_(tape, image), 0, 1); }

HeadOutput MotionVit::head(Tape& tape, Var cls) const
{
    if (!has_head_) throw std::logic_error("motion_vit was built without a motion head");
    return split_head_output(head_(tape, cls), config_.future_steps, config_.coordinate_scale);
}

HeadOutput MotionVit::forward(Tape& tape, const RasterImage& image) const { return head(tape, class_token(tape, image)); }

DualMotionVit::DualMotionVit(nn::ParameterStore& store, const ModelConfig& config, bool motion_head)
    : config_(config),
      map_(store, std::string(kPrefix) + "/map", config),
      agent_(store, std::string(kPrefix) + "/agent", config),
      has_head_(motion_head)
{
    config_.validate();
    if (motion_head) {
        fusion_ = nn::TransformerBlock(store, std::string(kPrefix) + "/fusion", config.vit_attention(), nn::BlockKind::cross,
                                       config.mlp_ratio);
        head_ = nn::Linear(store, std::string(kPrefix) + "/head", config.vit_dim, kModes * 2 * config.future_steps + kModes);
    }
}

Var DualMotionVit::fuse(Tape& tape, const RasterImage& map_image, const RasterImage& agent_image, nn::AttentionProbe* probe) const
{
    if (!has_head_) throw std::logic_error("dual_motion_vit was built without a motion head");
    Var map_tokens = nn::slice_rows(map_(tape, map_image), 1, kPatchCount);
    Var agent_cls = nn::slice_rows(agent_(tape, agent_image), 0, 1);
    return fusion_.forward_cross(tape, agent_cls, map_tokens, nullptr, probe);
}

HeadOutput DualMotionVit::forward(Tape& tape, const RasterImage& map_image, const RasterImage& agent_image,
                                  nn::AttentionProbe* probe) const
{
    return split_head_output(head_(tape, fuse(tape, map_image, agent_image, probe)), config_.future_steps,
                             config_.coordinate_scale);
}

}  // namespace redmotion
