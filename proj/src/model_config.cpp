#include "redmotion/model_config.hpp"

#include <sstream>
#include <stdexcept>

namespace redmotion {

void ModelConfig::validate() const
{
    attention().validate();
    if (model_dim < 4) throw std::invalid_argument("model config: model_dim must be at least 4");
    if (local_blocks == 0) throw std::invalid_argument("model config: local_blocks must be at least 1");
    if (decoder_blocks == 0) throw std::invalid_argument("model config: decoder_blocks must be at least 1");
    if (descriptors == 0) throw std::invalid_argument("model config: descriptors must be at least 1");
    if (window < 2 || window % 2 != 0) throw std::invalid_argument("model config: window must be even and >= 2");
    if (future_steps == 0) throw std::invalid_argument("model config: future_steps must be at least 1");
    if (mlp_ratio == 0 || head_hidden == 0) throw std::invalid_argument("model config: hidden widths must be positive");
    for (auto w : projector) {
        if (w == 0) throw std::invalid_argument("model config: projector widths must be positive");
    }
    if (!(coordinate_scale > 0.0)) throw std::invalid_argument("model config: coordinate_scale must be positive");
    if (vit_depth == 0) throw std::invalid_argument("model config: vit_depth must be at least 1");
    vit_attention().validate();
}

std::string ModelConfig::canonical() const
{
    std::ostringstream out;
    out.precision(17);
    out << "model_dim=" << model_dim << ";heads=" << heads << ";local_blocks=" << local_blocks
        << ";decoder_blocks=" << decoder_blocks << ";descriptors=" << descriptors << ";window=" << window
        << ";future_steps=" << future_steps << ";ego_blocks=" << ego_blocks << ";mlp_ratio=" << mlp_ratio
        << ";head_hidden=" << head_hidden << ";projector=" << projector[0] << ',' << projector[1] << ',' << projector[2]
        << ";pool=" << to_string(pool) << ";coordinate_scale=" << coordinate_scale << ";vit_dim=" << vit_dim
        << ";vit_heads=" << vit_heads << ";vit_depth=" << vit_depth;
    return out.str();
}

std::string to_string(PoolAxis axis) { return axis == PoolAxis::tokens ? "tokens" : "features"; }

PoolAxis parse_pool_axis(const std::string& text)
{
    if (text == "tokens") return PoolAxis::tokens;
    if (text == "features") return PoolAxis::features;
    throw std::invalid_argument("unknown pooling axis '" + text + "' (expected tokens or features)");
}

}  // namespace redmotion
