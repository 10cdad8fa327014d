#pragma once

#include <vector>

#include "redmotion/data/synthetic.hpp"
#include "redmotion/model_config.hpp"
#include "redmotion/run_config.hpp"

namespace rmtest {

// Small enough for many forward passes in a unit test.
inline redmotion::ModelConfig tiny_model()
{
    redmotion::ModelConfig m;
    m.model_dim = 8;
    m.heads = 2;
    m.local_blocks = 1;
    m.decoder_blocks = 1;
    m.descriptors = 4;
    m.window = 4;
    m.future_steps = 10;
    m.ego_blocks = 1;
    m.head_hidden = 16;
    m.projector = {16, 16, 16};
    m.vit_dim = 8;
    m.vit_heads = 2;
    m.vit_depth = 1;
    return m;
}

inline redmotion::RunConfig tiny_run(redmotion::RunMode mode, redmotion::ModelKind model = redmotion::ModelKind::redmotion)
{
    redmotion::RunConfig c;
    c.mode = mode;
    c.model = model;
    c.model_config = tiny_model();
    c.batch_size = 4;
    c.steps = 6;
    c.lr_init = 1e-3;
    c.lr_final = 1e-5;
    c.validate_every = 3;
    c.validation_scenes = 4;
    c.horizons = {5, 10};
    c.threads = 2;
    return c;
}

inline std::vector<redmotion::RoadScene> tiny_scenes(std::size_t n, std::uint64_t base)
{
    redmotion::data::SyntheticConfig cfg;
    cfg.future_steps = 10;
    std::vector<redmotion::RoadScene> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(redmotion::data::generate_synthetic_scene(cfg, redmotion::data::derive_seed(base, i)));
    return out;
}

}  // namespace rmtest
