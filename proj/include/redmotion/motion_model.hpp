#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "redmotion/model_config.hpp"
#include "redmotion/nn/layers.hpp"
#include "redmotion/prediction.hpp"
#include "redmotion/red_encoder.hpp"
#include "redmotion/scene.hpp"
#include "redmotion/tokenizer.hpp"

namespace redmotion {

using EgoTokens = std::array<EgoTrajToken, kEgoHistory>;

/// Everything the models need for one (scene, agent) pair, already in the
/// agent's frame.
struct PreparedSample {
    std::string scene_id;
    std::int64_t agent_id = 0;
    AgentKind kind = AgentKind::vehicle;
    RoadScene ego_scene;
    LocalRoadGraph graph;
    std::vector<RoadEnvToken> road_tokens;
    EgoTokens ego_tokens{};
    std::optional<FutureTruth> truth;  // resized to the model horizon when labels exist
};

// to_ego_frame -> extract_local_graph -> tokenize. Ground truth, when present,
// is truncated or padded (invalid) to `future_steps`.
PreparedSample prepare_sample(const RoadScene& scene, std::int64_t agent_id, std::size_t future_steps);

// Raw differentiable head output: proposals [6, 2T] in meters, logits [1, 6].
struct HeadOutput {
    nn::Var proposals;
    nn::Var logits;
};

MotionPrediction to_prediction(const HeadOutput& out);

// Shared convention for all models: a flat [1, 6*2T + 6] vector split into
// trajectories (divided by the coordinate scale) and confidence logits.
HeadOutput split_head_output(nn::Var flat, std::size_t future_steps, double coordinate_scale);

struct RedMotionParts {
    bool projector = false;             // twin-loss projector on the descriptors
    bool trajectory_projector = false;  // projector on the pooled ego encoding
    bool motion_head = true;            // fusion block and motion head
};

class RedMotion {
public:
    static constexpr const char* kPrefix = "redmotion";

    RedMotion() = default;
    RedMotion(nn::ParameterStore& store, const ModelConfig& config, RedMotionParts parts = {});

    // [10, d]; invalid tokens are masked as attention keys.
    nn::Var encode_ego_trajectory(nn::Tape& tape, const EgoTokens& tokens) const;
    // 10 trajectory queries over the K descriptors -> [10, d].
    nn::Var fuse(nn::Tape& tape, nn::Var trajectory, nn::Var descriptors, nn::AttentionProbe* probe = nullptr) const;
    // Pooling over the configured axis (valid rows only for token pooling), then the MLP head.
    HeadOutput predict_head(nn::Tape& tape, nn::Var fused, std::span<const std::uint8_t> valid) const;
    // Pooled ego encoding [1, d] fed to the trajectory projector.
    nn::Var pool_trajectory(nn::Var trajectory, std::span<const std::uint8_t> valid) const;
    nn::Var project_trajectory(nn::Tape& tape, nn::Var pooled) const;

    struct Forward {
        HeadOutput head;
        nn::Var descriptors;
        nn::Var trajectory;
    };
    Forward forward(nn::Tape& tape, const PreparedSample& sample) const;

    [[nodiscard]] const RedEncoder& encoder() const noexcept { return encoder_; }
    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    [[nodiscard]] const RedMotionParts& parts() const noexcept { return parts_; }
    [[nodiscard]] const nn::Mlp& head() const noexcept { return head_; }
    [[nodiscard]] nn::ParamId kind_table() const noexcept { return kind_table_; }
    [[nodiscard]] const nn::Linear& ego_input() const noexcept { return ego_input_; }
    [[nodiscard]] const nn::TransformerBlock& fusion() const noexcept { return fusion_; }

private:
    ModelConfig config_;
    RedEncoder encoder_;
    nn::ParamId kind_table_;
    nn::Linear ego_input_;
    std::vector<nn::TransformerBlock> ego_blocks_;
    nn::TransformerBlock fusion_;
    nn::LayerNorm fused_norm_;
    nn::Mlp head_;
    nn::Mlp traj_projector_;
    RedMotionParts parts_;
};

std::vector<std::uint8_t> ego_valid_mask(const EgoTokens& tokens);

// Inference helper: one forward on a private tape.
MotionPrediction predict(const RedMotion& model, const nn::ParameterStore& store, const PreparedSample& sample);
// to_ego_frame -> ... -> head for one agent.
MotionPrediction redmotion_forward(const RedMotion& model, const nn::ParameterStore& store, const RoadScene& scene,
                                   std::int64_t agent_id);

}  // namespace redmotion
