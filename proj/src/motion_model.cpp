#include "redmotion/motion_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace redmotion {

using nn::Init;
using nn::Tape;
using nn::Tensor;
using nn::Var;

PreparedSample prepare_sample(const RoadScene& scene, std::int64_t agent_id, std::size_t future_steps)
{
    PreparedSample s;
    s.scene_id = scene.id;
    s.agent_id = agent_id;
    s.ego_scene = to_ego_frame(scene, agent_id);
    const AgentTrack* track = s.ego_scene.track(agent_id);
    s.kind = track->kind;
    s.graph = extract_local_graph(s.ego_scene);
    s.road_tokens = build_road_env_tokens(s.graph);
    s.ego_tokens = build_ego_trajectory_tokens(*track, s.ego_scene.prediction_start);
    if (const FutureTrack* future = s.ego_scene.future(agent_id)) {
        FutureTruth truth;
        truth.positions.assign(future_steps, Vec2{});
        truth.valid.assign(future_steps, 0);
        const std::size_t n = std::min(future_steps, future->positions.size());
        for (std::size_t t = 0; t < n; ++t) {
            truth.positions[t] = future->positions[t];
            truth.valid[t] = future->valid[t];
        }
        s.truth = std::move(truth);
    }
    return s;
}

HeadOutput split_head_output(Var flat, std::size_t future_steps, double coordinate_scale)
{
    const std::size_t traj = kModes * 2 * future_steps;
    if (flat.rows() != 1 || flat.cols() != traj + kModes) {
        throw std::invalid_argument("motion head: expected [1, " + std::to_string(traj + kModes) + "] output, got " +
                                    flat.value().shape_string());
    }
    Var proposals = nn::scale(nn::reshape(nn::slice_cols(flat, 0, traj), kModes, 2 * future_steps), 1.0 / coordinate_scale);
    Var logits = nn::slice_cols(flat, traj, kModes);
    return {proposals, logits};
}

MotionPrediction to_prediction(const HeadOutput& out)
{
    const Tensor& mu = out.proposals.value();
    const Tensor& z = out.logits.value();
    MotionPrediction p(mu.cols / 2);
    double mx = *std::max_element(z.data.begin(), z.data.end());
    double total = 0.0;
    for (std::size_t k = 0; k < kModes; ++k) {
        p.confidences[k] = std::exp(z.data[k] - mx);
        total += p.confidences[k];
    }
    for (auto& c : p.confidences) c /= total;
    for (std::size_t k = 0; k < kModes; ++k) {
        for (std::size_t t = 0; t < p.steps; ++t) p.at(k, t) = {mu(k, 2 * t), mu(k, 2 * t + 1)};
    }
    return p;
}

std::vector<std::uint8_t> ego_valid_mask(const EgoTokens& tokens)
{
    std::vector<std::uint8_t> valid(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) valid[i] = tokens[i].valid ? 1 : 0;
    return valid;
}

RedMotion::RedMotion(nn::ParameterStore& store, const ModelConfig& config, RedMotionParts parts)
    : config_(config), encoder_(store, config, parts.projector), parts_(parts)
{
    const std::string p = kPrefix;
    const std::size_t d = config_.model_dim;
    kind_table_ = store.add(p + "/ego/kind_embedding", kAgentKindCount, d - 3, Init::normal_small);
    ego_input_ = nn::Linear(store, p + "/ego/input", d, d);
    for (std::size_t i = 0; i < config_.ego_blocks; ++i) {
        ego_blocks_.emplace_back(store, p + "/ego/block" + std::to_string(i), config_.attention(), nn::BlockKind::global,
                                 config_.mlp_ratio);
    }
    if (parts.motion_head) {
        fusion_ = nn::TransformerBlock(store, p + "/fusion", config_.attention(), nn::BlockKind::cross, config_.mlp_ratio);
        fused_norm_ = nn::LayerNorm(store, p + "/fused_norm", d);
        const std::size_t pooled = config_.pool == PoolAxis::tokens ? d : kEgoHistory;
        const std::size_t head_widths[] = {pooled, config_.head_hidden, kModes * 2 * config_.future_steps + kModes};
        head_ = nn::Mlp(store, p + "/head", head_widths);
    }
    if (parts.trajectory_projector) {
        const std::size_t widths[] = {d, config_.projector[0], config_.projector[1], config_.projector[2]};
        traj_projector_ = nn::Mlp(store, p + "/trajectory_projector", widths);
    }
}

Var RedMotion::encode_ego_trajectory(Tape& tape, const EgoTokens& tokens) const
{
    const auto valid = ego_valid_mask(tokens);
    if (std::none_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; })) {
        throw std::invalid_argument("encode_ego_trajectory: all trajectory tokens are invalid");
    }
    std::vector<std::size_t> kinds(tokens.size());
    Tensor features(tokens.size(), 3);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        kinds[i] = static_cast<std::size_t>(tokens[i].agent_kind);
        features(i, 0) = static_cast<double>(tokens[i].temporal) / static_cast<double>(kEgoHistory);
        features(i, 1) = tokens[i].position.x * config_.coordinate_scale;
        features(i, 2) = tokens[i].position.y * config_.coordinate_scale;
    }
    const Var parts[] = {nn::gather_rows(tape.param(kind_table_), kinds), tape.constant(std::move(features))};
    Var x = ego_input_(tape, nn::concat_cols(parts));
    const auto mask = nn::AttentionMask::key_padding(tokens.size(), valid);
    for (const auto& block : ego_blocks_) x = block.forward(tape, x, &mask);
    return x;
}

Var RedMotion::fuse(Tape& tape, Var trajectory, Var descriptors, nn::AttentionProbe* probe) const
{
    if (!parts_.motion_head) throw std::logic_error("model was built without a motion head");
    return fusion_.forward_cross(tape, trajectory, descriptors, nullptr, probe);
}

HeadOutput RedMotion::predict_head(Tape& tape, Var fused, std::span<const std::uint8_t> valid) const
{
    if (!parts_.motion_head) throw std::logic_error("model was built without a motion head");
    Var x = fused_norm_(tape, fused);
    Var pooled = config_.pool == PoolAxis::tokens ? nn::mean_rows(x, valid) : nn::reshape(nn::mean_cols(x), 1, x.rows());
    return split_head_output(head_(tape, pooled), config_.future_steps, config_.coordinate_scale);
}

Var RedMotion::pool_trajectory(Var trajectory, std::span<const std::uint8_t> valid) const
{
    return nn::mean_rows(trajectory, valid);
}

Var RedMotion::project_trajectory(Tape& tape, Var pooled) const
{
    if (!parts_.trajectory_projector) throw std::logic_error("model was built without a trajectory projector");
    return traj_projector_(tape, pooled);
}

RedMotion::Forward RedMotion::forward(Tape& tape, const PreparedSample& sample) const
{
    Var red = encoder_.encode(tape, sample.road_tokens);
    Var traj = encode_ego_trajectory(tape, sample.ego_tokens);
    Var fused = fuse(tape, traj, red);
    const auto valid = ego_valid_mask(sample.ego_tokens);
    return {predict_head(tape, fused, valid), red, traj};
}

MotionPrediction predict(const RedMotion& model, const nn::ParameterStore& store, const PreparedSample& sample)
{
    Tape tape(&store);
    return to_prediction(model.forward(tape, sample).head);
}

MotionPrediction redmotion_forward(const RedMotion& model, const nn::ParameterStore& store, const RoadScene& scene,
                                   std::int64_t agent_id)
{
    return predict(model, store, prepare_sample(scene, agent_id, model.config().future_steps));
}

}  // namespace redmotion
