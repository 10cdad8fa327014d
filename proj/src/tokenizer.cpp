#include "redmotion/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace redmotion {

TokenType token_type(PolylineKind kind) { return static_cast<TokenType>(static_cast<std::uint8_t>(kind)); }

TokenType token_type(AgentKind kind)
{
    return static_cast<TokenType>(static_cast<std::uint8_t>(TokenType::vehicle) + static_cast<std::uint8_t>(kind));
}

bool is_agent_type(TokenType type) { return type >= TokenType::vehicle; }

bool road_token_less(const RoadEnvToken& a, const RoadEnvToken& b)
{
    const auto key = [](const RoadEnvToken& t) {
        const bool has_poly = t.polyline_id.has_value();
        return std::make_tuple(static_cast<int>(t.type), has_poly, has_poly ? *t.polyline_id : 0, norm(t.position),
                               t.position.x, t.position.y);
    };
    return key(a) < key(b);
}

std::vector<RoadEnvToken> build_road_env_tokens(const LocalRoadGraph& graph)
{
    std::vector<RoadEnvToken> tokens;
    for (const auto& poly : graph.polylines) {
        for (const auto& p : poly.points) tokens.push_back({token_type(poly.kind), p, poly.id});
    }
    for (const auto& agent : graph.agents) tokens.push_back({token_type(agent.kind), agent.position, std::nullopt});
    std::stable_sort(tokens.begin(), tokens.end(), road_token_less);
    return tokens;
}

std::array<EgoTrajToken, kEgoHistory> build_ego_trajectory_tokens(const AgentTrack& track, std::int64_t prediction_start)
{
    const AgentState* reference = nullptr;
    for (std::int64_t step = prediction_start; step > prediction_start - static_cast<std::int64_t>(kEgoHistory); --step) {
        const AgentState* s = track.state_at(step);
        if (s != nullptr && s->valid) {
            reference = s;
            break;
        }
    }
    if (reference == nullptr) {
        throw std::invalid_argument("ego trajectory: track " + std::to_string(track.id) + " has no valid past state");
    }

    std::array<EgoTrajToken, kEgoHistory> tokens{};
    for (std::size_t i = 0; i < kEgoHistory; ++i) {
        const int temporal = static_cast<int>(kEgoHistory - 1 - i);
        const AgentState* s = track.state_at(prediction_start - temporal);
        EgoTrajToken& t = tokens[i];
        t.agent_kind = track.kind;
        t.temporal = temporal;
        t.valid = s != nullptr && s->valid;
        t.position = t.valid ? s->position - reference->position : Vec2{};
    }
    return tokens;
}

VectorAugmentation sample_vector_augmentation(std::mt19937_64& rng)
{
    const double max_rot = kMaxVectorRotationDeg * std::numbers::pi / 180.0;
    std::uniform_real_distribution<double> rot(-max_rot, max_rot);
    std::uniform_real_distribution<double> shift(-kMaxVectorShift, kMaxVectorShift);
    VectorAugmentation aug;
    aug.rotation = rot(rng);
    aug.shift.x = shift(rng);
    aug.shift.y = shift(rng);
    return aug;
}

LocalRoadGraph apply_vector_augmentation(const LocalRoadGraph& graph, const VectorAugmentation& aug)
{
    const double c = std::cos(aug.rotation);
    const double s = std::sin(aug.rotation);
    const auto move = [&](Vec2 p) { return Vec2{c * p.x - s * p.y + aug.shift.x, s * p.x + c * p.y + aug.shift.y}; };
    LocalRoadGraph out = graph;
    for (auto& poly : out.polylines) {
        for (auto& p : poly.points) p = move(p);
    }
    for (auto& agent : out.agents) {
        agent.position = move(agent.position);
        agent.heading = wrap_angle(agent.heading + aug.rotation);
    }
    return out;
}

LocalRoadGraph augment_vector_view(const LocalRoadGraph& graph, std::mt19937_64& rng)
{
    return apply_vector_augmentation(graph, sample_vector_augmentation(rng));
}

}  // namespace redmotion
