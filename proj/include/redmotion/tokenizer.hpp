#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "redmotion/scene.hpp"

namespace redmotion {

// Sort-order of token types; the numeric value is the embedding row.
enum class TokenType : std::uint8_t {
    lane_center = 0,
    road_edge = 1,
    crosswalk = 2,
    stop_line = 3,
    vehicle = 4,
    pedestrian = 5,
    cyclist = 6,
};
inline constexpr std::size_t kTokenTypeCount = 7;
inline constexpr std::size_t kAgentKindCount = 3;

TokenType token_type(PolylineKind kind);
TokenType token_type(AgentKind kind);
bool is_agent_type(TokenType type);

struct RoadEnvToken {
    TokenType type = TokenType::lane_center;
    Vec2 position;
    std::optional<std::int64_t> polyline_id;  // empty for agents

    friend bool operator==(const RoadEnvToken&, const RoadEnvToken&) = default;
};

// Canonical order: type, polyline id (agents first within their type), distance
// to the ego, then x, then y.
bool road_token_less(const RoadEnvToken& a, const RoadEnvToken& b);

/// One token per retained polyline point and per retained agent, in canonical
/// order. An empty graph yields an empty sequence.
std::vector<RoadEnvToken> build_road_env_tokens(const LocalRoadGraph& graph);

inline constexpr std::size_t kEgoHistory = 10;

struct EgoTrajToken {
    AgentKind agent_kind = AgentKind::vehicle;
    int temporal = 0;  // steps until prediction_start
    Vec2 position;     // relative to the current ego position
    bool valid = true;

    friend bool operator==(const EgoTrajToken&, const EgoTrajToken&) = default;
};

/// Exactly kEgoHistory tokens for steps prediction_start-9 ... prediction_start.
/// Missing or invalid steps keep their slot with position (0, 0) and
/// valid = false. Positions are relative to the most recent valid state.
std::array<EgoTrajToken, kEgoHistory> build_ego_trajectory_tokens(const AgentTrack& track, std::int64_t prediction_start);

template <class View>
struct AugmentedPair {
    View view_a;
    View view_b;
};

struct VectorAugmentation {
    double rotation = 0.0;  // radians
    Vec2 shift;
};

inline constexpr double kMaxVectorRotationDeg = 10.0;
inline constexpr double kMaxVectorShift = 1.0;

VectorAugmentation sample_vector_augmentation(std::mt19937_64& rng);
// Rotate about the origin, then translate.
LocalRoadGraph apply_vector_augmentation(const LocalRoadGraph& graph, const VectorAugmentation& aug);
LocalRoadGraph augment_vector_view(const LocalRoadGraph& graph, std::mt19937_64& rng);

}  // namespace redmotion
