#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace redmotion {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

// Rigid 2D pose: position and heading (radians, counter-clockwise from +x).
struct Pose2 {
    Vec2 position;
    double heading = 0.0;

    friend bool operator==(const Pose2&, const Pose2&) = default;
};

// p expressed in the frame of `frame` (translate by -position, rotate by -heading).
Vec2 to_frame(const Pose2& frame, Vec2 p);
double wrap_angle(double a);

enum class PolylineKind : std::uint8_t { lane_center, road_edge, crosswalk, stop_line };
enum class AgentKind : std::uint8_t { vehicle, pedestrian, cyclist };

std::string_view to_string(PolylineKind kind);
std::string_view to_string(AgentKind kind);
PolylineKind parse_polyline_kind(std::string_view s);
AgentKind parse_agent_kind(std::string_view s);

struct MapPolyline {
    std::int64_t id = 0;
    PolylineKind kind = PolylineKind::lane_center;
    std::vector<Vec2> points;

    friend bool operator==(const MapPolyline&, const MapPolyline&) = default;
};

struct AgentState {
    std::int64_t step = 0;
    Vec2 position;
    double heading = 0.0;
    bool valid = true;

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct AgentTrack {
    std::int64_t id = 0;
    AgentKind kind = AgentKind::vehicle;
    std::vector<AgentState> states;

    [[nodiscard]] const AgentState* state_at(std::int64_t step) const;
    friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

// Label: positions at prediction_start + 1 ... prediction_start + T.
struct FutureTrack {
    std::int64_t track_id = 0;
    std::vector<Vec2> positions;
    std::vector<std::uint8_t> valid;

    friend bool operator==(const FutureTrack&, const FutureTrack&) = default;
};

struct RoadScene {
    std::string id;
    double frequency_hz = 10.0;
    std::int64_t prediction_start = 9;
    std::int64_t ego_id = 0;
    std::vector<MapPolyline> polylines;
    std::vector<AgentTrack> tracks;
    std::vector<FutureTrack> future_truth;
    // Pose of the current coordinate frame in the original world frame.
    Pose2 frame;
    // Set by strip_agents: the remaining track only anchors the frame.
    bool map_only = false;

    [[nodiscard]] const AgentTrack* track(std::int64_t track_id) const;
    [[nodiscard]] const FutureTrack* future(std::int64_t track_id) const;
    friend bool operator==(const RoadScene&, const RoadScene&) = default;
};

// Throws std::invalid_argument if a structural invariant is violated.
void validate(const RoadScene& scene);

struct AgentSnapshot {
    std::int64_t id = 0;
    AgentKind kind = AgentKind::vehicle;
    Vec2 position;
    double heading = 0.0;
    bool is_ego = false;

    friend bool operator==(const AgentSnapshot&, const AgentSnapshot&) = default;
};

// Polyline clipped to the lane radius; may hold a single point.
struct LocalPolyline {
    std::int64_t id = 0;
    PolylineKind kind = PolylineKind::lane_center;
    std::vector<Vec2> points;

    friend bool operator==(const LocalPolyline&, const LocalPolyline&) = default;
};

struct LocalRoadGraph {
    std::vector<LocalPolyline> polylines;
    std::vector<AgentSnapshot> agents;
    Pose2 ego_pose;  // ego pose in the original world frame

    friend bool operator==(const LocalRoadGraph&, const LocalRoadGraph&) = default;
};

inline constexpr double kLaneRadius = 50.0;
inline constexpr double kAgentRadius = 25.0;
inline constexpr double kEgoOriginTolerance = 1e-9;

/// Re-expresses every position of the scene in the frame of `agent_id` at
/// prediction_start: translated so the agent sits at the origin and rotated so
/// its heading points along +x. The returned scene's ego_id is `agent_id`.
RoadScene to_ego_frame(const RoadScene& scene, std::int64_t agent_id);

/// Point-wise clip of polylines to kLaneRadius (inclusive) and of agents to
/// kAgentRadius at prediction_start. The ego is always kept. Map-only scenes
/// contribute no agents.
LocalRoadGraph extract_local_graph(const RoadScene& scene);

}  // namespace redmotion
