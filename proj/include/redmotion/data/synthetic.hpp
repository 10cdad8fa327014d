#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "redmotion/scene.hpp"

namespace redmotion::data {

struct Range {
    double min = 0.0;
    double max = 0.0;
};

struct SyntheticConfig {
    int lane_count_min = 2;
    int lane_count_max = 3;
    double straight_probability = 0.5;
    Range arc_radius{20.0, 80.0};
    Range lane_length{60.0, 120.0};
    double point_spacing = 4.0;
    // Placement box half-width for the point each lane passes through.
    double lane_spread = 15.0;
    bool road_edges = true;
    double lane_half_width = 1.75;
    double crosswalk_probability = 0.3;
    double stop_line_probability = 0.3;

    int agent_count_min = 2;
    int agent_count_max = 4;
    Range vehicle_speed{3.0, 12.0};
    Range pedestrian_speed{0.5, 2.0};
    Range cyclist_speed{2.0, 6.0};
    // vehicle : pedestrian : cyclist
    double kind_weights[3] = {0.7, 0.2, 0.1};
    double invalid_step_probability = 0.0;

    int past_steps = 10;
    int future_steps = 50;
    double frequency_hz = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Reads `key = value` lines (# comments) over the defaults.
SyntheticConfig load_synthetic_config(const std::filesystem::path& path);
void apply_synthetic_option(SyntheticConfig& config, const std::string& key, const std::string& value);

struct StraightLane {
    Vec2 origin;
    double heading = 0.0;
};

// Circular arc traversed counter-clockwise (turn = +1) or clockwise (turn = -1).
struct ArcLane {
    Vec2 center;
    double radius = 1.0;
    double start_angle = 0.0;
    double turn = 1.0;
};

/// Arc-length parameterized lane centerline. Positions for any s, including
/// beyond the drawn extent, are the closed-form continuation.
struct LaneGeometry {
    std::variant<StraightLane, ArcLane> shape;
    double s_begin = 0.0;
    double s_end = 0.0;

    [[nodiscard]] Vec2 position(double s) const;
    [[nodiscard]] double heading(double s) const;
    // Curve offset laterally by `offset` (left positive).
    [[nodiscard]] Vec2 offset_position(double s, double offset) const;
};

/// Agents follow lane centerlines at constant speed; the future labels are the
/// exact continuation along the lane. Same (config, seed) gives identical scenes.
RoadScene generate_synthetic_scene(const SyntheticConfig& config, std::uint64_t seed);

struct PlannedAgent {
    std::int64_t id = 0;
    AgentKind kind = AgentKind::vehicle;
    std::size_t lane = 0;
    double s_now = 0.0;  // arc length at prediction_start
    double speed = 0.0;  // m/s along the lane
};

// Crosswalk or stop line placed across a lane at arc length s.
struct PlannedMarking {
    std::size_t lane = 0;
    double s = 0.0;
    PolylineKind kind = PolylineKind::crosswalk;
};

struct SyntheticPlan {
    std::string scene_id;
    std::vector<LaneGeometry> lanes;
    std::vector<PlannedMarking> markings;
    std::vector<PlannedAgent> agents;
    std::vector<std::pair<std::int64_t, std::int64_t>> invalid_steps;  // (agent id, step)
    std::int64_t ego_id = 0;
};

// The sampled layout behind generate_synthetic_scene(config, seed).
SyntheticPlan plan_synthetic_scene(const SyntheticConfig& config, std::uint64_t seed);
RoadScene render_plan(const SyntheticPlan& plan, const SyntheticConfig& config);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace redmotion::data
