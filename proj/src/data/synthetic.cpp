#include "redmotion/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace redmotion::data {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, Range r) { return std::uniform_real_distribution<double>(r.min, r.max)(rng); }

void check_range(const Range& r, const char* name)
{
    if (!(r.min < r.max) || !std::isfinite(r.min) || !std::isfinite(r.max)) {
        throw std::invalid_argument(std::string("synthetic config: degenerate range for ") + name);
    }
}

Range parse_range(const std::string& key, const std::string& value)
{
    std::istringstream in(value);
    Range r;
    char sep = 0;
    if (!(in >> r.min) || !(in >> sep) || sep != ',' || !(in >> r.max)) {
        throw std::invalid_argument("synthetic config: '" + key + "' expects 'min,max', got '" + value + "'");
    }
    return r;
}

AgentKind sample_kind(std::mt19937_64& rng, const double weights[3])
{
    std::discrete_distribution<int> dist({weights[0], weights[1], weights[2]});
    return static_cast<AgentKind>(dist(rng));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(splitmix64(base) ^ (index + 1)); }

void SyntheticConfig::validate() const
{
    if (lane_count_min < 1 || lane_count_max < lane_count_min) throw std::invalid_argument("synthetic config: bad lane count range");
    if (agent_count_min < 1 || agent_count_max < agent_count_min) throw std::invalid_argument("synthetic config: bad agent count range");
    check_range(arc_radius, "arc_radius");
    check_range(lane_length, "lane_length");
    check_range(vehicle_speed, "vehicle_speed");
    check_range(pedestrian_speed, "pedestrian_speed");
    check_range(cyclist_speed, "cyclist_speed");
    if (arc_radius.min <= 0.0) throw std::invalid_argument("synthetic config: arc radius must be positive");
    if (!(point_spacing > 0.0)) throw std::invalid_argument("synthetic config: point_spacing must be positive");
    if (past_steps < 1) throw std::invalid_argument("synthetic config: past_steps must be >= 1");
    if (future_steps < 1) throw std::invalid_argument("synthetic config: future_steps must be >= 1");
    if (!(frequency_hz > 0.0)) throw std::invalid_argument("synthetic config: frequency_hz must be positive");
    if (kind_weights[0] <= 0.0 || kind_weights[1] < 0.0 || kind_weights[2] < 0.0) {
        throw std::invalid_argument("synthetic config: kind weights need a positive vehicle share");
    }
}

void apply_synthetic_option(SyntheticConfig& c, const std::string& key, const std::string& value)
{
    const auto as_int = [&] { return std::stoi(value); };
    const auto as_double = [&] { return std::stod(value); };
    if (key == "lane_count") {
        const Range r = parse_range(key, value);
        c.lane_count_min = static_cast<int>(r.min);
        c.lane_count_max = static_cast<int>(r.max);
    } else if (key == "agent_count") {
        const Range r = parse_range(key, value);
        c.agent_count_min = static_cast<int>(r.min);
        c.agent_count_max = static_cast<int>(r.max);
    } else if (key == "straight_probability") c.straight_probability = as_double();
    else if (key == "arc_radius") c.arc_radius = parse_range(key, value);
    else if (key == "lane_length") c.lane_length = parse_range(key, value);
    else if (key == "point_spacing") c.point_spacing = as_double();
    else if (key == "lane_spread") c.lane_spread = as_double();
    else if (key == "road_edges") c.road_edges = value == "true" || value == "1";
    else if (key == "lane_half_width") c.lane_half_width = as_double();
    else if (key == "crosswalk_probability") c.crosswalk_probability = as_double();
    else if (key == "stop_line_probability") c.stop_line_probability = as_double();
    else if (key == "vehicle_speed") c.vehicle_speed = parse_range(key, value);
    else if (key == "pedestrian_speed") c.pedestrian_speed = parse_range(key, value);
    else if (key == "cyclist_speed") c.cyclist_speed = parse_range(key, value);
    else if (key == "kind_weights") {
        std::istringstream in(value);
        char sep = 0;
        if (!(in >> c.kind_weights[0] >> sep >> c.kind_weights[1] >> sep >> c.kind_weights[2])) {
            throw std::invalid_argument("synthetic config: kind_weights expects 'v,p,c'");
        }
    } else if (key == "invalid_step_probability") c.invalid_step_probability = as_double();
    else if (key == "past_steps") c.past_steps = as_int();
    else if (key == "future_steps") c.future_steps = as_int();
    else if (key == "frequency_hz") c.frequency_hz = as_double();
    else if (key == "seed") c.seed = std::stoull(value);
    else throw std::invalid_argument("synthetic config: unknown key '" + key + "'");
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open synthetic config '" + path.string() + "'");
    SyntheticConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        apply_synthetic_option(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    config.validate();
    return config;
}

Vec2 LaneGeometry::position(double s) const
{
    if (const auto* straight = std::get_if<StraightLane>(&shape)) {
        return {straight->origin.x + s * std::cos(straight->heading), straight->origin.y + s * std::sin(straight->heading)};
    }
    const auto& arc = std::get<ArcLane>(shape);
    const double angle = arc.start_angle + arc.turn * s / arc.radius;
    return {arc.center.x + arc.radius * std::cos(angle), arc.center.y + arc.radius * std::sin(angle)};
}

double LaneGeometry::heading(double s) const
{
    if (const auto* straight = std::get_if<StraightLane>(&shape)) return wrap_angle(straight->heading);
    const auto& arc = std::get<ArcLane>(shape);
    return wrap_angle(arc.start_angle + arc.turn * s / arc.radius + arc.turn * std::numbers::pi / 2.0);
}

Vec2 LaneGeometry::offset_position(double s, double offset) const
{
    const Vec2 p = position(s);
    const double h = heading(s);
    return {p.x - offset * std::sin(h), p.y + offset * std::cos(h)};
}

SyntheticPlan plan_synthetic_scene(const SyntheticConfig& config, std::uint64_t seed)
{
    config.validate();
    std::mt19937_64 rng(splitmix64(seed));
    SyntheticPlan plan;
    plan.scene_id = "synthetic-" + std::to_string(seed);

    const int lane_count = std::uniform_int_distribution<int>(config.lane_count_min, config.lane_count_max)(rng);
    std::uniform_real_distribution<double> spread(-config.lane_spread, config.lane_spread);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < lane_count; ++i) {
        const Vec2 through{spread(rng), spread(rng)};
        const double heading = angle(rng);
        double length = uniform(rng, config.lane_length);
        LaneGeometry lane;
        if (unit(rng) < config.straight_probability) {
            lane.shape = StraightLane{through, heading};
        } else {
            const double radius = uniform(rng, config.arc_radius);
            const double turn = unit(rng) < 0.5 ? 1.0 : -1.0;
            // Left normal for counter-clockwise turns, right normal otherwise.
            const Vec2 center{through.x - turn * radius * std::sin(heading), through.y + turn * radius * std::cos(heading)};
            lane.shape = ArcLane{center, radius, std::atan2(through.y - center.y, through.x - center.x), turn};
            length = std::min(length, std::numbers::pi * radius);
        }
        lane.s_begin = -0.5 * length;
        lane.s_end = 0.5 * length;
        plan.lanes.push_back(lane);

        if (unit(rng) < config.crosswalk_probability) {
            plan.markings.push_back({plan.lanes.size() - 1, lane.s_begin + unit(rng) * length, PolylineKind::crosswalk});
        }
        if (unit(rng) < config.stop_line_probability) {
            plan.markings.push_back({plan.lanes.size() - 1, lane.s_begin + unit(rng) * length, PolylineKind::stop_line});
        }
    }

    const int agent_count = std::uniform_int_distribution<int>(config.agent_count_min, config.agent_count_max)(rng);
    std::vector<std::int64_t> vehicles;
    for (int i = 0; i < agent_count; ++i) {
        PlannedAgent agent;
        agent.id = i + 1;
        agent.kind = i == 0 ? AgentKind::vehicle : sample_kind(rng, config.kind_weights);
        agent.lane = std::uniform_int_distribution<std::size_t>(0, plan.lanes.size() - 1)(rng);
        const auto& lane = plan.lanes[agent.lane];
        agent.s_now = lane.s_begin + unit(rng) * 0.5 * (lane.s_end - lane.s_begin);
        const Range speed = agent.kind == AgentKind::vehicle      ? config.vehicle_speed
                            : agent.kind == AgentKind::pedestrian ? config.pedestrian_speed
                                                                  : config.cyclist_speed;
        agent.speed = uniform(rng, speed);
        if (agent.kind == AgentKind::vehicle) vehicles.push_back(agent.id);
        plan.agents.push_back(agent);
    }
    plan.ego_id = vehicles[std::uniform_int_distribution<std::size_t>(0, vehicles.size() - 1)(rng)];

    if (config.invalid_step_probability > 0.0) {
        const std::int64_t now = config.past_steps - 1;
        for (const auto& agent : plan.agents) {
            for (std::int64_t step = 0; step < now; ++step) {
                if (unit(rng) < config.invalid_step_probability) plan.invalid_steps.emplace_back(agent.id, step);
            }
        }
    }
    return plan;
}

RoadScene render_plan(const SyntheticPlan& plan, const SyntheticConfig& config)
{
    RoadScene scene;
    scene.id = plan.scene_id;
    scene.frequency_hz = config.frequency_hz;
    scene.prediction_start = config.past_steps - 1;
    scene.ego_id = plan.ego_id;

    std::int64_t next_id = 1;
    const auto sample_curve = [&](const LaneGeometry& lane, double offset) {
        std::vector<Vec2> points;
        const double length = lane.s_end - lane.s_begin;
        const auto count = static_cast<std::size_t>(std::floor(length / config.point_spacing));
        for (std::size_t k = 0; k <= count; ++k) {
            points.push_back(lane.offset_position(lane.s_begin + static_cast<double>(k) * config.point_spacing, offset));
        }
        if (length - static_cast<double>(count) * config.point_spacing > 1e-6) points.push_back(lane.offset_position(lane.s_end, offset));
        return points;
    };
    for (const auto& lane : plan.lanes) {
        scene.polylines.push_back({next_id++, PolylineKind::lane_center, sample_curve(lane, 0.0)});
        if (config.road_edges) {
            scene.polylines.push_back({next_id++, PolylineKind::road_edge, sample_curve(lane, config.lane_half_width)});
            scene.polylines.push_back({next_id++, PolylineKind::road_edge, sample_curve(lane, -config.lane_half_width)});
        }
    }
    for (const auto& mark : plan.markings) {
        const auto& lane = plan.lanes[mark.lane];
        const double w = config.lane_half_width + 1.0;
        if (mark.kind == PolylineKind::stop_line) {
            scene.polylines.push_back({next_id++, mark.kind, {lane.offset_position(mark.s, w), lane.offset_position(mark.s, -w)}});
        } else {
            constexpr double half_depth = 1.5;
            scene.polylines.push_back({next_id++,
                                       mark.kind,
                                       {lane.offset_position(mark.s - half_depth, w), lane.offset_position(mark.s - half_depth, -w),
                                        lane.offset_position(mark.s + half_depth, -w), lane.offset_position(mark.s + half_depth, w)}});
        }
    }

    const double dt = 1.0 / config.frequency_hz;
    const std::int64_t now = scene.prediction_start;
    for (const auto& agent : plan.agents) {
        const auto& lane = plan.lanes[agent.lane];
        AgentTrack track{agent.id, agent.kind, {}};
        for (std::int64_t step = 0; step <= now; ++step) {
            const double s = agent.s_now + agent.speed * static_cast<double>(step - now) * dt;
            const bool invalid = std::find(plan.invalid_steps.begin(), plan.invalid_steps.end(),
                                           std::pair<std::int64_t, std::int64_t>{agent.id, step}) != plan.invalid_steps.end();
            track.states.push_back({step, lane.position(s), lane.heading(s), !invalid});
        }
        scene.tracks.push_back(std::move(track));

        FutureTrack future{agent.id, {}, {}};
        for (int k = 1; k <= config.future_steps; ++k) {
            future.positions.push_back(lane.position(agent.s_now + agent.speed * static_cast<double>(k) * dt));
            future.valid.push_back(1);
        }
        scene.future_truth.push_back(std::move(future));
    }
    return scene;
}

RoadScene generate_synthetic_scene(const SyntheticConfig& config, std::uint64_t seed)
{
    return render_plan(plan_synthetic_scene(config, seed), config);
}

}  // namespace redmotion::data
