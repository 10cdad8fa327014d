#include "redmotion/scene.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace redmotion {

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

Vec2 to_frame(const Pose2& frame, Vec2 p)
{
    const double c = std::cos(frame.heading);
    const double s = std::sin(frame.heading);
    const Vec2 d = p - frame.position;
    return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a;
}

std::string_view to_string(PolylineKind kind)
{
    switch (kind) {
    case PolylineKind::lane_center: return "lane_center";
    case PolylineKind::road_edge: return "road_edge";
    case PolylineKind::crosswalk: return "crosswalk";
    case PolylineKind::stop_line: return "stop_line";
    }
    return "?";
}

std::string_view to_string(AgentKind kind)
{
    switch (kind) {
    case AgentKind::vehicle: return "vehicle";
    case AgentKind::pedestrian: return "pedestrian";
    case AgentKind::cyclist: return "cyclist";
    }
    return "?";
}

PolylineKind parse_polyline_kind(std::string_view s)
{
    for (auto k : {PolylineKind::lane_center, PolylineKind::road_edge, PolylineKind::crosswalk, PolylineKind::stop_line}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown polyline kind '" + std::string(s) + "'");
}

AgentKind parse_agent_kind(std::string_view s)
{
    for (auto k : {AgentKind::vehicle, AgentKind::pedestrian, AgentKind::cyclist}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown agent kind '" + std::string(s) + "'");
}

const AgentState* AgentTrack::state_at(std::int64_t step) const
{
    for (const auto& s : states) {
        if (s.step == step) return &s;
        if (s.step > step) break;
    }
    return nullptr;
}

const AgentTrack* RoadScene::track(std::int64_t track_id) const
{
    for (const auto& t : tracks) {
        if (t.id == track_id) return &t;
    }
    return nullptr;
}

const FutureTrack* RoadScene::future(std::int64_t track_id) const
{
    for (const auto& f : future_truth) {
        if (f.track_id == track_id) return &f;
    }
    return nullptr;
}

void validate(const RoadScene& scene)
{
    const auto fail = [&](const std::string& what) {
        throw std::invalid_argument("scene '" + scene.id + "': " + what);
    };
    if (!(scene.frequency_hz > 0.0)) fail("frequency_hz must be positive");
    if (scene.track(scene.ego_id) == nullptr) fail("ego id " + std::to_string(scene.ego_id) + " not among tracks");
    for (const auto& p : scene.polylines) {
        if (p.points.size() < 2) fail("polyline " + std::to_string(p.id) + " has fewer than 2 points");
        for (std::size_t i = 0; i < p.points.size(); ++i) {
            if (!std::isfinite(p.points[i].x) || !std::isfinite(p.points[i].y)) fail("non-finite polyline point");
            if (i > 0 && p.points[i] == p.points[i - 1]) fail("polyline " + std::to_string(p.id) + " repeats a point");
        }
    }
    for (const auto& t : scene.tracks) {
        for (std::size_t i = 1; i < t.states.size(); ++i) {
            if (t.states[i].step <= t.states[i - 1].step) fail("track " + std::to_string(t.id) + " steps not increasing");
        }
    }
    std::size_t horizon = 0;
    for (const auto& f : scene.future_truth) {
        if (scene.track(f.track_id) == nullptr) fail("future for unknown track " + std::to_string(f.track_id));
        if (f.positions.size() != f.valid.size()) fail("future positions/valid length mismatch");
        if (horizon != 0 && f.positions.size() != horizon) fail("future horizons differ between tracks");
        horizon = f.positions.size();
    }
}

RoadScene to_ego_frame(const RoadScene& scene, std::int64_t agent_id)
{
    const AgentTrack* agent = scene.track(agent_id);
    if (agent == nullptr) throw std::invalid_argument("to_ego_frame: unknown agent id " + std::to_string(agent_id));
    const AgentState* current = agent->state_at(scene.prediction_start);
    if (current == nullptr || !current->valid) {
        throw std::invalid_argument("to_ego_frame: agent " + std::to_string(agent_id) + " has no valid state at step " +
                                    std::to_string(scene.prediction_start));
    }
    const Pose2 pose{current->position, current->heading};

    RoadScene out = scene;
    out.ego_id = agent_id;
    for (auto& poly : out.polylines) {
        for (auto& p : poly.points) p = to_frame(pose, p);
    }
    for (auto& track : out.tracks) {
        for (auto& s : track.states) {
            s.position = to_frame(pose, s.position);
            s.heading = wrap_angle(s.heading - pose.heading);
        }
    }
    for (auto& f : out.future_truth) {
        for (auto& p : f.positions) p = to_frame(pose, p);
    }
    // Compose with the frame the input was already in.
    const double c = std::cos(scene.frame.heading);
    const double s = std::sin(scene.frame.heading);
    out.frame.position = scene.frame.position + Vec2{c * pose.position.x - s * pose.position.y,
                                                     s * pose.position.x + c * pose.position.y};
    out.frame.heading = wrap_angle(scene.frame.heading + pose.heading);
    // The agent's own state is exactly at the origin, free of rounding.
    for (auto& track : out.tracks) {
        if (track.id != agent_id) continue;
        for (auto& st : track.states) {
            if (st.step == scene.prediction_start) {
                st.position = {0.0, 0.0};
                st.heading = 0.0;
            }
        }
    }
    return out;
}

LocalRoadGraph extract_local_graph(const RoadScene& scene)
{
    const AgentTrack* ego = scene.track(scene.ego_id);
    const AgentState* ego_now = ego ? ego->state_at(scene.prediction_start) : nullptr;
    if (ego_now == nullptr || !ego_now->valid || norm(ego_now->position) > kEgoOriginTolerance) {
        throw std::invalid_argument("extract_local_graph: scene '" + scene.id + "' is not in the ego frame");
    }

    LocalRoadGraph graph;
    graph.ego_pose = scene.frame;
    for (const auto& poly : scene.polylines) {
        LocalPolyline clipped{poly.id, poly.kind, {}};
        for (const auto& p : poly.points) {
            if (norm(p) <= kLaneRadius) clipped.points.push_back(p);
        }
        if (!clipped.points.empty()) graph.polylines.push_back(std::move(clipped));
    }
    if (scene.map_only) return graph;

    for (const auto& track : scene.tracks) {
        const AgentState* s = track.state_at(scene.prediction_start);
        const bool is_ego = track.id == scene.ego_id;
        if (s == nullptr || !s->valid) continue;
        if (!is_ego && norm(s->position) > kAgentRadius) continue;
        graph.agents.push_back({track.id, track.kind, s->position, s->heading, is_ego});
    }
    return graph;
}

}  // namespace redmotion
