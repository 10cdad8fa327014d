#include "redmotion/data/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace redmotion::data {

using nlohmann::json;

namespace {

struct FieldError {
    std::string field;
    std::string message;
};

const json& require(const json& obj, const std::string& key, const std::string& path)
{
    if (!obj.is_object()) throw FieldError{path, "expected an object"};
    auto it = obj.find(key);
    if (it == obj.end()) throw FieldError{path.empty() ? key : path + "." + key, "missing field"};
    return *it;
}

double as_number(const json& v, const std::string& path)
{
    if (!v.is_number()) throw FieldError{path, "expected a number"};
    return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& path)
{
    if (!v.is_number_integer()) throw FieldError{path, "expected an integer"};
    return v.get<std::int64_t>();
}

Vec2 as_point(const json& v, const std::string& path)
{
    if (!v.is_array() || v.size() != 2) throw FieldError{path, "expected [x, y]"};
    return {as_number(v[0], path + "[0]"), as_number(v[1], path + "[1]")};
}

json point_json(Vec2 p) { return json::array({p.x, p.y}); }

}  // namespace

ScenarioFormatError::ScenarioFormatError(std::size_t line, std::string field, const std::string& what)
    : std::runtime_error("scenario record at line " + std::to_string(line) + ", field '" + field + "': " + what),
      line_(line),
      field_(std::move(field))
{
}

std::string encode_scene(const RoadScene& scene)
{
    json j;
    j["version"] = kScenarioVersion;
    j["id"] = scene.id;
    j["frequency_hz"] = scene.frequency_hz;
    j["prediction_start"] = scene.prediction_start;
    j["ego_id"] = scene.ego_id;
    if (scene.map_only) j["map_only"] = true;
    if (scene.frame != Pose2{}) {
        j["frame"] = {{"x", scene.frame.position.x}, {"y", scene.frame.position.y}, {"heading", scene.frame.heading}};
    }
    json polylines = json::array();
    for (const auto& p : scene.polylines) {
        json points = json::array();
        for (const auto& pt : p.points) points.push_back(point_json(pt));
        polylines.push_back({{"id", p.id}, {"kind", std::string(to_string(p.kind))}, {"points", std::move(points)}});
    }
    j["polylines"] = std::move(polylines);
    json tracks = json::array();
    for (const auto& t : scene.tracks) {
        json states = json::array();
        for (const auto& s : t.states) {
            states.push_back({{"step", s.step}, {"x", s.position.x}, {"y", s.position.y}, {"heading", s.heading}, {"valid", s.valid}});
        }
        tracks.push_back({{"id", t.id}, {"kind", std::string(to_string(t.kind))}, {"states", std::move(states)}});
    }
    j["tracks"] = std::move(tracks);
    if (!scene.future_truth.empty()) {
        json futures = json::array();
        for (const auto& f : scene.future_truth) {
            json positions = json::array();
            for (const auto& pt : f.positions) positions.push_back(point_json(pt));
            json valid = json::array();
            for (auto v : f.valid) valid.push_back(v != 0);
            futures.push_back({{"track_id", f.track_id}, {"positions", std::move(positions)}, {"valid", std::move(valid)}});
        }
        j["future_truth"] = std::move(futures);
    }
    return j.dump();
}

RoadScene decode_scene(const std::string& line, std::size_t line_number)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ScenarioFormatError(line_number, "<record>", std::string("malformed JSON: ") + e.what());
    }
    try {
        const json& version = require(j, "version", "");
        if (!version.is_string() || version.get<std::string>() != kScenarioVersion) {
            throw FieldError{"version", "unsupported version " + version.dump() + ", expected \"" + kScenarioVersion + "\""};
        }
        RoadScene scene;
        const json& id = require(j, "id", "");
        if (!id.is_string()) throw FieldError{"id", "expected a string"};
        scene.id = id.get<std::string>();
        scene.frequency_hz = as_number(require(j, "frequency_hz", ""), "frequency_hz");
        scene.prediction_start = as_integer(require(j, "prediction_start", ""), "prediction_start");
        scene.ego_id = as_integer(require(j, "ego_id", ""), "ego_id");
        if (auto it = j.find("map_only"); it != j.end()) {
            if (!it->is_boolean()) throw FieldError{"map_only", "expected a boolean"};
            scene.map_only = it->get<bool>();
        }
        if (auto it = j.find("frame"); it != j.end()) {
            scene.frame.position.x = as_number(require(*it, "x", "frame"), "frame.x");
            scene.frame.position.y = as_number(require(*it, "y", "frame"), "frame.y");
            scene.frame.heading = as_number(require(*it, "heading", "frame"), "frame.heading");
        }

        const json& polylines = require(j, "polylines", "");
        if (!polylines.is_array()) throw FieldError{"polylines", "expected an array"};
        for (std::size_t i = 0; i < polylines.size(); ++i) {
            const std::string path = "polylines[" + std::to_string(i) + "]";
            const json& p = polylines[i];
            MapPolyline poly;
            poly.id = as_integer(require(p, "id", path), path + ".id");
            const json& kind = require(p, "kind", path);
            try {
                poly.kind = parse_polyline_kind(kind.is_string() ? kind.get<std::string>() : kind.dump());
            } catch (const std::invalid_argument& e) {
                throw FieldError{path + ".kind", e.what()};
            }
            const json& points = require(p, "points", path);
            if (!points.is_array()) throw FieldError{path + ".points", "expected an array"};
            for (std::size_t k = 0; k < points.size(); ++k) {
                poly.points.push_back(as_point(points[k], path + ".points[" + std::to_string(k) + "]"));
            }
            scene.polylines.push_back(std::move(poly));
        }

        const json& tracks = require(j, "tracks", "");
        if (!tracks.is_array()) throw FieldError{"tracks", "expected an array"};
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            const std::string path = "tracks[" + std::to_string(i) + "]";
            const json& t = tracks[i];
            AgentTrack track;
            track.id = as_integer(require(t, "id", path), path + ".id");
            const json& kind = require(t, "kind", path);
            try {
                track.kind = parse_agent_kind(kind.is_string() ? kind.get<std::string>() : kind.dump());
            } catch (const std::invalid_argument& e) {
                throw FieldError{path + ".kind", e.what()};
            }
            const json& states = require(t, "states", path);
            if (!states.is_array()) throw FieldError{path + ".states", "expected an array"};
            for (std::size_t k = 0; k < states.size(); ++k) {
                const std::string sp = path + ".states[" + std::to_string(k) + "]";
                AgentState s;
                s.step = as_integer(require(states[k], "step", sp), sp + ".step");
                s.position.x = as_number(require(states[k], "x", sp), sp + ".x");
                s.position.y = as_number(require(states[k], "y", sp), sp + ".y");
                s.heading = as_number(require(states[k], "heading", sp), sp + ".heading");
                const json& valid = require(states[k], "valid", sp);
                if (!valid.is_boolean()) throw FieldError{sp + ".valid", "expected a boolean"};
                s.valid = valid.get<bool>();
                track.states.push_back(s);
            }
            scene.tracks.push_back(std::move(track));
        }

        if (auto it = j.find("future_truth"); it != j.end()) {
            if (!it->is_array()) throw FieldError{"future_truth", "expected an array"};
            for (std::size_t i = 0; i < it->size(); ++i) {
                const std::string path = "future_truth[" + std::to_string(i) + "]";
                const json& f = (*it)[i];
                FutureTrack future;
                future.track_id = as_integer(require(f, "track_id", path), path + ".track_id");
                const json& positions = require(f, "positions", path);
                const json& valid = require(f, "valid", path);
                if (!positions.is_array() || !valid.is_array() || positions.size() != valid.size()) {
                    throw FieldError{path, "positions and valid must be arrays of equal length"};
                }
                for (std::size_t k = 0; k < positions.size(); ++k) {
                    future.positions.push_back(as_point(positions[k], path + ".positions[" + std::to_string(k) + "]"));
                    if (!valid[k].is_boolean()) throw FieldError{path + ".valid[" + std::to_string(k) + "]", "expected a boolean"};
                    future.valid.push_back(valid[k].get<bool>() ? 1 : 0);
                }
                scene.future_truth.push_back(std::move(future));
            }
        }
        validate(scene);
        return scene;
    } catch (const FieldError& e) {
        throw ScenarioFormatError(line_number, e.field, e.message);
    } catch (const std::invalid_argument& e) {
        throw ScenarioFormatError(line_number, "<scene>", e.what());
    }
}

void save_scenarios(std::span<const RoadScene> scenes, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open scenario file '" + path.string() + "' for writing");
    for (const auto& scene : scenes) out << encode_scene(scene) << '\n';
    if (!out) throw std::runtime_error("write failed for scenario file '" + path.string() + "'");
}

std::vector<RoadScene> load_scenarios(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file '" + path.string() + "'");
    std::vector<RoadScene> scenes;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        scenes.push_back(decode_scene(line, line_number));
    }
    return scenes;
}

SplitIndices split_indices(std::size_t count, const DatasetSplitConfig& config)
{
    if (!(config.fraction > 0.0 && config.fraction <= 1.0)) {
        throw std::invalid_argument("split: fraction must lie in (0, 1], got " + std::to_string(config.fraction));
    }
    if (count == 0) throw std::invalid_argument("split: empty dataset");
    const auto take = static_cast<std::size_t>(std::llround(config.fraction * static_cast<double>(count)));

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.seed);
    // Partial Fisher-Yates: the first `take` slots form the sample.
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, count - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    out.holdout.assign(order.begin() + static_cast<std::ptrdiff_t>(take), order.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.holdout.begin(), out.holdout.end());
    return out;
}

std::pair<std::vector<RoadScene>, std::vector<RoadScene>> split_dataset(std::span<const RoadScene> scenes,
                                                                        const DatasetSplitConfig& config)
{
    const SplitIndices idx = split_indices(scenes.size(), config);
    std::pair<std::vector<RoadScene>, std::vector<RoadScene>> out;
    for (auto i : idx.train) out.first.push_back(scenes[i]);
    for (auto i : idx.holdout) out.second.push_back(scenes[i]);
    return out;
}

RoadScene strip_agents(const RoadScene& scene)
{
    RoadScene out;
    out.id = scene.id;
    out.frequency_hz = scene.frequency_hz;
    out.prediction_start = scene.prediction_start;
    out.ego_id = scene.ego_id;
    out.polylines = scene.polylines;
    out.frame = scene.frame;
    out.map_only = true;
    AgentTrack anchor{scene.ego_id, AgentKind::vehicle, {}};
    for (std::int64_t step = 0; step <= scene.prediction_start; ++step) anchor.states.push_back({step, {0.0, 0.0}, 0.0, true});
    out.tracks.push_back(std::move(anchor));
    return out;
}

}  // namespace redmotion::data
