#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "redmotion/scene.hpp"

namespace redmotion::data {

inline constexpr const char* kScenarioVersion = "v1";

// Thrown for unreadable scenario records; carries the 1-based line and the
// offending field path.
class ScenarioFormatError : public std::runtime_error {
public:
    ScenarioFormatError(std::size_t line, std::string field, const std::string& what);
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

// Newline-delimited JSON, one scene per line, each with "version": "v1".
void save_scenarios(std::span<const RoadScene> scenes, const std::filesystem::path& path);
std::vector<RoadScene> load_scenarios(const std::filesystem::path& path);

std::string encode_scene(const RoadScene& scene);
RoadScene decode_scene(const std::string& line, std::size_t line_number = 1);

struct DatasetSplitConfig {
    double fraction = 1.0;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;    // ascending
    std::vector<std::size_t> holdout;  // ascending
};

// Seeded uniform subsample of round(fraction * count) indices.
SplitIndices split_indices(std::size_t count, const DatasetSplitConfig& config);
std::pair<std::vector<RoadScene>, std::vector<RoadScene>> split_dataset(std::span<const RoadScene> scenes,
                                                                        const DatasetSplitConfig& config);

/// Drops every agent track and all labels. A stationary anchor with the ego id
/// stays at the origin to define the frame, and the scene is flagged map-only.
RoadScene strip_agents(const RoadScene& scene);

}  // namespace redmotion::data
