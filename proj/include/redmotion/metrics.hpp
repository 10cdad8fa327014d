#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "redmotion/prediction.hpp"
#include "redmotion/scene.hpp"

namespace redmotion {

// Horizons in steps at 10 Hz.
inline constexpr std::size_t kHorizon3s = 30;
inline constexpr std::size_t kHorizon5s = 50;
inline constexpr std::size_t kHorizon8s = 80;

/// Oracle ADE over the first `horizon` steps: per proposal, the mean distance
/// over valid steps; the minimum over proposals. nullopt when no step in the
/// horizon is valid. Throws if the horizon exceeds the prediction length.
std::optional<double> min_ade(const MotionPrediction& pred, const FutureTruth& truth, std::size_t horizon);
/// Oracle distance at step `horizon` (1-based). nullopt when that step is invalid.
std::optional<double> min_fde(const MotionPrediction& pred, const FutureTruth& truth, std::size_t horizon);

struct AveragedMetrics {
    std::optional<double> min_ade;
    std::optional<double> min_fde;
    std::size_t skipped = 0;  // horizons without a value for either metric
};

// Mean over horizons of the per-horizon oracle values; horizons without a
// value are skipped and counted.
AveragedMetrics averaged_metrics(const MotionPrediction& pred, const FutureTruth& truth, std::span<const std::size_t> horizons);

// (pre - base) / base * 100; base must be positive.
double delta_rel(double value_pre, double value_base);

struct AgentMetrics {
    std::string scene_id;
    std::int64_t agent_id = 0;
    AgentKind kind = AgentKind::vehicle;
    std::vector<std::optional<double>> min_ade;  // one per horizon
    std::vector<std::optional<double>> min_fde;
};

AgentMetrics evaluate_agent(const std::string& scene_id, std::int64_t agent_id, AgentKind kind, const MotionPrediction& pred,
                            const FutureTruth& truth, std::span<const std::size_t> horizons);

struct ClassSummary {
    std::size_t count = 0;
    std::vector<std::optional<double>> min_ade;  // per horizon
    std::vector<std::optional<double>> min_fde;
    std::optional<double> avg_min_ade;  // mean over horizons
    std::optional<double> avg_min_fde;
};

struct MetricReport {
    std::vector<std::size_t> horizons;
    ClassSummary overall;
    std::map<AgentKind, ClassSummary> classes;  // only classes with agents
    std::optional<std::string> baseline_name;
    std::optional<double> delta_min_ade_rel;
    std::optional<double> delta_min_fde_rel;
    std::optional<double> t_rel;
};

/// Unweighted means within each requested class and over all agents.
MetricReport aggregate_by_class(std::span<const AgentMetrics> agents, std::span<const AgentKind> classes,
                                std::span<const std::size_t> horizons);

// Fills the delta fields from the overall averages of a baseline report.
void compare_to_baseline(MetricReport& report, const MetricReport& baseline, const std::string& baseline_name);

void write_agent_csv(std::span<const AgentMetrics> agents, std::span<const std::size_t> horizons,
                     const std::filesystem::path& path);
std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);
void write_report(const MetricReport& report, const std::filesystem::path& path);
MetricReport read_report(const std::filesystem::path& path);

}  // namespace redmotion
