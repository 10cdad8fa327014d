#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "redmotion/metrics.hpp"
#include "redmotion/motion_model.hpp"
#include "redmotion/nn/parameters.hpp"
#include "redmotion/run_config.hpp"

namespace redmotion {

struct TrainingRecord {
    std::size_t step = 0;
    double loss = 0.0;
    std::optional<double> nll;
    std::optional<double> bt;
    std::optional<double> nce;
    double lr = 0.0;
    double time_ms = 0.0;
    std::optional<double> val_loss;
};

// Append-only JSONL log, one record per optimizer step.
class TrainingLog {
public:
    void append(const TrainingRecord& record);
    [[nodiscard]] const std::vector<TrainingRecord>& records() const noexcept { return records_; }
    // Timestamps are omitted when `with_time` is false, giving a stable text for comparisons.
    [[nodiscard]] std::string to_jsonl(bool with_time = true) const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<TrainingRecord> records_;
};

struct Datasets {
    std::vector<RoadScene> train;
    std::vector<RoadScene> holdout;
};

struct RunResult {
    nn::Checkpoint checkpoint;
    std::string parameter_digest;
    TrainingLog log;
    std::size_t train_samples = 0;
    std::size_t validation_samples = 0;
    // Motion modes: NLL over the training and validation samples after the last step.
    std::optional<double> final_train_nll;
    std::optional<double> final_val_nll;
    double seconds = 0.0;
    std::vector<std::string> init_loaded;  // names copied from an init checkpoint
};

// Labeled (scene, agent) pairs: every agent with a valid current state and at
// least one valid future step inside the model horizon.
std::vector<PreparedSample> labeled_samples(std::span<const RoadScene> scenes, std::size_t future_steps);
// One sample per scene, centered on the scene's ego agent.
std::vector<PreparedSample> ego_samples(std::span<const RoadScene> scenes, std::size_t future_steps);
// Scenes kept by the f_ds subsample.
std::vector<RoadScene> labeled_subset(std::span<const RoadScene> scenes, double fds, std::uint64_t seed);

RunResult run_pretrain(const RunConfig& config, const Datasets& data);
RunResult run_finetune(const RunConfig& config, const Datasets& data, const nn::Checkpoint* init = nullptr);
RunResult run_joint_aux(const RunConfig& config, const Datasets& data, const nn::Checkpoint* init = nullptr);

struct PredictionRecord {
    std::string scene_id;
    std::int64_t agent_id = 0;
    AgentKind kind = AgentKind::vehicle;
    MotionPrediction prediction;
};

struct EvalOutput {
    MetricReport report;
    std::vector<AgentMetrics> agents;
    std::vector<PredictionRecord> predictions;
};

// Throws when the checkpoint's config digest does not match the configured model.
EvalOutput run_eval(const RunConfig& config, const nn::Checkpoint& checkpoint, std::span<const RoadScene> scenes);
EvalOutput evaluate_predictions(std::span<const PredictionRecord> predictions, std::span<const PreparedSample> samples,
                                std::span<const std::size_t> horizons);

void write_predictions(std::span<const PredictionRecord> predictions, const std::filesystem::path& path);

// File-level entry points used by the CLI. They read the configured data
// paths and write checkpoint.rmck, training_log.jsonl, run_config.txt and
// summary.json (or the metric files for eval) into out_dir.
RunResult run_mode_from_files(const RunConfig& config);
EvalOutput run_eval_from_files(const RunConfig& config);

}  // namespace redmotion
