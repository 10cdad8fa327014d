#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "redmotion/losses.hpp"
#include "redmotion/model_config.hpp"
#include "redmotion/training.hpp"

namespace redmotion {

enum class RunMode { pretrain_rbt, pretrain_simclr, pretrain_tmcl, pretrain_mcl_tmcl, finetune, joint_rbt_aux, eval };
enum class ModelKind { redmotion, motion_vit, dual_motion_vit };

std::string to_string(RunMode mode);
std::string to_string(ModelKind kind);
RunMode parse_run_mode(const std::string& text);
ModelKind parse_model_kind(const std::string& text);
bool is_pretrain(RunMode mode);

struct RunConfig {
    RunMode mode = RunMode::finetune;
    ModelKind model = ModelKind::redmotion;
    std::filesystem::path train_data;
    std::filesystem::path holdout_data;
    std::filesystem::path out_dir = "run";
    std::filesystem::path init_checkpoint;
    std::filesystem::path baseline_report;
    double fds = 1.0;                 // labeled fraction of the training scenes
    std::size_t batch_size = 32;
    std::size_t steps = 1000;
    double lr_init = 1e-4;
    double lr_final = 1e-6;
    AdamWConfig optimizer;
    std::uint64_t seed = 0;
    LossConfig loss;
    ModelConfig model_config;
    std::size_t validate_every = 50;
    std::size_t validation_scenes = 200;
    bool strip_agents = false;        // derive map-only scenes for map pre-training
    std::size_t threads = 0;          // 0 = hardware concurrency
    std::size_t prefetch = 2;         // batches prepared ahead of the optimizer
    std::vector<std::size_t> horizons{30, 50};

    void validate() const;
};

// Every RunConfig field is addressable by one key.
std::vector<std::string> run_config_keys();
void apply_run_option(RunConfig& config, const std::string& key, const std::string& value);
// key = value lines, '#' comments.
void apply_run_config_file(RunConfig& config, const std::filesystem::path& path);
std::string describe(const RunConfig& config);

// Digest binding checkpoints to (model kind, model config).
std::string model_digest(ModelKind kind, const ModelConfig& config);

}  // namespace redmotion
