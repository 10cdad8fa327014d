#pragma once

#include <cstdint>
#include <span>

#include "redmotion/nn/autograd.hpp"
#include "redmotion/nn/tensor.hpp"
#include "redmotion/prediction.hpp"

namespace redmotion {

struct LossConfig {
    double bt_lambda = 5e-3;        // off-diagonal weight of the redundancy term
    double aux_beta = 1e-2;         // weight of the twin loss in joint training
    double nce_temperature = 0.1;

    void validate() const;
};

inline constexpr double kStdFloor = 1e-12;

/// Redundancy-reduction loss on two [B, p] embedding batches. Columns are
/// standardized with the population standard deviation (floored at kStdFloor,
/// with a warning); C = A^T B / B and the loss is
/// sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2. Requires B >= 2.
nn::Var barlow_twins_loss(nn::Var za, nn::Var zb, double lambda);
double barlow_twins_loss(const nn::Tensor& za, const nn::Tensor& zb, double lambda);

/// Symmetric InfoNCE over L2-normalized rows with diagonal positives,
/// averaged over both directions. Requires B >= 2.
nn::Var info_nce_loss(nn::Var za, nn::Var zb, double temperature);
double info_nce_loss(const nn::Tensor& za, const nn::Tensor& zb, double temperature);

/// Mixture NLL with unit-covariance Gaussian steps, constants dropped:
/// -logsumexp_k [log c_k - 1/2 sum_{t valid} |truth_t - mu_t^k|^2].
/// `proposals` is [K, 2T] (x0, y0, x1, y1, ...), `logits` is [1, K] and the
/// confidences are softmax(logits).
nn::Var nll_mixture_loss(nn::Var proposals, nn::Var logits, std::span<const Vec2> truth,
                         std::span<const std::uint8_t> valid);
// Same loss evaluated on an emitted prediction (confidences already normalized).
double nll_mixture_loss(const MotionPrediction& prediction, std::span<const Vec2> truth,
                        std::span<const std::uint8_t> valid);

}  // namespace redmotion
