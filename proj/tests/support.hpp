#pragma once

// Shared helpers for the unit and acceptance suites: random tensors, a
// central-difference gradient checker and direct-formula reference versions
// of the losses and metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "redmotion/nn/autograd.hpp"
#include "redmotion/nn/ops.hpp"
#include "redmotion/prediction.hpp"

namespace rmtest {

using redmotion::nn::Tape;
using redmotion::nn::Tensor;
using redmotion::nn::Var;

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(rows, cols);
    for (double& v : t.data) v = u(rng);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// Builds a scalar from input leaves on a fresh tape.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheck {
    double rel_error = 0.0;  // worst over inputs of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    double value = 0.0;
};

// Non-scalar outputs are reduced with fixed random weights so every output
// entry contributes to the checked gradient.
inline Var weighted_sum(Tape& tape, Var out, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Tensor w = random_tensor(rng, out.rows(), out.cols(), 0.5, 1.5);
    return redmotion::nn::sum(redmotion::nn::mul(out, tape.constant(std::move(w))));
}

/// Central differences with step h on every entry of every input. The error
/// is measured per input tensor as the L2 norm of the difference relative to
/// the larger of the two gradient norms.
inline GradCheck check_gradients(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h = 1e-5)
{
    GradCheck result;
    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> leaves;
        for (const auto& t : inputs) leaves.push_back(tape.input(t));
        Var out = fn(tape, leaves);
        result.value = out.value().data[0];
        tape.backward(out);
        for (Var v : leaves) analytic.push_back(tape.grad(v));
    }
    const auto eval = [&](const std::vector<Tensor>& xs) {
        Tape tape;
        std::vector<Var> leaves;
        for (const auto& t : xs) leaves.push_back(tape.constant(t));
        return fn(tape, leaves).value().data[0];
    };
    std::vector<Tensor> probe = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double x0 = inputs[k].data[i];
            probe[k].data[i] = x0 + h;
            const double fp = eval(probe);
            probe[k].data[i] = x0 - h;
            const double fm = eval(probe);
            probe[k].data[i] = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[k].data[i];
            diff_sq += (a - numeric) * (a - numeric);
            a_sq += a * a;
            n_sq += numeric * numeric;
        }
        const double denom = std::max({std::sqrt(a_sq), std::sqrt(n_sq), 1e-8});
        result.rel_error = std::max(result.rel_error, std::sqrt(diff_sq) / denom);
    }
    return result;
}

// ---- reference losses ------------------------------------------------------

inline double ref_barlow_twins(const Tensor& za, const Tensor& zb, double lambda)
{
    const std::size_t n = za.rows, p = za.cols;
    auto standardize = [&](const Tensor& z) {
        std::vector<std::vector<double>> cols(p, std::vector<double>(n));
        for (std::size_t c = 0; c < p; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += z(r, c);
            mean /= double(n);
            double var = 0.0;
            for (std::size_t r = 0; r < n; ++r) var += std::pow(z(r, c) - mean, 2);
            const double sd = std::max(std::sqrt(var / double(n)), 1e-12);
            for (std::size_t r = 0; r < n; ++r) cols[c][r] = (z(r, c) - mean) / sd;
        }
        return cols;
    };
    const auto a = standardize(za);
    const auto b = standardize(zb);
    double loss = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double cij = 0.0;
            for (std::size_t r = 0; r < n; ++r) cij += a[i][r] * b[j][r];
            cij /= double(n);
            loss += i == j ? std::pow(1.0 - cij, 2) : lambda * cij * cij;
        }
    }
    return loss;
}

inline double ref_info_nce(const Tensor& za, const Tensor& zb, double tau)
{
    const std::size_t n = za.rows, p = za.cols;
    auto unit = [&](const Tensor& z, std::size_t r) {
        double s = 0.0;
        for (std::size_t c = 0; c < p; ++c) s += z(r, c) * z(r, c);
        std::vector<double> u(p);
        for (std::size_t c = 0; c < p; ++c) u[c] = z(r, c) / std::sqrt(s);
        return u;
    };
    std::vector<std::vector<double>> sim(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ui = unit(za, i);
        for (std::size_t j = 0; j < n; ++j) {
            const auto vj = unit(zb, j);
            double d = 0.0;
            for (std::size_t c = 0; c < p; ++c) d += ui[c] * vj[c];
            sim[i][j] = d / tau;
        }
    }
    double a_to_b = 0.0, b_to_a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += std::exp(sim[i][j]);
            col += std::exp(sim[j][i]);
        }
        a_to_b += -std::log(std::exp(sim[i][i]) / row);
        b_to_a += -std::log(std::exp(sim[i][i]) / col);
    }
    return 0.5 * (a_to_b + b_to_a) / double(n);
}

// -log sum_k c_k exp(-1/2 sum_t |truth_t - mu_t^k|^2), c = softmax(logits).
inline double ref_nll(const Tensor& proposals, const Tensor& logits, std::span<const redmotion::Vec2> truth,
                      std::span<const std::uint8_t> valid)
{
    const std::size_t k = proposals.rows;
    double zsum = 0.0;
    for (double z : logits.data) zsum += std::exp(z);
    double mix = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
        double sq = 0.0;
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (!valid[t]) continue;
            sq += std::pow(proposals(m, 2 * t) - truth[t].x, 2) + std::pow(proposals(m, 2 * t + 1) - truth[t].y, 2);
        }
        mix += std::exp(logits.data[m]) / zsum * std::exp(-0.5 * sq);
    }
    return -std::log(mix);
}

// ---- reference metrics -----------------------------------------------------

inline std::optional<double> ref_min_ade(const redmotion::MotionPrediction& pred, const redmotion::FutureTruth& truth,
                                         std::size_t horizon)
{
    std::optional<double> best;
    for (std::size_t m = 0; m < pred.modes(); ++m) {
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < horizon; ++t) {
            if (!truth.valid[t]) continue;
            total += std::hypot(pred.at(m, t).x - truth.positions[t].x, pred.at(m, t).y - truth.positions[t].y);
            ++count;
        }
        if (count == 0) return std::nullopt;
        const double ade = total / double(count);
        if (!best || ade < *best) best = ade;
    }
    return best;
}

inline std::optional<double> ref_min_fde(const redmotion::MotionPrediction& pred, const redmotion::FutureTruth& truth,
                                         std::size_t horizon)
{
    const std::size_t t = horizon - 1;
    if (!truth.valid[t]) return std::nullopt;
    std::optional<double> best;
    for (std::size_t m = 0; m < pred.modes(); ++m) {
        const double d = std::hypot(pred.at(m, t).x - truth.positions[t].x, pred.at(m, t).y - truth.positions[t].y);
        if (!best || d < *best) best = d;
    }
    return best;
}

inline redmotion::MotionPrediction random_prediction(std::mt19937_64& rng, std::size_t steps)
{
    std::uniform_real_distribution<double> pos(-20.0, 20.0);
    std::uniform_real_distribution<double> w(0.01, 1.0);
    redmotion::MotionPrediction pred(steps);
    for (auto& p : pred.proposals) p = {pos(rng), pos(rng)};
    double total = 0.0;
    for (auto& c : pred.confidences) total += (c = w(rng));
    for (auto& c : pred.confidences) c /= total;
    return pred;
}

inline redmotion::FutureTruth random_truth(std::mt19937_64& rng, std::size_t steps, double invalid_probability)
{
    std::uniform_real_distribution<double> pos(-20.0, 20.0);
    std::bernoulli_distribution invalid(invalid_probability);
    redmotion::FutureTruth truth;
    for (std::size_t t = 0; t < steps; ++t) {
        truth.positions.push_back({pos(rng), pos(rng)});
        truth.valid.push_back(invalid(rng) ? 0 : 1);
    }
    return truth;
}

}  // namespace rmtest
