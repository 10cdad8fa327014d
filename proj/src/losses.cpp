#include "redmotion/losses.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "redmotion/log.hpp"

namespace redmotion {

using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) { return ConstMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }
MutMap view(Tensor& t) { return MutMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }

void check_pair(const char* op, const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": view shapes differ, " + a.shape_string() + " vs " + b.shape_string());
    }
    if (a.rows < 2) throw std::invalid_argument(std::string(op) + ": batch size must be at least 2, got " + std::to_string(a.rows));
    if (a.cols == 0) throw std::invalid_argument(std::string(op) + ": empty embeddings");
}

struct Standardized {
    Tensor value;
    std::vector<double> sigma;
    std::vector<std::uint8_t> floored;
};

Standardized standardize_columns(const Tensor& x, const char* which)
{
    const std::size_t b = x.rows;
    Standardized s{Tensor(x.rows, x.cols), std::vector<double>(x.cols), std::vector<std::uint8_t>(x.cols, 0)};
    std::size_t floored = 0;
    for (std::size_t c = 0; c < x.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < b; ++r) mean += x(r, c);
        mean /= static_cast<double>(b);
        double var = 0.0;
        for (std::size_t r = 0; r < b; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
        double sigma = std::sqrt(var / static_cast<double>(b));
        if (sigma < kStdFloor) {
            sigma = kStdFloor;
            s.floored[c] = 1;
            ++floored;
        }
        s.sigma[c] = sigma;
        for (std::size_t r = 0; r < b; ++r) s.value(r, c) = (x(r, c) - mean) / sigma;
    }
    if (floored > 0) {
        warn(std::string("barlow_twins_loss: ") + std::to_string(floored) + " zero-variance column(s) in view " + which +
             ", standard deviation floored");
    }
    return s;
}

// Gradient of the column standardization, given the gradient w.r.t. its output.
// Floored columns are treated as constant.
void standardize_backward(const Standardized& s, const Tensor& g, Tensor& dx)
{
    const std::size_t b = g.rows;
    for (std::size_t c = 0; c < g.cols; ++c) {
        if (s.floored[c]) continue;
        double mean_g = 0.0;
        double mean_gx = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            mean_g += g(r, c);
            mean_gx += g(r, c) * s.value(r, c);
        }
        mean_g /= static_cast<double>(b);
        mean_gx /= static_cast<double>(b);
        for (std::size_t r = 0; r < b; ++r) dx(r, c) += (g(r, c) - mean_g - s.value(r, c) * mean_gx) / s.sigma[c];
    }
}

struct Normalized {
    Tensor value;
    std::vector<double> norms;
};

Normalized normalize_rows(const Tensor& x)
{
    Normalized n{Tensor(x.rows, x.cols), std::vector<double>(x.rows)};
    for (std::size_t r = 0; r < x.rows; ++r) {
        double sq = 0.0;
        for (double v : x.row_span(r)) sq += v * v;
        const double norm = std::max(std::sqrt(sq), kStdFloor);
        n.norms[r] = norm;
        for (std::size_t c = 0; c < x.cols; ++c) n.value(r, c) = x(r, c) / norm;
    }
    return n;
}

void normalize_backward(const Normalized& n, const Tensor& g, Tensor& dx)
{
    for (std::size_t r = 0; r < g.rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < g.cols; ++c) dot += g(r, c) * n.value(r, c);
        for (std::size_t c = 0; c < g.cols; ++c) dx(r, c) += (g(r, c) - n.value(r, c) * dot) / n.norms[r];
    }
}

double log_sum_exp(std::span<const double> values)
{
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : values) mx = std::max(mx, v);
    if (!std::isfinite(mx)) return mx;
    double total = 0.0;
    for (double v : values) total += std::exp(v - mx);
    return mx + std::log(total);
}

Tape& pair_tape(Var a, Var b, const char* op)
{
    if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
    return *a.tape;
}

void accumulate(Tape& t, Var v, const Tensor& g, double factor)
{
    if (!t.requires_grad(v)) return;
    Tensor& dst = t.grad_ref(v);
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += factor * g.data[i];
}

void check_truth(std::size_t steps, std::span<const Vec2> truth, std::span<const std::uint8_t> valid)
{
    if (truth.size() != steps || valid.size() != steps) {
        throw std::invalid_argument("nll_mixture_loss: expected " + std::to_string(steps) + " future steps, got truth " +
                                    std::to_string(truth.size()) + " / mask " + std::to_string(valid.size()));
    }
    if (std::none_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; })) {
        throw std::invalid_argument("nll_mixture_loss: no valid future step");
    }
}

}  // namespace

void LossConfig::validate() const
{
    if (!(bt_lambda > 0.0)) throw std::invalid_argument("loss config: bt_lambda must be positive");
    if (!(aux_beta >= 0.0)) throw std::invalid_argument("loss config: aux_beta must be nonnegative");
    if (!(nce_temperature > 0.0)) throw std::invalid_argument("loss config: nce_temperature must be positive");
}

Var barlow_twins_loss(Var za, Var zb, double lambda)
{
    Tape& tape = pair_tape(za, zb, "barlow_twins_loss");
    check_pair("barlow_twins_loss", za.value(), zb.value());
    const double batch = static_cast<double>(za.rows());
    const std::size_t p = za.cols();

    Standardized a = standardize_columns(za.value(), "A");
    Standardized b = standardize_columns(zb.value(), "B");
    Tensor c(p, p);
    view(c).noalias() = view(a.value).transpose() * view(b.value) / batch;

    double loss = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            const double v = c(i, j);
            loss += i == j ? (1.0 - v) * (1.0 - v) : lambda * v * v;
        }
    }
    const bool rg = tape.requires_grad(za) || tape.requires_grad(zb);
    return tape.record(Tensor(1, 1, {loss}), rg,
                       [za, zb, lambda, batch, a = std::move(a), b = std::move(b), c = std::move(c)](Tape& t, const Tensor& g) {
                           const std::size_t p = c.rows;
                           Tensor gc(p, p);
                           for (std::size_t i = 0; i < p; ++i) {
                               for (std::size_t j = 0; j < p; ++j) {
                                   gc(i, j) = g.data[0] * (i == j ? -2.0 * (1.0 - c(i, j)) : 2.0 * lambda * c(i, j));
                               }
                           }
                           if (t.requires_grad(za)) {
                               Tensor ga(a.value.rows, p);
                               view(ga).noalias() = view(b.value) * view(gc).transpose() / batch;
                               Tensor dx(a.value.rows, p);
                               standardize_backward(a, ga, dx);
                               accumulate(t, za, dx, 1.0);
                           }
                           if (t.requires_grad(zb)) {
                               Tensor gb(b.value.rows, p);
                               view(gb).noalias() = view(a.value) * view(gc) / batch;
                               Tensor dx(b.value.rows, p);
                               standardize_backward(b, gb, dx);
                               accumulate(t, zb, dx, 1.0);
                           }
                       });
}

double barlow_twins_loss(const Tensor& za, const Tensor& zb, double lambda)
{
    Tape tape;
    return barlow_twins_loss(tape.constant(za), tape.constant(zb), lambda).value().data[0];
}

Var info_nce_loss(Var za, Var zb, double temperature)
{
    Tape& tape = pair_tape(za, zb, "info_nce_loss");
    check_pair("info_nce_loss", za.value(), zb.value());
    if (!(temperature > 0.0)) throw std::invalid_argument("info_nce_loss: temperature must be positive");
    const std::size_t n = za.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    Normalized a = normalize_rows(za.value());
    Normalized b = normalize_rows(zb.value());
    Tensor s(n, n);
    view(s).noalias() = view(a.value) * view(b.value).transpose() / temperature;

    // Row-wise (a -> b) and column-wise (b -> a) softmax.
    Tensor p_row(n, n);
    Tensor p_col(n, n);
    double loss = 0.0;
    std::vector<double> line(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) line[j] = s(i, j);
        const double lse = log_sum_exp(line);
        loss += 0.5 * inv_n * (lse - s(i, i));
        for (std::size_t j = 0; j < n; ++j) p_row(i, j) = std::exp(s(i, j) - lse);
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) line[i] = s(i, j);
        const double lse = log_sum_exp(line);
        loss += 0.5 * inv_n * (lse - s(j, j));
        for (std::size_t i = 0; i < n; ++i) p_col(i, j) = std::exp(s(i, j) - lse);
    }

    const bool rg = tape.requires_grad(za) || tape.requires_grad(zb);
    return tape.record(Tensor(1, 1, {loss}), rg,
                       [za, zb, temperature, inv_n, a = std::move(a), b = std::move(b), p_row = std::move(p_row),
                        p_col = std::move(p_col)](Tape& t, const Tensor& g) {
                           const std::size_t n = p_row.rows;
                           Tensor gs(n, n);
                           for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t j = 0; j < n; ++j) {
                                   const double target = i == j ? 1.0 : 0.0;
                                   gs(i, j) = g.data[0] * 0.5 * inv_n * ((p_row(i, j) - target) + (p_col(i, j) - target)) / temperature;
                               }
                           }
                           if (t.requires_grad(za)) {
                               Tensor ga(n, a.value.cols);
                               view(ga).noalias() = view(gs) * view(b.value);
                               Tensor dx(n, a.value.cols);
                               normalize_backward(a, ga, dx);
                               accumulate(t, za, dx, 1.0);
                           }
                           if (t.requires_grad(zb)) {
                               Tensor gb(n, b.value.cols);
                               view(gb).noalias() = view(gs).transpose() * view(a.value);
                               Tensor dx(n, b.value.cols);
                               normalize_backward(b, gb, dx);
                               accumulate(t, zb, dx, 1.0);
                           }
                       });
}

double info_nce_loss(const Tensor& za, const Tensor& zb, double temperature)
{
    Tape tape;
    return info_nce_loss(tape.constant(za), tape.constant(zb), temperature).value().data[0];
}

Var nll_mixture_loss(Var proposals, Var logits, std::span<const Vec2> truth, std::span<const std::uint8_t> valid)
{
    Tape& tape = pair_tape(proposals, logits, "nll_mixture_loss");
    const Tensor& mu = proposals.value();
    const Tensor& z = logits.value();
    const std::size_t k = mu.rows;
    if (k == 0 || mu.cols % 2 != 0 || z.rows != 1 || z.cols != k) {
        throw std::invalid_argument("nll_mixture_loss: proposals " + mu.shape_string() + " and logits " + z.shape_string() +
                                    " do not describe a mixture");
    }
    const std::size_t steps = mu.cols / 2;
    check_truth(steps, truth, valid);

    const double z_lse = log_sum_exp(z.data);
    std::vector<double> conf(k);
    std::vector<double> score(k);
    for (std::size_t m = 0; m < k; ++m) {
        conf[m] = std::exp(z.data[m] - z_lse);
        double sq = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            if (!valid[t]) continue;
            const double dx = mu(m, 2 * t) - truth[t].x;
            const double dy = mu(m, 2 * t + 1) - truth[t].y;
            sq += dx * dx + dy * dy;
        }
        score[m] = (z.data[m] - z_lse) - 0.5 * sq;
    }
    const double s_lse = log_sum_exp(score);
    std::vector<double> weight(k);
    for (std::size_t m = 0; m < k; ++m) weight[m] = std::exp(score[m] - s_lse);

    std::vector<Vec2> truth_copy(truth.begin(), truth.end());
    std::vector<std::uint8_t> valid_copy(valid.begin(), valid.end());
    const bool rg = tape.requires_grad(proposals) || tape.requires_grad(logits);
    return tape.record(Tensor(1, 1, {-s_lse}), rg,
                       [proposals, logits, conf = std::move(conf), weight = std::move(weight), truth = std::move(truth_copy),
                        valid = std::move(valid_copy)](Tape& t, const Tensor& g) {
                           const double go = g.data[0];
                           if (t.requires_grad(logits)) {
                               Tensor& dz = t.grad_ref(logits);
                               for (std::size_t m = 0; m < conf.size(); ++m) dz.data[m] += go * (conf[m] - weight[m]);
                           }
                           if (t.requires_grad(proposals)) {
                               const Tensor& mu = t.value(proposals);
                               Tensor& dmu = t.grad_ref(proposals);
                               for (std::size_t m = 0; m < mu.rows; ++m) {
                                   for (std::size_t s = 0; s < truth.size(); ++s) {
                                       if (!valid[s]) continue;
                                       dmu(m, 2 * s) += go * weight[m] * (mu(m, 2 * s) - truth[s].x);
                                       dmu(m, 2 * s + 1) += go * weight[m] * (mu(m, 2 * s + 1) - truth[s].y);
                                   }
                               }
                           }
                       });
}

double nll_mixture_loss(const MotionPrediction& prediction, std::span<const Vec2> truth, std::span<const std::uint8_t> valid)
{
    check_truth(prediction.steps, truth, valid);
    std::vector<double> score(prediction.modes());
    for (std::size_t m = 0; m < prediction.modes(); ++m) {
        double sq = 0.0;
        for (std::size_t t = 0; t < prediction.steps; ++t) {
            if (!valid[t]) continue;
            const Vec2 d = prediction.at(m, t) - truth[t];
            sq += d.x * d.x + d.y * d.y;
        }
        score[m] = std::log(prediction.confidences[m]) - 0.5 * sq;
    }
    return -log_sum_exp(score);
}

}  // namespace redmotion
