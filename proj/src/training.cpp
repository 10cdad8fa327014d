#include "redmotion/training.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

namespace redmotion {

double cosine_lr(std::size_t step, std::size_t total, double lr_init, double lr_final)
{
    if (step > total) {
        throw std::invalid_argument("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]");
    }
    if (step == 0) return lr_init;
    if (step == total) return lr_final;
    const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
    return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(phase));
}

AdamW::AdamW(const nn::ParameterStore& store, AdamWConfig config) : config_(config)
{
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& v = store.value(nn::ParamId{i});
        m_.emplace_back(v.rows, v.cols);
        v_.emplace_back(v.rows, v.cols);
    }
}

void AdamW::step(nn::ParameterStore& store, std::span<const nn::Tensor> grads, double lr)
{
    if (grads.size() != store.size() || m_.size() != store.size()) {
        throw std::invalid_argument("AdamW: gradient count does not match the parameter store");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        nn::Tensor& p = store.value(nn::ParamId{i});
        nn::Tensor& m = m_[i];
        nn::Tensor& v = v_[i];
        const nn::Tensor& g = grads[i];
        // Parameters outside the computation are left untouched.
        if (g.empty()) continue;
        if (!g.same_shape(p)) throw std::invalid_argument("AdamW: gradient shape mismatch for " + store.name(nn::ParamId{i}));
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g.data[k];
            m.data[k] = config_.beta1 * m.data[k] + (1.0 - config_.beta1) * gk;
            v.data[k] = config_.beta2 * v.data[k] + (1.0 - config_.beta2) * gk * gk;
            const double update = (m.data[k] / c1) / (std::sqrt(v.data[k] / c2) + config_.eps);
            p.data[k] -= lr * (update + config_.weight_decay * p.data[k]);
        }
    }
}

std::size_t resolve_threads(std::size_t requested)
{
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min(resolve_threads(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const auto run = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace redmotion
