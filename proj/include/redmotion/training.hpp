#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "redmotion/nn/parameters.hpp"

namespace redmotion {

/// lr_final + (lr_init - lr_final) * (1 + cos(pi * step / total)) / 2, with the
/// endpoints returned exactly. total = 0 is only valid at step 0.
double cosine_lr(std::size_t step, std::size_t total, double lr_init, double lr_final);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

/// Decoupled weight decay Adam over every tensor of a ParameterStore.
class AdamW {
public:
    AdamW(const nn::ParameterStore& store, AdamWConfig config);

    // grads[i] pairs with store parameter i; an empty tensor skips that parameter.
    void step(nn::ParameterStore& store, std::span<const nn::Tensor> grads, double lr);
    [[nodiscard]] std::size_t steps_taken() const noexcept { return t_; }

private:
    AdamWConfig config_;
    std::vector<nn::Tensor> m_;
    std::vector<nn::Tensor> v_;
    std::size_t t_ = 0;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
// Each index is processed exactly once; exceptions are rethrown in index order.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

std::size_t resolve_threads(std::size_t requested);

/// Bounded multi-producer/consumer queue; close() wakes all waiters.
template <class T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    bool push(T value)
    {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(value));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop()
    {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T value = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return value;
    }

    void close()
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_full_.notify_all();
        not_empty_.notify_all();
    }

private:
    std::size_t capacity_;
    std::deque<T> items_;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
};

}  // namespace redmotion
