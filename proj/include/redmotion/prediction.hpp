#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "redmotion/scene.hpp"

namespace redmotion {

inline constexpr std::size_t kModes = 6;

// Multimodal trajectory output: kModes proposals of `steps` ego-frame points
// plus softmax-normalized confidences.
struct MotionPrediction {
    std::size_t steps = 0;
    std::vector<Vec2> proposals;     // [mode * steps + t]
    std::vector<double> confidences;  // kModes

    MotionPrediction() = default;
    explicit MotionPrediction(std::size_t t) : steps(t), proposals(kModes * t), confidences(kModes, 1.0 / kModes) {}

    [[nodiscard]] std::size_t modes() const noexcept { return confidences.size(); }
    Vec2& at(std::size_t mode, std::size_t t) { return proposals[mode * steps + t]; }
    [[nodiscard]] Vec2 at(std::size_t mode, std::size_t t) const { return proposals[mode * steps + t]; }

    friend bool operator==(const MotionPrediction&, const MotionPrediction&) = default;
};

// Ground-truth future of one agent in the ego frame.
struct FutureTruth {
    std::vector<Vec2> positions;
    std::vector<std::uint8_t> valid;

    [[nodiscard]] std::size_t steps() const noexcept { return positions.size(); }
};

}  // namespace redmotion
