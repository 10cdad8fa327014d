#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "redmotion/scene.hpp"

namespace redmotion {

// Channel-major [3, 224, 224] birds-eye image with values in [0, 1].
struct RasterImage {
    static constexpr std::size_t kSize = 224;
    static constexpr std::size_t kChannels = 3;
    static constexpr std::size_t kPixels = kSize * kSize;

    std::vector<double> data = std::vector<double>(kChannels * kPixels, 0.0);

    double& at(std::size_t channel, std::size_t row, std::size_t col) { return data[channel * kPixels + row * kSize + col]; }
    double at(std::size_t channel, std::size_t row, std::size_t col) const { return data[channel * kPixels + row * kSize + col]; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

// Channel assignment.
inline constexpr std::size_t kLaneChannel = 0;
inline constexpr std::size_t kBoundaryChannel = 1;  // road edges, crosswalks, stop lines
inline constexpr std::size_t kAgentChannel = 2;

// kLaneRadius meters map onto half the image width.
inline constexpr double kPixelsPerMeter = static_cast<double>(RasterImage::kSize) / 2.0 / kLaneRadius;

// Continuous pixel coordinates (col, row) of an ego-frame point; +y is up.
Vec2 to_pixel(Vec2 p);

/// Deterministic rendering of an ego-frame scene. Agent histories fade with
/// age: intensity 1 at prediction_start down to 0.1 nine steps earlier.
RasterImage rasterize(const RoadScene& scene);

// Map-only copy (agent channel cleared) and agent-only copy (map channels cleared).
RasterImage map_channels(const RasterImage& image);
RasterImage agent_channels(const RasterImage& image);

struct RasterAugmentation {
    double rotation = 0.0;  // radians
    double zoom = 1.0;      // > 1 magnifies
    std::array<double, 3> gain{1.0, 1.0, 1.0};
    std::array<double, 3> bias{0.0, 0.0, 0.0};
    bool color_drop = false;
};

inline constexpr double kMaxRasterRotationDeg = 10.0;
inline constexpr double kMaxZoomChange = 0.3;
inline constexpr double kColorJitterStrength = 0.2;
inline constexpr double kColorDropProbability = 0.2;

RasterAugmentation sample_raster_augmentation(std::mt19937_64& rng);
// Rotation and zoom about the image center (bilinear), then per-channel
// affine jitter, then optional grayscale drop; results clamped to [0, 1].
RasterImage apply_raster_augmentation(const RasterImage& image, const RasterAugmentation& aug);
RasterImage augment_raster_view(const RasterImage& image, std::mt19937_64& rng);

}  // namespace redmotion
