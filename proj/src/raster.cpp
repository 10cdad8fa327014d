#include "redmotion/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace redmotion {

namespace {

constexpr double kCenter = static_cast<double>(RasterImage::kSize) / 2.0;

void plot(RasterImage& image, std::size_t channel, Vec2 pixel, double intensity)
{
    const double col = std::floor(pixel.x);
    const double row = std::floor(pixel.y);
    if (col < 0.0 || row < 0.0 || col >= static_cast<double>(RasterImage::kSize) || row >= static_cast<double>(RasterImage::kSize)) {
        return;
    }
    double& v = image.at(channel, static_cast<std::size_t>(row), static_cast<std::size_t>(col));
    v = std::max(v, intensity);
}

void draw_segment(RasterImage& image, std::size_t channel, Vec2 a, Vec2 b, double intensity)
{
    const Vec2 pa = to_pixel(a);
    const Vec2 pb = to_pixel(b);
    const double length = distance(pa, pb);
    const auto steps = static_cast<std::size_t>(std::ceil(length / 0.25));
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = steps == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps);
        plot(image, channel, pa + t * (pb - pa), intensity);
    }
}

double sample_bilinear(const RasterImage& image, std::size_t channel, double u, double v)
{
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double au = u - fu;
    const double av = v - fv;
    const auto fetch = [&](double col, double row) {
        if (col < 0.0 || row < 0.0 || col >= static_cast<double>(RasterImage::kSize) || row >= static_cast<double>(RasterImage::kSize)) {
            return 0.0;
        }
        return image.at(channel, static_cast<std::size_t>(row), static_cast<std::size_t>(col));
    };
    double value = (1.0 - au) * (1.0 - av) * fetch(fu, fv);
    if (au != 0.0) value += au * (1.0 - av) * fetch(fu + 1.0, fv);
    if (av != 0.0) value += (1.0 - au) * av * fetch(fu, fv + 1.0);
    if (au != 0.0 && av != 0.0) value += au * av * fetch(fu + 1.0, fv + 1.0);
    return value;
}

}  // namespace

Vec2 to_pixel(Vec2 p) { return {kCenter + p.x * kPixelsPerMeter, kCenter - p.y * kPixelsPerMeter}; }

RasterImage rasterize(const RoadScene& scene)
{
    RasterImage image;
    for (const auto& poly : scene.polylines) {
        const std::size_t channel = poly.kind == PolylineKind::lane_center ? kLaneChannel : kBoundaryChannel;
        if (poly.points.size() == 1) plot(image, channel, to_pixel(poly.points.front()), 1.0);
        for (std::size_t i = 1; i < poly.points.size(); ++i) draw_segment(image, channel, poly.points[i - 1], poly.points[i], 1.0);
    }
    if (scene.map_only) return image;

    constexpr std::int64_t history = 10;
    for (const auto& track : scene.tracks) {
        const AgentState* newer = nullptr;
        for (std::int64_t age = 0; age < history; ++age) {
            const AgentState* s = track.state_at(scene.prediction_start - age);
            if (s == nullptr || !s->valid) continue;
            const double intensity = 1.0 - static_cast<double>(age) / static_cast<double>(history);
            plot(image, kAgentChannel, to_pixel(s->position), intensity);
            if (newer != nullptr) draw_segment(image, kAgentChannel, s->position, newer->position, intensity);
            newer = s;
        }
    }
    return image;
}

RasterImage map_channels(const RasterImage& image)
{
    RasterImage out = image;
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(kAgentChannel * RasterImage::kPixels), RasterImage::kPixels, 0.0);
    return out;
}

RasterImage agent_channels(const RasterImage& image)
{
    RasterImage out;
    std::copy_n(image.data.begin() + static_cast<std::ptrdiff_t>(kAgentChannel * RasterImage::kPixels), RasterImage::kPixels,
                out.data.begin() + static_cast<std::ptrdiff_t>(kAgentChannel * RasterImage::kPixels));
    return out;
}

RasterAugmentation sample_raster_augmentation(std::mt19937_64& rng)
{
    const double max_rot = kMaxRasterRotationDeg * std::numbers::pi / 180.0;
    std::uniform_real_distribution<double> rot(-max_rot, max_rot);
    std::uniform_real_distribution<double> zoom(1.0 - kMaxZoomChange, 1.0 + kMaxZoomChange);
    std::uniform_real_distribution<double> gain(1.0 - kColorJitterStrength, 1.0 + kColorJitterStrength);
    std::uniform_real_distribution<double> bias(-kColorJitterStrength, kColorJitterStrength);
    std::bernoulli_distribution drop(kColorDropProbability);
    RasterAugmentation aug;
    aug.rotation = rot(rng);
    aug.zoom = zoom(rng);
    for (auto& g : aug.gain) g = gain(rng);
    for (auto& b : aug.bias) b = bias(rng);
    aug.color_drop = drop(rng);
    return aug;
}

RasterImage apply_raster_augmentation(const RasterImage& image, const RasterAugmentation& aug)
{
    RasterImage out;
    const double c = std::cos(aug.rotation);
    const double s = std::sin(aug.rotation);
    const double inv_zoom = 1.0 / aug.zoom;
    for (std::size_t row = 0; row < RasterImage::kSize; ++row) {
        for (std::size_t col = 0; col < RasterImage::kSize; ++col) {
            // Inverse map of the output pixel center onto the source image.
            const double dx = static_cast<double>(col) + 0.5 - kCenter;
            const double dy = static_cast<double>(row) + 0.5 - kCenter;
            const double sx = (c * dx + s * dy) * inv_zoom + kCenter - 0.5;
            const double sy = (-s * dx + c * dy) * inv_zoom + kCenter - 0.5;
            for (std::size_t ch = 0; ch < RasterImage::kChannels; ++ch) {
                const double v = sample_bilinear(image, ch, sx, sy);
                out.at(ch, row, col) = std::clamp(aug.gain[ch] * v + aug.bias[ch], 0.0, 1.0);
            }
        }
    }
    if (aug.color_drop) {
        for (std::size_t p = 0; p < RasterImage::kPixels; ++p) {
            const double gray = 0.299 * out.data[p] + 0.587 * out.data[RasterImage::kPixels + p] +
                                0.114 * out.data[2 * RasterImage::kPixels + p];
            const double v = std::clamp(gray, 0.0, 1.0);
            for (std::size_t ch = 0; ch < RasterImage::kChannels; ++ch) out.data[ch * RasterImage::kPixels + p] = v;
        }
    }
    return out;
}

RasterImage augment_raster_view(const RasterImage& image, std::mt19937_64& rng)
{
    return apply_raster_augmentation(image, sample_raster_augmentation(rng));
}

}  // namespace redmotion
