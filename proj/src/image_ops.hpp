#ifndef VCM_IMAGE_OPS_HPP
#define VCM_IMAGE_OPS_HPP

#include <cstdint>
#include <vector>

#include "media_io.hpp"

namespace vcm::img {

struct FloatImage {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<float> data;

    FloatImage() = default;
    FloatImage(uint32_t w, uint32_t h, float fill = 0.f)
        : width(w), height(h), data(size_t(w) * h, fill) {}

    float at(uint32_t x, uint32_t y) const { return data[size_t(y) * width + x]; }
    float& at(uint32_t x, uint32_t y) { return data[size_t(y) * width + x]; }
    size_t size() const { return data.size(); }
};

FloatImage from_luma(const media::LumaPlane& plane);

// Sampled Gaussian exp(-x^2 / (2 sigma^2)) at integer offsets, normalized to
// sum 1. taps must be odd.
std::vector<float> gaussian_kernel(int taps, double sigma);

// Separable convolution with replicate edges; output has the input size.
FloatImage filter_replicate(const FloatImage& in, const std::vector<float>& kernel);

// Separable convolution keeping only fully-covered pixels; output shrinks by
// taps-1 per axis. Requires the input to be at least taps wide/tall.
FloatImage filter_valid(const FloatImage& in, const std::vector<float>& kernel);

// Keeps every other sample starting at 0; output dims are ceil(n/2).
FloatImage subsample2(const FloatImage& in);

// 2x2 mean pooling; odd tails pool over the remaining 1- or 2-sample block,
// so output dims are ceil(n/2).
FloatImage box_downsample2(const FloatImage& in);

// Pixel-center bilinear resampling with edge clamp, rounded to uint8.
media::LumaPlane resize_bilinear(const media::LumaPlane& in, uint32_t out_w, uint32_t out_h);

} // namespace vcm::img

#endif
