#include "image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace vcm::img {

FloatImage from_luma(const media::LumaPlane& plane) {
    FloatImage out(plane.width, plane.height);
    for (size_t i = 0; i < plane.samples.size(); ++i)
        out.data[i] = float(plane.samples[i]);
    return out;
}

std::vector<float> gaussian_kernel(int taps, double sigma) {
    if (taps < 1 || taps % 2 == 0) raise(ErrorKind::InvalidArg, "kernel taps must be odd");
    if (sigma <= 0) raise(ErrorKind::InvalidArg, "kernel sigma must be positive");
    const int radius = taps / 2;
    std::vector<double> w(size_t(taps), 0.0);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        w[size_t(i + radius)] = std::exp(-double(i) * i / (2.0 * sigma * sigma));
        sum += w[size_t(i + radius)];
    }
    std::vector<float> out(size_t(taps), 0.f);
    for (int i = 0; i < taps; ++i) out[size_t(i)] = float(w[size_t(i)] / sum);
    return out;
}

namespace {

// Horizontal pass with replicate edges; rows keep their length.
void conv_rows_replicate(const FloatImage& in, const std::vector<float>& k, FloatImage& out) {
    const int radius = int(k.size()) / 2;
    const int w = int(in.width);
    for (uint32_t y = 0; y < in.height; ++y) {
        const float* src = &in.data[size_t(y) * in.width];
        float* dst = &out.data[size_t(y) * in.width];
        for (int x = 0; x < w; ++x) {
            float acc = 0.f;
            for (int t = -radius; t <= radius; ++t) {
                int xx = std::clamp(x + t, 0, w - 1);
                acc += k[size_t(t + radius)] * src[xx];
            }
            dst[x] = acc;
        }
    }
}

void conv_cols_replicate(const FloatImage& in, const std::vector<float>& k, FloatImage& out) {
    const int radius = int(k.size()) / 2;
    const int h = int(in.height);
    for (int y = 0; y < h; ++y) {
        float* dst = &out.data[size_t(y) * in.width];
        for (uint32_t x = 0; x < in.width; ++x) {
            float acc = 0.f;
            for (int t = -radius; t <= radius; ++t) {
                int yy = std::clamp(y + t, 0, h - 1);
                acc += k[size_t(t + radius)] * in.data[size_t(yy) * in.width + x];
            }
            dst[x] = acc;
        }
    }
}

} // namespace

FloatImage filter_replicate(const FloatImage& in, const std::vector<float>& kernel) {
    FloatImage tmp(in.width, in.height);
    conv_rows_replicate(in, kernel, tmp);
    FloatImage out(in.width, in.height);
    conv_cols_replicate(tmp, kernel, out);
    return out;
}

FloatImage filter_valid(const FloatImage& in, const std::vector<float>& kernel) {
    const uint32_t taps = uint32_t(kernel.size());
    if (in.width < taps || in.height < taps)
        raise(ErrorKind::Format, "image " + std::to_string(in.width) + "x" +
                                     std::to_string(in.height) + " smaller than " +
                                     std::to_string(taps) + "-tap window");
    const uint32_t ow = in.width - taps + 1;
    // horizontal valid pass
    FloatImage tmp(ow, in.height);
    for (uint32_t y = 0; y < in.height; ++y) {
        const float* src = &in.data[size_t(y) * in.width];
        float* dst = &tmp.data[size_t(y) * ow];
        for (uint32_t x = 0; x < ow; ++x) {
            float acc = 0.f;
            for (uint32_t t = 0; t < taps; ++t) acc += kernel[t] * src[x + t];
            dst[x] = acc;
        }
    }
    // vertical valid pass
    const uint32_t oh = in.height - taps + 1;
    FloatImage out(ow, oh);
    for (uint32_t y = 0; y < oh; ++y) {
        float* dst = &out.data[size_t(y) * ow];
        for (uint32_t x = 0; x < ow; ++x) {
            float acc = 0.f;
            for (uint32_t t = 0; t < taps; ++t) acc += kernel[t] * tmp.data[size_t(y + t) * ow + x];
            dst[x] = acc;
        }
    }
    return out;
}

FloatImage subsample2(const FloatImage& in) {
    FloatImage out((in.width + 1) / 2, (in.height + 1) / 2);
    for (uint32_t y = 0; y < out.height; ++y)
        for (uint32_t x = 0; x < out.width; ++x)
            out.at(x, y) = in.at(2 * x, 2 * y);
    return out;
}

FloatImage box_downsample2(const FloatImage& in) {
    FloatImage out((in.width + 1) / 2, (in.height + 1) / 2);
    for (uint32_t y = 0; y < out.height; ++y) {
        const uint32_t y0 = 2 * y;
        const uint32_t y1 = std::min(y0 + 1, in.height - 1);
        for (uint32_t x = 0; x < out.width; ++x) {
            const uint32_t x0 = 2 * x;
            const uint32_t x1 = std::min(x0 + 1, in.width - 1);
            // for odd tails y1==y0 (or x1==x0) and the block degenerates
            uint32_t n = (1 + (x1 != x0)) * (1 + (y1 != y0));
            float acc = in.at(x0, y0);
            if (x1 != x0) acc += in.at(x1, y0);
            if (y1 != y0) acc += in.at(x0, y1);
            if (x1 != x0 && y1 != y0) acc += in.at(x1, y1);
            out.at(x, y) = acc / float(n);
        }
    }
    return out;
}

media::LumaPlane resize_bilinear(const media::LumaPlane& in, uint32_t out_w, uint32_t out_h) {
    if (in.width == 0 || in.height == 0) raise(ErrorKind::Format, "cannot resize empty plane");
    if (out_w == 0 || out_h == 0) raise(ErrorKind::InvalidArg, "target dims must be positive");
    if (in.width == out_w && in.height == out_h) return in;

    media::LumaPlane out(out_w, out_h);
    const double sx = double(in.width) / out_w;
    const double sy = double(in.height) / out_h;
    for (uint32_t y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, double(in.height - 1));
        const uint32_t y0 = uint32_t(fy);
        const uint32_t y1 = std::min(y0 + 1, in.height - 1);
        const double wy = fy - y0;
        for (uint32_t x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, double(in.width - 1));
            const uint32_t x0 = uint32_t(fx);
            const uint32_t x1 = std::min(x0 + 1, in.width - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * in.at(x0, y0) + wx * in.at(x1, y0);
            const double bot = (1.0 - wx) * in.at(x0, y1) + wx * in.at(x1, y1);
            const double v = (1.0 - wy) * top + wy * bot;
            out.at(x, y) = uint8_t(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

} // namespace vcm::img
