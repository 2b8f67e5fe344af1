#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "kfr/geometry.hpp"

namespace kfr {

// C-major feature map: data[(c*height + y)*width + x].
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    static FeatureMap make(int c, int h, int w, float fill = 0.0f);

    std::size_t plane_size() const {
        return static_cast<std::size_t>(height) * width;
    }
    std::size_t size() const { return data.size(); }
    float* plane(int c) { return data.data() + static_cast<std::size_t>(c) * plane_size(); }
    const float* plane(int c) const {
        return data.data() + static_cast<std::size_t>(c) * plane_size();
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    bool same_shape(const FeatureMap& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

// Four feature maps at spatial downsampling factors {2,4,8,16} relative to
// the extracted image, fine to coarse.
struct FeaturePyramid {
    static constexpr int kLevels = 4;
    static constexpr std::array<int, kLevels> kFactors = {2, 4, 8, 16};

    std::array<FeatureMap, kLevels> levels;
};

// Planar copy of an interleaved image (1 channel replicated to `channels`
// when they differ and the image is single-channel).
FeatureMap image_to_feature(const ImageBuffer& img);

}  // namespace kfr
