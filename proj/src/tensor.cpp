#include "kfr/tensor.hpp"

#include <cstring>

#include "kfr/errors.hpp"

namespace kfr {

FeatureMap FeatureMap::make(int c, int h, int w, float fill) {
    FeatureMap m;
    m.channels = c;
    m.height = h;
    m.width = w;
    m.data.assign(static_cast<std::size_t>(c) * h * w, fill);
    return m;
}

FeatureMap image_to_feature(const ImageBuffer& img) {
    if (img.empty()) throw ShapeMismatch("image_to_feature: empty image");
    FeatureMap m = FeatureMap::make(img.channels, img.height, img.width);
    const std::size_t plane = m.plane_size();
    for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < img.channels; ++c)
            m.data[static_cast<std::size_t>(c) * plane + p] =
                img.data[p * img.channels + c];
    return m;
}

}  // namespace kfr
