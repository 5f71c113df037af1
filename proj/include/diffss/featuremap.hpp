#pragma once

#include <cstddef>
#include <vector>

namespace diffss {

// Dense per-pixel real feature vectors, row-major, channel-interleaved.
struct FeatureMap {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> values;  // size = width*height*channels

    const double* at(int x, int y) const {
        return values.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
    double* at(int x, int y) {
        return values.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

}  // namespace diffss
