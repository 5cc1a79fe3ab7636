#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sketchinpaint/grid.hpp"

namespace sketchinpaint {

// (1, 3 or 1, H, W) -> (1, 1, H, W) with luma weights 0.299 / 0.587 / 0.114.
Grid to_grayscale(const Grid& image);

struct SobelResponse {
    Grid gx, gy, magnitude;  // (1, 1, H, W), replicate border
};
SobelResponse sobel(const Grid& gray);

struct CannyOptions {
    double low = 0.1;    // fractions of the largest gradient magnitude
    double high = 0.3;
    int blur_kernel = 5;
    double blur_sigma = 1.4;
};

// Binary edge map: Gaussian smoothing, Sobel gradients, non-maximum suppression
// along the quantized gradient direction, then double thresholding with
// 8-connected hysteresis.
Grid canny_sketch(const Grid& image, double low, double high);
Grid canny_sketch(const Grid& image, const CannyOptions& options);

// (1 - pm) * m0 * s
Grid partial_sketch(const Grid& pm, const Grid& m0, const Grid& sketch);

// Named sketch extractors. "canny" is built in; further generators (for example
// learned edge detectors) can be registered at start-up.
class SketchRegistry {
public:
    using Generator = std::function<Grid(const Grid& image)>;

    static SketchRegistry& instance();
    void add(const std::string& name, Generator generator);
    bool contains(const std::string& name) const;
    // Throws ParameterError("sketch_type") for an unknown name.
    Grid generate(const std::string& name, const Grid& image) const;
    std::vector<std::string> names() const;

private:
    SketchRegistry();
    std::map<std::string, Generator> generators_;
};

}  // namespace sketchinpaint
