#include "sketchinpaint/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

Grid::Grid(int n, int c, int h, int w, double fill) : Grid(Shape{n, c, h, w}, fill) {}

Grid::Grid(const Shape& shape, double fill) : shape_(shape) {
    for (int d : shape) {
        if (d < 0) {
            throw ShapeError("negative dimension in shape " + sketchinpaint::shape_str(shape));
        }
    }
    data_.assign(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2] * shape[3], fill);
}

void Grid::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Grid Grid::reshaped(const Shape& shape) const {
    Grid out(shape);
    if (out.size() != size()) {
        throw ShapeError("cannot reshape " + shape_str() + " to " + sketchinpaint::shape_str(shape));
    }
    out.data_ = data_;
    return out;
}

Grid Grid::slice_batch(int begin, int count) const {
    if (begin < 0 || count < 0 || begin + count > n()) {
        throw ShapeError("batch slice out of range for " + shape_str());
    }
    Grid out(count, c(), h(), w());
    const std::size_t per = static_cast<std::size_t>(c()) * h() * w();
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * per), count * per, out.data_.begin());
    return out;
}

Grid Grid::stack_batch(std::span<const Grid> parts) {
    if (parts.empty()) {
        return {};
    }
    int total = 0;
    for (const auto& p : parts) {
        if (p.c() != parts[0].c() || p.h() != parts[0].h() || p.w() != parts[0].w()) {
            throw ShapeError("stack_batch: " + p.shape_str() + " vs " + parts[0].shape_str());
        }
        total += p.n();
    }
    Grid out(total, parts[0].c(), parts[0].h(), parts[0].w());
    auto it = out.data_.begin();
    for (const auto& p : parts) {
        it = std::copy(p.data_.begin(), p.data_.end(), it);
    }
    return out;
}

std::string Grid::shape_str() const { return sketchinpaint::shape_str(shape_); }

std::string shape_str(const Grid::Shape& shape) {
    std::ostringstream os;
    os << "(" << shape[0] << ", " << shape[1] << ", " << shape[2] << ", " << shape[3] << ")";
    return os.str();
}

void require_same_shape(const Grid& a, const Grid& b, const char* context) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(context) + ": shape " + a.shape_str() + " does not match " + b.shape_str());
    }
}

bool is_binary(const Grid& g) {
    return std::all_of(g.values().begin(), g.values().end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double max_relative_error(const Grid& a, const Grid& b, double floor) {
    require_same_shape(a, b, "max_relative_error");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max(std::abs(b[i]), floor);
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace sketchinpaint
