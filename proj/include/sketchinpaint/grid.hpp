#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sketchinpaint {

// Dense rank-4 array in NCHW order. Used for latents, features, masks, images
// and (as 1 x 1 x tokens x dim) text embeddings.
class Grid {
public:
    using Shape = std::array<int, 4>;

    Grid() = default;
    Grid(int n, int c, int h, int w, double fill = 0.0);
    explicit Grid(const Shape& shape, double fill = 0.0);

    static Grid zeros_like(const Grid& other) { return Grid(other.shape()); }

    int n() const { return shape_[0]; }
    int c() const { return shape_[1]; }
    int h() const { return shape_[2]; }
    int w() const { return shape_[3]; }
    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }
    double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Pointer to the (h, w) plane of sample n, channel c.
    double* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
    const double* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

    bool same_shape(const Grid& other) const { return shape_ == other.shape_; }
    void fill(double v);
    Grid reshaped(const Shape& shape) const;

    // Samples [begin, begin + count) along the batch axis.
    Grid slice_batch(int begin, int count) const;
    // Concatenates along the batch axis; all parts share C, H, W.
    static Grid stack_batch(std::span<const Grid> parts);

    std::string shape_str() const;

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_{0, 0, 0, 0};
    std::vector<double> data_;
};

std::string shape_str(const Grid::Shape& shape);

// Throws ShapeError with the given context when shapes differ.
void require_same_shape(const Grid& a, const Grid& b, const char* context);

// True when every element equals 0 or 1 exactly.
bool is_binary(const Grid& g);

// max_i |a_i - b_i| / max(|b_i|, floor)
double max_relative_error(const Grid& a, const Grid& b, double floor = 1e-12);

}  // namespace sketchinpaint
