#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sponge {

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

// Dense n-dimensional array of doubles, row-major. Rank-0 tensors hold a
// single scalar. Extents must be positive; product(shape) == data.size().
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);
    Tensor(std::vector<std::size_t> s, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor full(std::vector<std::size_t> s, double v);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return shape.empty(); }
    double scalar_value() const;

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && a.data == b.data;
    }
};

// Throws std::runtime_error naming `what` if any element is NaN or Inf.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace sponge
