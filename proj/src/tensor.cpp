#include "sponge/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sponge {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

static void check_extents(const std::vector<std::size_t>& shape) {
    for (std::size_t e : shape) {
        if (e == 0) {
            throw std::invalid_argument("tensor extents must be positive, got " +
                                        shape_string(shape));
        }
    }
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    check_extents(shape);
    data.assign(shape_size(shape), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
    check_extents(shape);
    if (shape_size(shape) != data.size()) {
        throw std::invalid_argument("tensor data length " +
                                    std::to_string(data.size()) +
                                    " does not match shape " + shape_string(shape));
    }
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.data.assign(1, v);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    t.data.assign(t.data.size(), v);
    return t;
}

double Tensor::scalar_value() const {
    if (!is_scalar()) {
        throw std::invalid_argument("tensor " + shape_string(shape) +
                                    " is not a scalar");
    }
    return data[0];
}

void check_finite(const Tensor& t, const std::string& what) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("non-finite value in " + what);
        }
    }
}

}  // namespace sponge
