#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dualstudent {

using Shape = std::vector<std::size_t>;

/// Dense row-major array of doubles with an optional same-shape gradient
/// buffer. `grad` is empty when absent.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;

    Tensor() = default;
    /// Throws ShapeError if a dimension is zero or the element count disagrees.
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor scalar(double value);

    std::size_t size() const noexcept { return values.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    bool has_grad() const noexcept { return !grad.empty(); }
    bool is_scalar() const noexcept { return values.size() == 1; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const;
    std::span<double> row(std::size_t r);

    void zero_grad();
    void clear_grad() { grad.clear(); }
    bool all_finite() const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && a.values == b.values;
    }
};

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace dualstudent
