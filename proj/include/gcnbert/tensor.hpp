#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcnbert {

#ifdef GCNBERT_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when an operation produces NaN/Inf or receives a non-finite input
// that it cannot propagate.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of Real values.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = Real(0));
    Tensor(Shape shape, std::vector<Real> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, Real value) { return Tensor(std::move(shape), value); }
    static Tensor identity(std::size_t n);
    static Tensor scalar(Real value) { return Tensor({1}, std::vector<Real>{value}); }
    static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows);
    static Tensor vector(std::initializer_list<Real> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<Real> data() noexcept { return data_; }
    std::span<const Real> data() const noexcept { return data_; }
    std::vector<Real>& storage() noexcept { return data_; }
    const std::vector<Real>& storage() const noexcept { return data_; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }

    // 2-D element access; only valid for rank-2 tensors.
    Real& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
    Real at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

    Tensor reshaped(Shape shape) const;
    void fill(Real value);
    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<Real> data_;
};

// Throws NumericError naming `what` if any element is NaN or infinite.
void require_finite(const Tensor& t, const std::string& what);

}  // namespace gcnbert
