#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace avp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major double tensor. Rank 0 is a scalar holding one value.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    double item() const;
    bool all_finite() const noexcept;
    void fill(double value) noexcept;

    // Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<double> data_;
};

// Throws ContractError mentioning `what` unless a and b agree.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// Bitwise equality of payloads, treating -0.0 and 0.0 as different.
bool bitwise_equal(const Tensor& a, const Tensor& b);

// FNV-1a over shape and raw payload bytes.
std::uint64_t tensor_hash(const Tensor& t, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace avp
