#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bnnprobe {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// A Tensor is an immutable value: once constructed its shape and contents
/// never change, so copies share one buffer. Construction rejects non-finite
/// entries, which makes "no NaN/Inf escapes" a property of every operation
/// that returns a Tensor.
class Tensor {
public:
    /// Empty 1-D tensor of length zero.
    Tensor();
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_->size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    bool is_scalar() const { return size() == 1 && rank() <= 1; }

    std::span<const double> data() const { return {data_->data(), data_->size()}; }
    const double* begin() const { return data_->data(); }
    const double* end() const { return data_->data() + data_->size(); }

    double operator[](std::size_t i) const { return (*data_)[i]; }
    double at(std::size_t r, std::size_t c) const;
    /// Value of a single-element tensor.
    double item() const;

    std::vector<double> to_vector() const { return *data_; }
    Tensor reshaped(Shape shape) const;
    /// Row r of a 2-D tensor as a 1-D tensor.
    Tensor row(std::size_t r) const;

private:
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);

// Plain (untaped) numerics.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);
double linf_norm(const Tensor& a);
double frobenius_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);
std::size_t argmax(const Tensor& a);
/// Stack equally-sized 1-D tensors as rows of a matrix.
Tensor stack_rows(std::span<const Tensor> rows);

void require_finite(std::span<const double> values, const char* context);

}  // namespace bnnprobe
