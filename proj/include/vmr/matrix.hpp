#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vmr {

// Dense row-major matrix of doubles. The single numeric carrier for
// features, weights and adjacencies.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), v_((size_t)rows * cols, 0.0) {}
    Matrix(int rows, int cols, std::vector<double> values);

    static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
    static Matrix identity(int n);
    static Matrix full(int rows, int cols, double value);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& operator()(int r, int c) { return v_[(size_t)r * cols_ + c]; }
    double operator()(int r, int c) const { return v_[(size_t)r * cols_ + c]; }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double* row(int r) { return v_.data() + (size_t)r * cols_; }
    const double* row(int r) const { return v_.data() + (size_t)r * cols_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool equals(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_; }
    bool all_finite() const;

    Matrix slice_rows(int r0, int r1) const;  // [r0, r1)
    Matrix slice_cols(int c0, int c1) const;
    Matrix transpose() const;

    void fill(double value) { std::fill(v_.begin(), v_.end(), value); }
    void setZero() { fill(0.0); }

    std::string shape_str() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

// Thrown on dimension mismatches; message carries both shapes.
struct ShapeError;

void check_shape(bool ok, const std::string& what, const Matrix& a, const Matrix& b);

enum class Axis { Rows, Cols };  // time-rows | feature-cols

namespace kernels {

// Serial reference kernels. Kept as the ground truth the parallel
// kernels are tested against.
namespace serial {
void matmul(Matrix& dst, const Matrix& a, const Matrix& b);
void tanh_map(Matrix& dst, const Matrix& a);
void sigmoid_map(Matrix& dst, const Matrix& a);
void add(Matrix& dst, const Matrix& a, const Matrix& b);
void sub(Matrix& dst, const Matrix& a, const Matrix& b);
void hadamard(Matrix& dst, const Matrix& a, const Matrix& b);
}  // namespace serial

// OpenMP kernels; bitwise-identical to the serial reference because each
// output element is computed by exactly one thread in the same order.
void matmul(Matrix& dst, const Matrix& a, const Matrix& b);
void tanh_map(Matrix& dst, const Matrix& a);
void sigmoid_map(Matrix& dst, const Matrix& a);
void add(Matrix& dst, const Matrix& a, const Matrix& b);
void sub(Matrix& dst, const Matrix& a, const Matrix& b);
void hadamard(Matrix& dst, const Matrix& a, const Matrix& b);

}  // namespace kernels

// Convenience wrappers returning fresh matrices (parallel kernels).
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix tanh_map(const Matrix& a);
Matrix concat(const Matrix& a, const Matrix& b, Axis axis);
Matrix mean_over_rows(const Matrix& a);

// Writes a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace vmr
