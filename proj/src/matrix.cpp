#include "vmr/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vmr {

Matrix::Matrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), v_(std::move(values)) {
    if (v_.size() != (size_t)rows * cols)
        throw std::invalid_argument("Matrix: value count " + std::to_string(v_.size()) +
                                    " does not match shape " + shape_str());
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::full(int rows, int cols, double value) {
    Matrix m(rows, cols);
    m.fill(value);
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    int r = (int)rows.size();
    int c = r == 0 ? 0 : (int)rows.begin()->size();
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if ((int)row.size() != c) throw std::invalid_argument("from_rows: ragged rows");
        int j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

Matrix Matrix::slice_rows(int r0, int r1) const {
    if (r0 < 0 || r1 > rows_ || r0 > r1)
        throw std::out_of_range("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                                ") of " + shape_str());
    Matrix out(r1 - r0, cols_);
    std::copy(row(r0), row(r0) + (size_t)(r1 - r0) * cols_, out.data());
    return out;
}

Matrix Matrix::slice_cols(int c0, int c1) const {
    if (c0 < 0 || c1 > cols_ || c0 > c1)
        throw std::out_of_range("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                                ") of " + shape_str());
    Matrix out(rows_, c1 - c0);
    for (int i = 0; i < rows_; ++i)
        std::copy(row(i) + c0, row(i) + c1, out.row(i));
    return out;
}

Matrix Matrix::transpose() const {
    Matrix out(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void check_shape(bool ok, const std::string& what, const Matrix& a, const Matrix& b) {
    if (!ok)
        throw std::invalid_argument(what + ": shapes " + a.shape_str() + " and " + b.shape_str());
}

namespace kernels {

namespace serial {

void matmul(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.cols() == b.rows(), "matmul", a, b);
    const int m = a.rows(), k = a.cols(), n = b.cols();
    dst = Matrix(m, n);
    for (int i = 0; i < m; ++i) {
        double* ci = dst.row(i);
        const double* ai = a.row(i);
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void tanh_map(Matrix& dst, const Matrix& a) {
    dst = Matrix(a.rows(), a.cols());
    const double* x = a.data();
    double* y = dst.data();
    for (size_t i = 0; i < a.size(); ++i) y[i] = std::tanh(x[i]);
}

void sigmoid_map(Matrix& dst, const Matrix& a) {
    dst = Matrix(a.rows(), a.cols());
    const double* x = a.data();
    double* y = dst.data();
    for (size_t i = 0; i < a.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void add(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "add", a, b);
    dst = Matrix(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) dst.data()[i] = a.data()[i] + b.data()[i];
}

void sub(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "sub", a, b);
    dst = Matrix(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) dst.data()[i] = a.data()[i] - b.data()[i];
}

void hadamard(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "hadamard", a, b);
    dst = Matrix(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) dst.data()[i] = a.data()[i] * b.data()[i];
}

}  // namespace serial

// Below this many output elements the parallel-for is not worth spawning.
constexpr long kParallelCutoff = 16 * 1024;

void matmul(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.cols() == b.rows(), "matmul", a, b);
    const int m = a.rows(), k = a.cols(), n = b.cols();
    dst = Matrix(m, n);
    const long work = (long)m * n * k;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < m; ++i) {
        double* ci = dst.row(i);
        const double* ai = a.row(i);
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void tanh_map(Matrix& dst, const Matrix& a) {
    dst = Matrix(a.rows(), a.cols());
    const double* x = a.data();
    double* y = dst.data();
    const long nn = (long)a.size();
#pragma omp parallel for schedule(static) if (nn > kParallelCutoff)
    for (long i = 0; i < nn; ++i) y[i] = std::tanh(x[i]);
}

void sigmoid_map(Matrix& dst, const Matrix& a) {
    dst = Matrix(a.rows(), a.cols());
    const double* x = a.data();
    double* y = dst.data();
    const long nn = (long)a.size();
#pragma omp parallel for schedule(static) if (nn > kParallelCutoff)
    for (long i = 0; i < nn; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void add(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "add", a, b);
    dst = Matrix(a.rows(), a.cols());
    const long nn = (long)a.size();
#pragma omp parallel for schedule(static) if (nn > kParallelCutoff)
    for (long i = 0; i < nn; ++i) dst.data()[i] = a.data()[i] + b.data()[i];
}

void sub(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "sub", a, b);
    dst = Matrix(a.rows(), a.cols());
    const long nn = (long)a.size();
#pragma omp parallel for schedule(static) if (nn > kParallelCutoff)
    for (long i = 0; i < nn; ++i) dst.data()[i] = a.data()[i] - b.data()[i];
}

void hadamard(Matrix& dst, const Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "hadamard", a, b);
    dst = Matrix(a.rows(), a.cols());
    const long nn = (long)a.size();
#pragma omp parallel for schedule(static) if (nn > kParallelCutoff)
    for (long i = 0; i < nn; ++i) dst.data()[i] = a.data()[i] * b.data()[i];
}

}  // namespace kernels

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out;
    kernels::matmul(out, a, b);
    return out;
}

Matrix tanh_map(const Matrix& a) {
    Matrix out;
    kernels::tanh_map(out, a);
    return out;
}

Matrix concat(const Matrix& a, const Matrix& b, Axis axis) {
    if (axis == Axis::Rows) {
        check_shape(a.cols() == b.cols(), "concat rows", a, b);
        Matrix out(a.rows() + b.rows(), a.cols());
        std::copy(a.data(), a.data() + a.size(), out.data());
        std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
        return out;
    }
    check_shape(a.rows() == b.rows(), "concat cols", a, b);
    Matrix out(a.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        std::copy(a.row(i), a.row(i) + a.cols(), out.row(i));
        std::copy(b.row(i), b.row(i) + b.cols(), out.row(i) + a.cols());
    }
    return out;
}

Matrix mean_over_rows(const Matrix& a) {
    if (a.rows() < 1) throw std::invalid_argument("mean_over_rows: empty matrix " + a.shape_str());
    Matrix out(1, a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
    for (int j = 0; j < a.cols(); ++j) out(0, j) /= a.rows();
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace vmr
