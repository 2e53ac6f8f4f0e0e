#include "vmr/rand.hpp"
#include "vmr/tape.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

using namespace vmr;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

Matrix scalar_matrix(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
}

}  // namespace

TEST_CASE("backward through tanh at zero") {
    Tape tape;
    NodeId x = tape.leaf(scalar_matrix(0.0));
    NodeId y = tape.tanh(x);
    tape.backward_scalar(y);
    CHECK(tape.leaf_grad(x)(0, 0) == 1.0);
}

TEST_CASE("tanh backward equals 1 - tanh^2 elementwise") {
    std::mt19937_64 rng(2);
    Tape tape;
    NodeId x = tape.leaf(random_matrix(4, 5, rng));
    NodeId y = tape.tanh(x);
    tape.backward(y, Matrix::full(4, 5, 1.0));
    const Matrix& grad = tape.leaf_grad(x);
    const Matrix& out = tape.value(y);
    for (size_t i = 0; i < grad.size(); ++i)
        CHECK(std::fabs(grad.data()[i] - (1.0 - out.data()[i] * out.data()[i])) < 1e-12);
}

TEST_CASE("backward of x*x at 3 gives 6") {
    Tape tape;
    NodeId x = tape.leaf(scalar_matrix(3.0));
    NodeId y = tape.hadamard(x, x);
    tape.backward_scalar(y);
    CHECK(tape.leaf_grad(x)(0, 0) == 6.0);
}

TEST_CASE("matmul backward matches finite differences") {
    std::mt19937_64 rng(3);
    ParamStore params;
    params.create("a", random_matrix(3, 4, rng));
    params.create("b", random_matrix(4, 2, rng));
    auto loss = [&](bool with_grad) {
        Tape tape;
        NodeId a = tape.param(params, "a");
        NodeId b = tape.param(params, "b");
        NodeId y = tape.sum_all(tape.tanh(tape.matmul(a, b)));
        if (with_grad) tape.backward_scalar(y);
        return tape.scalar(y);
    };
    std::mt19937_64 pick(4);
    CHECK(finite_diff_check(loss, params, 1e-5, 20, pick) < 1e-7);
}

TEST_CASE("concat splits gradients and slice scatters them") {
    std::mt19937_64 rng(5);
    Tape tape;
    NodeId a = tape.leaf(random_matrix(2, 3, rng));
    NodeId b = tape.leaf(random_matrix(4, 3, rng));
    NodeId cat = tape.concat_rows({a, b});
    NodeId sliced = tape.slice_rows(cat, 1, 3);  // last row of a, first of b
    tape.backward(sliced, Matrix::full(2, 3, 1.0));
    CHECK(tape.leaf_grad(a).equals(
        concat(Matrix::zeros(1, 3), Matrix::full(1, 3, 1.0), Axis::Rows)));
    CHECK(tape.leaf_grad(b).equals(
        concat(Matrix::full(1, 3, 1.0), Matrix::zeros(3, 3), Axis::Rows)));
}

TEST_CASE("mean_over_rows backward spreads the seed") {
    Tape tape;
    NodeId x = tape.leaf(Matrix::zeros(4, 2));
    NodeId y = tape.mean_over_rows(x);
    tape.backward(y, Matrix::full(1, 2, 1.0));
    CHECK(tape.leaf_grad(x).equals(Matrix::full(4, 2, 0.25)));
}

TEST_CASE("relu and abs use subgradient zero at the kink") {
    Tape tape;
    NodeId x = tape.leaf(Matrix::from_rows({{0.0, -1.0, 2.0}}));
    NodeId r = tape.relu(x);
    tape.backward(r, Matrix::full(1, 3, 1.0));
    CHECK(tape.leaf_grad(x).equals(Matrix::from_rows({{0.0, 0.0, 1.0}})));

    Tape tape2;
    NodeId x2 = tape2.leaf(Matrix::from_rows({{0.0, -1.5, 2.5}}));
    NodeId a = tape2.abs(x2);
    tape2.backward(a, Matrix::full(1, 3, 1.0));
    CHECK(tape2.leaf_grad(x2).equals(Matrix::from_rows({{0.0, -1.0, 1.0}})));
}

TEST_CASE("batch norm training backward matches finite differences") {
    std::mt19937_64 rng(6);
    ParamStore params;
    params.create("x", random_matrix(5, 3, rng));
    params.create("gamma", random_matrix(1, 3, rng));
    params.create("beta", random_matrix(1, 3, rng));
    params.create("rm", Matrix(1, 3), /*trainable=*/false);
    params.create("rv", Matrix::full(1, 3, 1.0), /*trainable=*/false);
    auto loss = [&](bool with_grad) {
        Tape tape;
        NodeId x = tape.param(params, "x");
        NodeId g = tape.param(params, "gamma");
        NodeId b = tape.param(params, "beta");
        NodeId y = tape.batch_norm_train(x, g, b, params, "rm", "rv", 1e-5, 0.1,
                                         /*update_running=*/false);
        NodeId out = tape.sum_all(tape.tanh(y));
        if (with_grad) tape.backward_scalar(out);
        return tape.scalar(out);
    };
    std::mt19937_64 pick(7);
    CHECK(finite_diff_check(loss, params, 1e-5, 30, pick) < 1e-6);
}

TEST_CASE("batch norm eval uses running statistics and is affine") {
    ParamStore params;
    params.create("gamma", Matrix::full(1, 2, 2.0));
    params.create("beta", Matrix::full(1, 2, 1.0));
    Matrix rm = Matrix::from_rows({{1.0, -1.0}});
    Matrix rv = Matrix::from_rows({{4.0, 0.25}});
    Tape tape;
    NodeId x = tape.leaf(Matrix::from_rows({{3.0, 0.0}}));
    NodeId y = tape.batch_norm_eval(x, tape.param(params, "gamma"), tape.param(params, "beta"),
                                    rm, rv, 0.0);
    CHECK(tape.value(y)(0, 0) == doctest::Approx(2.0 * (3.0 - 1.0) / 2.0 + 1.0));
    CHECK(tape.value(y)(0, 1) == doctest::Approx(2.0 * (0.0 + 1.0) / 0.5 + 1.0));
}

TEST_CASE("running statistics update uses the configured momentum") {
    ParamStore params;
    params.create("gamma", Matrix::full(1, 1, 1.0));
    params.create("beta", Matrix(1, 1));
    params.create("rm", Matrix(1, 1), false);
    params.create("rv", Matrix::full(1, 1, 1.0), false);
    Tape tape;
    NodeId x = tape.leaf(Matrix::from_rows({{1.0}, {3.0}}));  // mean 2, biased var 1
    tape.batch_norm_train(x, tape.param(params, "gamma"), tape.param(params, "beta"), params,
                          "rm", "rv", 1e-5, 0.1, /*update_running=*/true);
    CHECK(params.value("rm")(0, 0) == doctest::Approx(0.9 * 0.0 + 0.1 * 2.0));
    // Unbiased variance (n/(n-1)) feeds the running slot.
    CHECK(params.value("rv")(0, 0) == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
}

TEST_CASE("record replays bit-for-bit and is topologically ordered") {
    std::mt19937_64 rng(8);
    ParamStore params;
    params.create("w", random_matrix(3, 3, rng));
    Tape tape;
    NodeId x = tape.leaf(random_matrix(2, 3, rng));
    NodeId w = tape.param(params, "w");
    NodeId h = tape.tanh(tape.matmul(x, w));
    NodeId out = tape.sum_all(tape.hadamard(h, h));
    const Matrix replayed = tape.replay(out);
    CHECK(replayed.equals(tape.value(out)));
}

TEST_CASE("backward accumulates across calls") {
    ParamStore params;
    params.create("w", scalar_matrix(2.0));
    Tape tape;
    NodeId w = tape.param(params, "w");
    NodeId y = tape.hadamard(w, w);
    params.zero_grads();
    tape.backward_scalar(y);
    tape.backward_scalar(y);
    CHECK(params.grad("w")(0, 0) == 8.0);  // 2 * dy/dw
}

TEST_CASE("parameter nodes are shared within a tape") {
    ParamStore params;
    params.create("w", scalar_matrix(1.5));
    Tape tape;
    NodeId a = tape.param(params, "w");
    NodeId b = tape.param(params, "w");
    CHECK(a == b);
}

TEST_CASE("finite_diff_check on simple losses") {
    ParamStore params;
    params.create("theta", scalar_matrix(3.0));
    auto quad = [&](bool with_grad) {
        Tape tape;
        NodeId t = tape.param(params, "theta");
        NodeId y = tape.hadamard(t, t);
        if (with_grad) tape.backward_scalar(y);
        return tape.scalar(y);
    };
    std::mt19937_64 rng(9);
    CHECK(finite_diff_check(quad, params, 1e-5, 5, rng) < 1e-8);

    ParamStore params2;
    params2.create("theta", scalar_matrix(0.0));
    auto th = [&](bool with_grad) {
        Tape tape;
        NodeId t = tape.param(params2, "theta");
        NodeId y = tape.tanh(t);
        if (with_grad) tape.backward_scalar(y);
        return tape.scalar(y);
    };
    CHECK(finite_diff_check(th, params2, 1e-5, 5, rng) < 1e-8);
}

TEST_CASE("backward rejects a seed of the wrong shape") {
    Tape tape;
    NodeId x = tape.leaf(Matrix(2, 2));
    NodeId y = tape.tanh(x);
    CHECK_THROWS_AS(tape.backward(y, Matrix(1, 2)), std::invalid_argument);
}

TEST_CASE("param store rejects duplicates and unknown names") {
    ParamStore params;
    params.create("a", Matrix(1, 1));
    CHECK_THROWS_AS(params.create("a", Matrix(1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(params.value("missing"), std::invalid_argument);
}
