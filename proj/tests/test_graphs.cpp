#include "vmr/graphs.hpp"
#include "vmr/rand.hpp"

#include <doctest.h>

#include <cstdlib>
#include <random>
#include <stdexcept>

using namespace vmr;

namespace {

// Checks every AdjacencySet invariant on one assembled matrix.
void check_adjacency_laws(const Matrix& a, int T, int k) {
    REQUIRE(a.rows() == 2 * T);
    REQUIRE(a.cols() == 2 * T);
    for (int i = 0; i < 2 * T; ++i)
        for (int j = 0; j < 2 * T; ++j) {
            const double v = a(i, j);
            REQUIRE((v == 0.0 || v == 1.0));
            REQUIRE(a(j, i) == v);  // symmetry, exact
        }
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
            // Band law on the query block, mirrored on the proposal block.
            const double want_intra = std::abs(i - j) <= k ? 1.0 : 0.0;
            REQUIRE(a(i, j) == want_intra);
            REQUIRE(a(T + i, T + j) == want_intra);
            // Stride law across the blocks.
            const double want_inter = (i % k) == (j % k) ? 1.0 : 0.0;
            REQUIRE(a(i, T + j) == want_inter);
        }
    for (int i = 0; i < 2 * T; ++i) REQUIRE(a(i, i) == 1.0);
    // Same-timestep edge.
    for (int i = 0; i < T; ++i) REQUIRE(a(i, T + i) == 1.0);
}

}  // namespace

TEST_CASE("intra block examples") {
    CHECK(build_intra_block(4, 1).equals(
        Matrix::from_rows({{1, 1, 0, 0}, {1, 1, 1, 0}, {0, 1, 1, 1}, {0, 0, 1, 1}})));
    CHECK(build_intra_block(3, 5).equals(Matrix::full(3, 3, 1.0)));

    const Matrix wide = build_intra_block(8, 3);
    for (int j = 0; j < 8; ++j) CHECK(wide(0, j) == (j <= 3 ? 1.0 : 0.0));
}

TEST_CASE("inter block examples") {
    CHECK(build_inter_block(5, 1).equals(Matrix::full(5, 5, 1.0)));
    CHECK(build_inter_block(4, 2).equals(
        Matrix::from_rows({{1, 0, 1, 0}, {0, 1, 0, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}})));

    const Matrix strided = build_inter_block(8, 3);
    for (int j = 0; j < 8; ++j)
        CHECK(strided(1, j) == ((j == 1 || j == 4 || j == 7) ? 1.0 : 0.0));
}

TEST_CASE("assembled adjacency") {
    CHECK(assemble_adjacency(1, 1).equals(Matrix::from_rows({{1, 1}, {1, 1}})));
    CHECK(assemble_adjacency(1, 3).equals(Matrix::from_rows({{1, 1}, {1, 1}})));

    const Matrix a = assemble_adjacency(4, 1);
    CHECK(a.equals(a.transpose()));
    CHECK(a.slice_rows(0, 4).slice_cols(0, 4).equals(build_intra_block(4, 1)));
    CHECK(a.slice_rows(0, 4).slice_cols(4, 8).equals(Matrix::full(4, 4, 1.0)));
    check_adjacency_laws(a, 4, 1);
}

TEST_CASE("parameter errors") {
    CHECK_THROWS_AS(build_intra_block(4, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_inter_block(4, -1), std::invalid_argument);
    CHECK_THROWS_AS(build_adjacency_set(4, {}), std::invalid_argument);
}

TEST_CASE("adjacency set at paper scale") {
    const AdjacencySet set = build_adjacency_set(40, {1, 2, 3});
    REQUIRE(set.graph_count() == 3);
    for (const auto& m : set.matrices) {
        CHECK(m.rows() == 80);
        CHECK(m.cols() == 80);
    }
    CHECK(build_adjacency_set(5, {1}).graph_count() == 1);
}

TEST_CASE("adjacency invariants over random T and k") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const int T = (int)uniform_int(rng, 2, 64);
        std::vector<int> ks;
        for (int k = 1; k <= 5; ++k)
            if (uniform01(rng) < 0.5) ks.push_back(k);
        if (ks.empty()) ks.push_back((int)uniform_int(rng, 1, 5));
        const AdjacencySet set = build_adjacency_set(T, ks);
        for (size_t i = 0; i < ks.size(); ++i) check_adjacency_laws(set.matrices[i], T, ks[i]);
    }
}

TEST_CASE("edge nesting between strides") {
    const int T = 12;
    const Matrix a1 = assemble_adjacency(T, 1);
    for (int k = 1; k <= 5; ++k) {
        const Matrix ak = assemble_adjacency(T, k);
        for (int i = 0; i < T; ++i)
            for (int j = 0; j < T; ++j) {
                // Intra edges of k=1 are a subset of any wider band.
                if (a1(i, j) == 1.0) CHECK(ak(i, j) == 1.0);
                // Inter edges of stride k are a subset of the k=1 edges.
                if (ak(i, T + j) == 1.0) CHECK(a1(i, T + j) == 1.0);
            }
    }
}

TEST_CASE("debug dump is a 0/1 grid") {
    CHECK(dump_adjacency(assemble_adjacency(1, 1)) == "11\n11\n");
    CHECK(dump_adjacency(build_intra_block(3, 1)) == "110\n111\n011\n");
}
