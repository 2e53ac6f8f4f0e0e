#include "vmr/graphs.hpp"

#include <cstdlib>
#include <stdexcept>

namespace vmr {

static void check_args(int T, int k) {
    if (T < 1) throw std::invalid_argument("adjacency: T must be >= 1, got " + std::to_string(T));
    if (k < 1) throw std::invalid_argument("adjacency: stride k must be >= 1, got " + std::to_string(k));
}

Matrix build_intra_block(int T, int k) {
    check_args(T, k);
    Matrix a(T, T);
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j)
            if (std::abs(i - j) <= k) a(i, j) = 1.0;
    return a;
}

Matrix build_inter_block(int T, int k) {
    check_args(T, k);
    Matrix a(T, T);
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j)
            if ((i - j) % k == 0) a(i, j) = 1.0;
    return a;
}

Matrix assemble_adjacency(int T, int k) {
    const Matrix intra = build_intra_block(T, k);
    const Matrix inter = build_inter_block(T, k);
    Matrix a(2 * T, 2 * T);
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
            a(i, j) = intra(i, j);
            a(T + i, T + j) = intra(i, j);
            a(i, T + j) = inter(i, j);
            a(T + j, i) = inter(i, j);  // transpose of the inter block
        }
    return a;
}

AdjacencySet build_adjacency_set(int T, const std::vector<int>& ks) {
    if (ks.empty()) throw std::invalid_argument("adjacency: stride list must be non-empty");
    AdjacencySet set;
    set.T = T;
    set.ks = ks;
    set.matrices.reserve(ks.size());
    for (int k : ks) set.matrices.push_back(assemble_adjacency(T, k));
    return set;
}

std::string dump_adjacency(const Matrix& a) {
    std::string out;
    out.reserve((size_t)a.rows() * (a.cols() + 1));
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) out += a(i, j) != 0.0 ? '1' : '0';
        out += '\n';
    }
    return out;
}

}  // namespace vmr
