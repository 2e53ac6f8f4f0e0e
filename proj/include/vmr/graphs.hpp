#pragma once

#include "vmr/matrix.hpp"

#include <string>
#include <vector>

namespace vmr {

// Family of binary adjacency matrices over the 2T concatenated timesteps,
// one 2T x 2T matrix per stride k. Immutable after construction.
struct AdjacencySet {
    int T = 0;
    std::vector<int> ks;
    std::vector<Matrix> matrices;  // one per k, in order

    int node_count() const { return 2 * T; }
    int graph_count() const { return (int)matrices.size(); }
};

// Band block: entry[i,j] = 1 iff |i-j| <= k. Boundary nodes simply have
// fewer neighbors.
Matrix build_intra_block(int T, int k);

// Stride block: entry[i,j] = 1 iff i == j (mod k). Same-timestep edge plus
// both sides with stride k, closed over the whole block.
Matrix build_inter_block(int T, int k);

// Block matrix [[intra, inter], [inter^T, intra]].
Matrix assemble_adjacency(int T, int k);

AdjacencySet build_adjacency_set(int T, const std::vector<int>& ks);

// Plain-text 0/1 grid, one row per line.
std::string dump_adjacency(const Matrix& a);

}  // namespace vmr
