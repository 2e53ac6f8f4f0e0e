#pragma once

#include "vmr/matrix.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace vmr {

// Named parameter store: every trainable matrix plus the batch-norm
// running statistics live here, each with a same-shaped gradient slot.
class ParamStore {
public:
    struct Entry {
        Matrix value;
        Matrix grad;
        bool trainable = true;
    };

    Matrix& create(const std::string& name, Matrix value, bool trainable = true);
    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Matrix& value(const std::string& name);
    const Matrix& value(const std::string& name) const;
    Matrix& grad(const std::string& name);
    bool trainable(const std::string& name) const;

    void zero_grads();
    size_t size() const { return entries_.size(); }

    // Name-ordered iteration keeps every consumer deterministic.
    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::map<std::string, Entry>& entries() { return entries_; }

    // Total number of scalar entries across trainable parameters.
    long trainable_scalar_count() const;

private:
    std::map<std::string, Entry> entries_;
};

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Tanh,
    Sigmoid,
    Relu,
    Abs,
    Add,
    Sub,
    Hadamard,
    ScaleConst,
    AddConst,
    AddRowVec,
    ConcatRows,
    ConcatCols,
    SliceRows,
    SliceCols,
    MeanRows,
    SumAll,
    SumSq,
    BnTrain,
    BnEval,
};

// Recorded forward pass. Nodes are appended in evaluation order, so the
// record is topological by construction; backward walks it in reverse.
class Tape {
public:
    struct Record {
        Op op = Op::Leaf;
        NodeId out = -1;
        std::vector<NodeId> in;
        double c0 = 0.0, c1 = 0.0;  // op constants (scale, eps, ...)
        Matrix cache0, cache1;      // cached intermediates for backward
    };

    // Leaves -------------------------------------------------------------
    NodeId leaf(Matrix value);
    // Parameter leaf; one node per (store, name) pair per tape, so batch
    // members share it and gradients accumulate.
    NodeId param(ParamStore& store, const std::string& name);

    // Primitive operations -----------------------------------------------
    NodeId matmul(NodeId a, NodeId b);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId relu(NodeId a);
    NodeId abs(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_const(NodeId a, double c);
    NodeId add_row_vec(NodeId a, NodeId v);  // v is 1 x cols, added to every row
    NodeId concat_rows(const std::vector<NodeId>& parts);
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId slice_rows(NodeId a, int r0, int r1);
    NodeId slice_cols(NodeId a, int c0, int c1);
    NodeId mean_over_rows(NodeId a);
    NodeId sum_all(NodeId a);
    NodeId sum_sq(NodeId a);
    // Batch norm over the row dimension, per column. Training mode uses
    // batch statistics; when update_running is set the running stats in
    // the store are refreshed as a side effect of recording.
    NodeId batch_norm_train(NodeId x, NodeId gamma, NodeId beta, ParamStore& store,
                            const std::string& run_mean_name, const std::string& run_var_name,
                            double eps, double momentum, bool update_running);
    NodeId batch_norm_eval(NodeId x, NodeId gamma, NodeId beta, const Matrix& run_mean,
                           const Matrix& run_var, double eps);

    const Matrix& value(NodeId id) const { return values_[id]; }
    double scalar(NodeId id) const;
    size_t node_count() const { return values_.size(); }
    size_t op_count() const { return records_.size(); }

    // Reverse-mode sweep: seeds the output node and accumulates
    // d(sum(seed . out))/d(param) into every parameter's gradient slot.
    // Leaf adjoints stay available through leaf_grad() until the next
    // backward call.
    void backward(NodeId output, const Matrix& seed);
    void backward_scalar(NodeId output, double seed = 1.0);
    const Matrix& leaf_grad(NodeId id) const { return grads_[id]; }

    // Recomputes every node from the leaves; returns the recomputed value
    // of `output`. Used to assert the record replays bit-for-bit.
    Matrix replay(NodeId output) const;

private:
    NodeId push(Record rec, Matrix value);
    std::vector<Matrix> values_;
    std::vector<Matrix> grads_;
    std::vector<Record> records_;
    std::vector<std::pair<ParamStore*, std::string>> param_bindings_;  // per node; name empty if none
    std::map<std::pair<const ParamStore*, std::string>, NodeId> param_nodes_;
};

// Central-difference gradient checker. loss_fn(compute_grad) evaluates the
// loss; when compute_grad is set it must also leave gradients accumulated
// in `params` (grads are zeroed here first). Returns the max relative
// error over `samples` randomly chosen trainable scalars, with
// denominator max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::function<double(bool)>& loss_fn, ParamStore& params,
                         double eps, int samples, std::mt19937_64& rng);

}  // namespace vmr
