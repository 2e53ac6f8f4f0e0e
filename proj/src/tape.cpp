#include "vmr/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace vmr {

// --------------------------------------------------------------------------
// ParamStore

Matrix& ParamStore::create(const std::string& name, Matrix value, bool trainable) {
    if (entries_.count(name))
        throw std::invalid_argument("ParamStore: duplicate parameter name '" + name + "'");
    Entry e;
    e.grad = Matrix(value.rows(), value.cols());
    e.value = std::move(value);
    e.trainable = trainable;
    return entries_.emplace(name, std::move(e)).first->second.value;
}

Matrix& ParamStore::value(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
    return it->second.value;
}

const Matrix& ParamStore::value(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
    return it->second.value;
}

Matrix& ParamStore::grad(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
    return it->second.grad;
}

bool ParamStore::trainable(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
    return it->second.trainable;
}

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_) e.grad.setZero();
}

long ParamStore::trainable_scalar_count() const {
    long n = 0;
    for (const auto& [name, e] : entries_)
        if (e.trainable) n += (long)e.value.size();
    return n;
}

// --------------------------------------------------------------------------
// Tape

namespace {

// Single forward implementation for every primitive; also used by replay()
// so a replayed record reproduces values bit-for-bit.
Matrix forward_eval(const Tape::Record& rec, const std::vector<Matrix>& vals) {
    auto in = [&](int i) -> const Matrix& { return vals[rec.in[i]]; };
    switch (rec.op) {
        case Op::Leaf:
            throw std::logic_error("forward_eval on leaf");
        case Op::MatMul: {
            Matrix out;
            kernels::matmul(out, in(0), in(1));
            return out;
        }
        case Op::Tanh: {
            Matrix out;
            kernels::tanh_map(out, in(0));
            return out;
        }
        case Op::Sigmoid: {
            Matrix out;
            kernels::sigmoid_map(out, in(0));
            return out;
        }
        case Op::Relu: {
            const Matrix& x = in(0);
            Matrix out(x.rows(), x.cols());
            for (size_t i = 0; i < x.size(); ++i)
                out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
            return out;
        }
        case Op::Abs: {
            const Matrix& x = in(0);
            Matrix out(x.rows(), x.cols());
            for (size_t i = 0; i < x.size(); ++i) out.data()[i] = std::fabs(x.data()[i]);
            return out;
        }
        case Op::Add: {
            Matrix out;
            kernels::add(out, in(0), in(1));
            return out;
        }
        case Op::Sub: {
            Matrix out;
            kernels::sub(out, in(0), in(1));
            return out;
        }
        case Op::Hadamard: {
            Matrix out;
            kernels::hadamard(out, in(0), in(1));
            return out;
        }
        case Op::ScaleConst: {
            const Matrix& x = in(0);
            Matrix out(x.rows(), x.cols());
            for (size_t i = 0; i < x.size(); ++i) out.data()[i] = rec.c0 * x.data()[i];
            return out;
        }
        case Op::AddConst: {
            const Matrix& x = in(0);
            Matrix out(x.rows(), x.cols());
            for (size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] + rec.c0;
            return out;
        }
        case Op::AddRowVec: {
            const Matrix& x = in(0);
            const Matrix& v = in(1);
            Matrix out(x.rows(), x.cols());
            for (int i = 0; i < x.rows(); ++i)
                for (int j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) + v(0, j);
            return out;
        }
        case Op::ConcatRows: {
            int rows = 0, cols = vals[rec.in[0]].cols();
            for (NodeId id : rec.in) rows += vals[id].rows();
            Matrix out(rows, cols);
            int r = 0;
            for (NodeId id : rec.in) {
                const Matrix& p = vals[id];
                std::copy(p.data(), p.data() + p.size(), out.row(r));
                r += p.rows();
            }
            return out;
        }
        case Op::ConcatCols: {
            int rows = vals[rec.in[0]].rows(), cols = 0;
            for (NodeId id : rec.in) cols += vals[id].cols();
            Matrix out(rows, cols);
            int c = 0;
            for (NodeId id : rec.in) {
                const Matrix& p = vals[id];
                for (int i = 0; i < rows; ++i)
                    std::copy(p.row(i), p.row(i) + p.cols(), out.row(i) + c);
                c += p.cols();
            }
            return out;
        }
        case Op::SliceRows:
            return in(0).slice_rows((int)rec.c0, (int)rec.c1);
        case Op::SliceCols:
            return in(0).slice_cols((int)rec.c0, (int)rec.c1);
        case Op::MeanRows: {
            const Matrix& x = in(0);
            if (x.rows() < 1) throw std::invalid_argument("mean_over_rows: empty matrix");
            Matrix out(1, x.cols());
            for (int i = 0; i < x.rows(); ++i)
                for (int j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
            for (int j = 0; j < x.cols(); ++j) out(0, j) /= x.rows();
            return out;
        }
        case Op::SumAll: {
            const Matrix& x = in(0);
            double s = 0.0;
            for (size_t i = 0; i < x.size(); ++i) s += x.data()[i];
            Matrix out(1, 1);
            out(0, 0) = s;
            return out;
        }
        case Op::SumSq: {
            const Matrix& x = in(0);
            double s = 0.0;
            for (size_t i = 0; i < x.size(); ++i) s += x.data()[i] * x.data()[i];
            Matrix out(1, 1);
            out(0, 0) = s;
            return out;
        }
        case Op::BnTrain: {
            const Matrix& x = in(0);
            const Matrix& gamma = in(1);
            const Matrix& beta = in(2);
            const int n = x.rows(), d = x.cols();
            Matrix out(n, d);
            for (int j = 0; j < d; ++j) {
                double mu = 0.0;
                for (int i = 0; i < n; ++i) mu += x(i, j);
                mu /= n;
                double var = 0.0;
                for (int i = 0; i < n; ++i) {
                    double dx = x(i, j) - mu;
                    var += dx * dx;
                }
                var /= n;
                double inv_std = 1.0 / std::sqrt(var + rec.c0);
                for (int i = 0; i < n; ++i)
                    out(i, j) = gamma(0, j) * ((x(i, j) - mu) * inv_std) + beta(0, j);
            }
            return out;
        }
        case Op::BnEval: {
            const Matrix& x = in(0);
            const Matrix& gamma = in(1);
            const Matrix& beta = in(2);
            const Matrix& rm = rec.cache0;  // running mean/var frozen into the record
            const Matrix& rv = rec.cache1;
            Matrix out(x.rows(), x.cols());
            for (int j = 0; j < x.cols(); ++j) {
                double inv_std = 1.0 / std::sqrt(rv(0, j) + rec.c0);
                for (int i = 0; i < x.rows(); ++i)
                    out(i, j) = gamma(0, j) * ((x(i, j) - rm(0, j)) * inv_std) + beta(0, j);
            }
            return out;
        }
    }
    throw std::logic_error("forward_eval: unknown op");
}

void accumulate(Matrix& dst, const Matrix& src) {
    if (dst.empty()) {
        dst = src;
        return;
    }
    for (size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

}  // namespace

NodeId Tape::push(Record rec, Matrix value) {
    NodeId id = (NodeId)values_.size();
    rec.out = id;
    for (NodeId i : rec.in)
        if (i < 0 || i >= id) throw std::logic_error("tape: input id out of order");
    values_.push_back(std::move(value));
    records_.push_back(std::move(rec));
    param_bindings_.emplace_back(nullptr, std::string());
    return id;
}

NodeId Tape::leaf(Matrix value) {
    Record r;
    r.op = Op::Leaf;
    return push(std::move(r), std::move(value));
}

NodeId Tape::param(ParamStore& store, const std::string& name) {
    auto key = std::make_pair((const ParamStore*)&store, name);
    auto it = param_nodes_.find(key);
    if (it != param_nodes_.end()) return it->second;
    NodeId id = leaf(store.value(name));
    param_bindings_[id] = {&store, name};
    param_nodes_.emplace(key, id);
    return id;
}

#define VMR_UNARY(method, optag)                       \
    NodeId Tape::method(NodeId a) {                    \
        Record r;                                      \
        r.op = optag;                                  \
        r.in = {a};                                    \
        Matrix v = forward_eval(r, values_);           \
        return push(std::move(r), std::move(v));       \
    }

VMR_UNARY(tanh, Op::Tanh)
VMR_UNARY(sigmoid, Op::Sigmoid)
VMR_UNARY(relu, Op::Relu)
VMR_UNARY(abs, Op::Abs)
VMR_UNARY(mean_over_rows, Op::MeanRows)
VMR_UNARY(sum_all, Op::SumAll)
VMR_UNARY(sum_sq, Op::SumSq)
#undef VMR_UNARY

#define VMR_BINARY(method, optag)                      \
    NodeId Tape::method(NodeId a, NodeId b) {          \
        Record r;                                      \
        r.op = optag;                                  \
        r.in = {a, b};                                 \
        Matrix v = forward_eval(r, values_);           \
        return push(std::move(r), std::move(v));       \
    }

VMR_BINARY(matmul, Op::MatMul)
VMR_BINARY(add, Op::Add)
VMR_BINARY(sub, Op::Sub)
VMR_BINARY(hadamard, Op::Hadamard)
VMR_BINARY(add_row_vec, Op::AddRowVec)
#undef VMR_BINARY

NodeId Tape::scale(NodeId a, double c) {
    Record r;
    r.op = Op::ScaleConst;
    r.in = {a};
    r.c0 = c;
    Matrix v = forward_eval(r, values_);
    return push(std::move(r), std::move(v));
}

NodeId Tape::add_const(NodeId a, double c) {
    Record r;
    r.op = Op::AddConst;
    r.in = {a};
    r.c0 = c;
    Matrix v = forward_eval(r, values_);
    return push(std::move(r), std::move(v));
}

NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    for (NodeId id : parts)
        check_shape(values_[id].cols() == values_[parts[0]].cols(), "concat rows",
                    values_[parts[0]], values_[id]);
    Record r;
    r.op = Op::ConcatRows;
    r.in = parts;
    Matrix v = forward_eval(r, values_);
    return push(std::move(r), std::move(v));
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    for (NodeId id : parts)
        check_shape(values_[id].rows() == values_[parts[0]].rows(), "concat cols",
                    values_[parts[0]], values_[id]);
    Record r;
    r.op = Op::ConcatCols;
    r.in = parts;
    Matrix v = forward_eval(r, values_);
    return push(std::move(r), std::move(v));
}

NodeId Tape::slice_rows(NodeId a, int r0, int r1) {
    Record r;
    r.op = Op::SliceRows;
    r.in = {a};
    r.c0 = r0;
    r.c1 = r1;
    Matrix v = forward_eval(r, values_);
    return push(std::move(r), std::move(v));
}

NodeId Tape::slice_cols(NodeId a, int c0, int c1) {
    Record r;
    r.op = Op::SliceCols;
    r.in = {a};
    r.c0 = c0;
    r.c1 = c1;
    Matrix v = forward_eval(r, values_);
    return push(std::move(r), std::move(v));
}

NodeId Tape::batch_norm_train(NodeId x, NodeId gamma, NodeId beta, ParamStore& store,
                              const std::string& run_mean_name, const std::string& run_var_name,
                              double eps, double momentum, bool update_running) {
    Record r;
    r.op = Op::BnTrain;
    r.in = {x, gamma, beta};
    r.c0 = eps;
    Matrix v = forward_eval(r, values_);

    // Cache normalized input and inverse std for backward.
    const Matrix& xm = values_[x];
    const int n = xm.rows(), d = xm.cols();
    Matrix xhat(n, d), inv_std(1, d);
    Matrix mu(1, d), var(1, d);
    for (int j = 0; j < d; ++j) {
        double m = 0.0;
        for (int i = 0; i < n; ++i) m += xm(i, j);
        m /= n;
        double vv = 0.0;
        for (int i = 0; i < n; ++i) {
            double dx = xm(i, j) - m;
            vv += dx * dx;
        }
        vv /= n;
        mu(0, j) = m;
        var(0, j) = vv;
        inv_std(0, j) = 1.0 / std::sqrt(vv + eps);
        for (int i = 0; i < n; ++i) xhat(i, j) = (xm(i, j) - m) * inv_std(0, j);
    }
    if (update_running) {
        Matrix& rm = store.value(run_mean_name);
        Matrix& rv = store.value(run_var_name);
        const double unbias = n > 1 ? (double)n / (n - 1) : 1.0;
        for (int j = 0; j < d; ++j) {
            rm(0, j) = (1.0 - momentum) * rm(0, j) + momentum * mu(0, j);
            rv(0, j) = (1.0 - momentum) * rv(0, j) + momentum * var(0, j) * unbias;
        }
    }
    r.cache0 = std::move(xhat);
    r.cache1 = std::move(inv_std);
    return push(std::move(r), std::move(v));
}

NodeId Tape::batch_norm_eval(NodeId x, NodeId gamma, NodeId beta, const Matrix& run_mean,
                             const Matrix& run_var, double eps) {
    Record r;
    r.op = Op::BnEval;
    r.in = {x, gamma, beta};
    r.c0 = eps;
    r.cache0 = run_mean;
    r.cache1 = run_var;
    Matrix v = forward_eval(r, values_);
    return push(std::move(r), std::move(v));
}

double Tape::scalar(NodeId id) const {
    const Matrix& m = values_[id];
    if (m.rows() != 1 || m.cols() != 1)
        throw std::logic_error("scalar() on non-1x1 node " + m.shape_str());
    return m(0, 0);
}

void Tape::backward(NodeId output, const Matrix& seed) {
    const Matrix& out = values_[output];
    if (!seed.same_shape(out))
        throw std::invalid_argument("backward: seed shape " + seed.shape_str() +
                                    " does not match output " + out.shape_str());
    grads_.assign(values_.size(), Matrix());
    grads_[output] = seed;

    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        const Record& rec = *it;
        if (rec.op == Op::Leaf) continue;
        const Matrix& g = grads_[rec.out];
        if (g.empty()) continue;  // no adjoint reached this node
        auto gin = [&](int i) -> Matrix& { return grads_[rec.in[i]]; };
        auto vin = [&](int i) -> const Matrix& { return values_[rec.in[i]]; };
        auto ensure = [&](int i) {
            Matrix& gm = gin(i);
            if (gm.empty()) gm = Matrix(vin(i).rows(), vin(i).cols());
        };
        switch (rec.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                const Matrix& a = vin(0);
                const Matrix& b = vin(1);
                ensure(0);
                ensure(1);
                Matrix& da = gin(0);
                Matrix& db = gin(1);
                // da += g . b^T ; db += a^T . g
                for (int i = 0; i < a.rows(); ++i)
                    for (int p = 0; p < b.rows(); ++p) {
                        double s = 0.0;
                        const double* gi = g.row(i);
                        const double* bp = b.row(p);
                        for (int j = 0; j < b.cols(); ++j) s += gi[j] * bp[j];
                        da(i, p) += s;
                    }
                for (int i = 0; i < a.rows(); ++i) {
                    const double* gi = g.row(i);
                    const double* ai = a.row(i);
                    for (int p = 0; p < a.cols(); ++p) {
                        double* dbp = db.row(p);
                        const double aip = ai[p];
                        for (int j = 0; j < b.cols(); ++j) dbp[j] += aip * gi[j];
                    }
                }
                break;
            }
            case Op::Tanh: {
                ensure(0);
                const Matrix& y = values_[rec.out];
                Matrix& dx = gin(0);
                for (size_t i = 0; i < y.size(); ++i)
                    dx.data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
                break;
            }
            case Op::Sigmoid: {
                ensure(0);
                const Matrix& y = values_[rec.out];
                Matrix& dx = gin(0);
                for (size_t i = 0; i < y.size(); ++i)
                    dx.data()[i] += g.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
                break;
            }
            case Op::Relu: {
                ensure(0);
                const Matrix& x = vin(0);
                Matrix& dx = gin(0);
                // subgradient 0 at the kink
                for (size_t i = 0; i < x.size(); ++i)
                    if (x.data()[i] > 0.0) dx.data()[i] += g.data()[i];
                break;
            }
            case Op::Abs: {
                ensure(0);
                const Matrix& x = vin(0);
                Matrix& dx = gin(0);
                for (size_t i = 0; i < x.size(); ++i) {
                    if (x.data()[i] > 0.0)
                        dx.data()[i] += g.data()[i];
                    else if (x.data()[i] < 0.0)
                        dx.data()[i] -= g.data()[i];
                }
                break;
            }
            case Op::Add:
                ensure(0);
                ensure(1);
                accumulate(gin(0), g);
                accumulate(gin(1), g);
                break;
            case Op::Sub: {
                ensure(0);
                ensure(1);
                accumulate(gin(0), g);
                Matrix& db = gin(1);
                for (size_t i = 0; i < g.size(); ++i) db.data()[i] -= g.data()[i];
                break;
            }
            case Op::Hadamard: {
                ensure(0);
                ensure(1);
                const Matrix& a = vin(0);
                const Matrix& b = vin(1);
                Matrix& da = gin(0);
                for (size_t i = 0; i < g.size(); ++i) da.data()[i] += g.data()[i] * b.data()[i];
                Matrix& db = gin(1);
                for (size_t i = 0; i < g.size(); ++i) db.data()[i] += g.data()[i] * a.data()[i];
                break;
            }
            case Op::ScaleConst: {
                ensure(0);
                Matrix& dx = gin(0);
                for (size_t i = 0; i < g.size(); ++i) dx.data()[i] += rec.c0 * g.data()[i];
                break;
            }
            case Op::AddConst:
                ensure(0);
                accumulate(gin(0), g);
                break;
            case Op::AddRowVec: {
                ensure(0);
                ensure(1);
                accumulate(gin(0), g);
                Matrix& dv = gin(1);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) dv(0, j) += g(i, j);
                break;
            }
            case Op::ConcatRows: {
                int r = 0;
                for (size_t k = 0; k < rec.in.size(); ++k) {
                    ensure((int)k);
                    Matrix& dp = gin((int)k);
                    const int pr = dp.rows();
                    for (int i = 0; i < pr; ++i)
                        for (int j = 0; j < g.cols(); ++j) dp(i, j) += g(r + i, j);
                    r += pr;
                }
                break;
            }
            case Op::ConcatCols: {
                int c = 0;
                for (size_t k = 0; k < rec.in.size(); ++k) {
                    ensure((int)k);
                    Matrix& dp = gin((int)k);
                    const int pc = dp.cols();
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < pc; ++j) dp(i, j) += g(i, c + j);
                    c += pc;
                }
                break;
            }
            case Op::SliceRows: {
                ensure(0);
                Matrix& dx = gin(0);
                const int r0 = (int)rec.c0;
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) dx(r0 + i, j) += g(i, j);
                break;
            }
            case Op::SliceCols: {
                ensure(0);
                Matrix& dx = gin(0);
                const int c0 = (int)rec.c0;
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) dx(i, c0 + j) += g(i, j);
                break;
            }
            case Op::MeanRows: {
                ensure(0);
                Matrix& dx = gin(0);
                const double inv = 1.0 / dx.rows();
                for (int i = 0; i < dx.rows(); ++i)
                    for (int j = 0; j < dx.cols(); ++j) dx(i, j) += g(0, j) * inv;
                break;
            }
            case Op::SumAll: {
                ensure(0);
                Matrix& dx = gin(0);
                const double s = g(0, 0);
                for (size_t i = 0; i < dx.size(); ++i) dx.data()[i] += s;
                break;
            }
            case Op::SumSq: {
                ensure(0);
                const Matrix& x = vin(0);
                Matrix& dx = gin(0);
                const double s = 2.0 * g(0, 0);
                for (size_t i = 0; i < x.size(); ++i) dx.data()[i] += s * x.data()[i];
                break;
            }
            case Op::BnTrain: {
                ensure(0);
                ensure(1);
                ensure(2);
                const Matrix& xhat = rec.cache0;
                const Matrix& inv_std = rec.cache1;
                const Matrix& gamma = vin(1);
                Matrix& dx = gin(0);
                Matrix& dgamma = gin(1);
                Matrix& dbeta = gin(2);
                const int n = xhat.rows(), d = xhat.cols();
                for (int j = 0; j < d; ++j) {
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (int i = 0; i < n; ++i) {
                        sum_g += g(i, j);
                        sum_gx += g(i, j) * xhat(i, j);
                    }
                    dbeta(0, j) += sum_g;
                    dgamma(0, j) += sum_gx;
                    const double mg = sum_g / n, mgx = sum_gx / n;
                    const double a = gamma(0, j) * inv_std(0, j);
                    for (int i = 0; i < n; ++i)
                        dx(i, j) += a * (g(i, j) - mg - xhat(i, j) * mgx);
                }
                break;
            }
            case Op::BnEval: {
                ensure(0);
                ensure(1);
                ensure(2);
                const Matrix& x = vin(0);
                const Matrix& gamma = vin(1);
                const Matrix& rm = rec.cache0;
                const Matrix& rv = rec.cache1;
                Matrix& dx = gin(0);
                Matrix& dgamma = gin(1);
                Matrix& dbeta = gin(2);
                for (int j = 0; j < x.cols(); ++j) {
                    const double inv_std = 1.0 / std::sqrt(rv(0, j) + rec.c0);
                    for (int i = 0; i < x.rows(); ++i) {
                        dx(i, j) += g(i, j) * gamma(0, j) * inv_std;
                        dgamma(0, j) += g(i, j) * (x(i, j) - rm(0, j)) * inv_std;
                        dbeta(0, j) += g(i, j);
                    }
                }
                break;
            }
        }
    }

    // Flush leaf adjoints bound to parameters into the store.
    for (size_t id = 0; id < param_bindings_.size(); ++id) {
        auto& [store, name] = param_bindings_[id];
        if (!store || grads_[id].empty()) continue;
        accumulate(store->grad(name), grads_[id]);
    }
}

void Tape::backward_scalar(NodeId output, double seed) {
    Matrix s(1, 1);
    s(0, 0) = seed;
    backward(output, s);
}

Matrix Tape::replay(NodeId output) const {
    std::vector<Matrix> vals(values_.size());
    for (size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].op == Op::Leaf)
            vals[i] = values_[i];
        else
            vals[i] = forward_eval(records_[i], vals);
    }
    return vals[output];
}

// --------------------------------------------------------------------------
// Finite differences

double finite_diff_check(const std::function<double(bool)>& loss_fn, ParamStore& params,
                         double eps, int samples, std::mt19937_64& rng) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be positive");
    params.zero_grads();
    loss_fn(true);

    std::map<std::string, Matrix> analytic;
    std::vector<std::pair<std::string, long>> slots;
    for (const auto& [name, e] : params.entries()) {
        if (!e.trainable || e.value.size() == 0) continue;
        analytic.emplace(name, e.grad);
        slots.emplace_back(name, (long)e.value.size());
    }
    if (slots.empty()) throw std::invalid_argument("finite_diff_check: no trainable parameters");

    long total = 0;
    for (auto& [n, c] : slots) total += c;

    double max_rel = 0.0;
    for (int s = 0; s < samples; ++s) {
        long pick = (long)(rng() % (unsigned long)total);
        size_t slot = 0;
        while (pick >= slots[slot].second) pick -= slots[slot++].second;
        Matrix& value = params.value(slots[slot].first);
        double* entry = value.data() + pick;

        const double orig = *entry;
        *entry = orig + eps;
        const double lp = loss_fn(false);
        *entry = orig - eps;
        const double lm = loss_fn(false);
        *entry = orig;

        const double numeric = (lp - lm) / (2.0 * eps);
        const double exact = analytic.at(slots[slot].first).data()[pick];
        const double denom = std::max({std::fabs(exact), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(exact - numeric) / denom);
    }
    return max_rel;
}

}  // namespace vmr
