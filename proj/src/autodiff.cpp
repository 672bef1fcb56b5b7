#include "enf/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

namespace enf::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data(), t.rows(), t.cols()); }
MutMap as_matrix(Tensor& t) { return MutMap(t.data(), t.rows(), t.cols()); }

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.value().shape() != b.value().shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.value().shape()) + " vs " +
                             shape_string(b.value().shape()));
    }
}

void require_same_tape(const Var& a, const Var& b) {
    if (&a.tape() != &b.tape()) throw Error("vars belong to different tapes");
}

template <class F>
Tensor map_values(const Tensor& in, F f) {
    Tensor out = in;
    for (auto& v : out.values()) v = f(v);
    return out;
}

}  // namespace

const Tensor& Var::value() const { return tape_->node(id_).value; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

double Var::item() const {
    const auto& v = value();
    if (v.size() != 1) throw DimensionError("item() on non-scalar " + shape_string(v.shape()));
    return v[0];
}

IndexList make_index(std::vector<std::size_t> idx) {
    return std::make_shared<const std::vector<std::size_t>>(std::move(idx));
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    require_matrix(value, "tape leaf");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Tensor value, const char* op, const std::vector<Var>& parents, BackwardFn backward) {
    const int id = static_cast<int>(nodes_.size());
    if (check_finite_ && !value.all_finite()) {
        throw NumericError(std::string("non-finite value produced by op '") + op + "' at node " + std::to_string(id));
    }
    Node n;
    n.value = std::move(value);
    n.op = op;
    bool any = false;
    if (recording_) {
        for (const auto& p : parents) any = any || p.requires_grad();
    }
    if (any) {
        n.requires_grad = true;
        n.parents.reserve(parents.size());
        for (const auto& p : parents) n.parents.push_back(p.id());
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var(this, id);
}

std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph) {
    Tape& tape = output.tape();
    if (output.value().size() != 1) {
        throw DimensionError("grad: output must be scalar, got " + shape_string(output.value().shape()));
    }
    const std::size_t n = static_cast<std::size_t>(output.id()) + 1;

    std::vector<char> needed(n, 0);
    for (const auto& w : wrt) {
        if (&w.tape() != &tape) throw Error("grad: wrt var from a different tape");
        if (static_cast<std::size_t>(w.id()) < n && w.requires_grad()) needed[static_cast<std::size_t>(w.id())] = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (needed[i]) continue;
        const auto& node = tape.node(static_cast<int>(i));
        for (int p : node.parents) {
            if (needed[static_cast<std::size_t>(p)]) {
                needed[i] = 1;
                break;
            }
        }
    }

    std::vector<int> acc(n, -1);
    NoRecordGuard guard(tape, create_graph);
    {
        const auto& shape = output.value().shape();
        acc[n - 1] = tape.constant(Tensor(shape, 1.0)).id();
    }

    for (std::size_t i = n; i-- > 0;) {
        if (acc[i] < 0 || !needed[i]) continue;
        // Copies: the tape grows while backward rules run.
        const auto& node = tape.node(static_cast<int>(i));
        if (!node.backward) continue;
        const std::vector<int> parent_ids = node.parents;
        const BackwardFn fn = node.backward;

        std::vector<Var> parents;
        std::vector<char> pneed;
        bool any = false;
        for (int p : parent_ids) {
            parents.emplace_back(&tape, p);
            pneed.push_back(needed[static_cast<std::size_t>(p)]);
            any = any || pneed.back();
        }
        if (!any) continue;

        std::vector<Var> grads = fn(Var(&tape, static_cast<int>(i)), Var(&tape, acc[i]), parents, pneed);
        for (std::size_t k = 0; k < parent_ids.size(); ++k) {
            if (!pneed[k] || !grads[k].valid()) continue;
            auto p = static_cast<std::size_t>(parent_ids[k]);
            if (acc[p] < 0) {
                acc[p] = grads[k].id();
            } else {
                acc[p] = add(Var(&tape, acc[p]), grads[k]).id();
            }
        }
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        auto id = static_cast<std::size_t>(w.id());
        if (id < n && acc[id] >= 0) {
            out.emplace_back(&tape, acc[id]);
        } else {
            out.push_back(tape.constant(Tensor(w.value().shape(), 0.0)));
        }
    }
    return out;
}

// --- primitives -------------------------------------------------------------

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
    require_same_tape(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const std::size_t m = ta ? A.cols() : A.rows();
    const std::size_t k = ta ? A.rows() : A.cols();
    const std::size_t kb = tb ? B.cols() : B.rows();
    const std::size_t n = tb ? B.rows() : B.cols();
    if (k != kb) {
        throw DimensionError("matmul: inner dimensions differ: " + shape_string(A.shape()) + (ta ? "^T" : "") + " x " +
                             shape_string(B.shape()) + (tb ? "^T" : ""));
    }
    a.tape().count_multiply_adds(static_cast<std::uint64_t>(m) * n * k);
    Tensor C = Tensor::matrix(m, n);
    auto cm = as_matrix(C);
    auto am = as_matrix(A);
    auto bm = as_matrix(B);
    if (!ta && !tb) cm.noalias() = am * bm;
    else if (ta && !tb) cm.noalias() = am.transpose() * bm;
    else if (!ta && tb) cm.noalias() = am * bm.transpose();
    else cm.noalias() = am.transpose() * bm.transpose();

    return a.tape().push(std::move(C), "matmul", {a, b},
                         [ta, tb](const Var&, const Var& g, const std::vector<Var>& p, const std::vector<char>& need) {
                             const Var& A = p[0];
                             const Var& B = p[1];
                             Var ga, gb;
                             if (!ta && !tb) {
                                 if (need[0]) ga = matmul(g, B, false, true);
                                 if (need[1]) gb = matmul(A, g, true, false);
                             } else if (ta && !tb) {
                                 if (need[0]) ga = matmul(B, g, false, true);
                                 if (need[1]) gb = matmul(A, g, false, false);
                             } else if (!ta && tb) {
                                 if (need[0]) ga = matmul(g, B, false, false);
                                 if (need[1]) gb = matmul(g, A, true, false);
                             } else {
                                 if (need[0]) ga = matmul(B, g, true, true);
                                 if (need[1]) gb = matmul(g, A, true, true);
                             }
                             return std::vector<Var>{ga, gb};
                         });
}

Var add(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    double* o = out.data();
    const double* y = b.value().data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) o[i] += y[i];
    return a.tape().push(std::move(out), "add", {a, b},
                         [](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{g, g};
                         });
}

Var sub(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    double* o = out.data();
    const double* y = b.value().data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) o[i] -= y[i];
    return a.tape().push(std::move(out), "sub", {a, b},
                         [](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>& need) {
                             return std::vector<Var>{g, need[1] ? neg(g) : Var()};
                         });
}

Var mul(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    double* o = out.data();
    const double* y = b.value().data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) o[i] *= y[i];
    return a.tape().push(std::move(out), "mul", {a, b},
                         [](const Var&, const Var& g, const std::vector<Var>& p, const std::vector<char>& need) {
                             return std::vector<Var>{need[0] ? mul(g, p[1]) : Var(), need[1] ? mul(g, p[0]) : Var()};
                         });
}

Var scale(const Var& a, double s) {
    Tensor out = map_values(a.value(), [s](double v) { return v * s; });
    return a.tape().push(std::move(out), "scale", {a},
                         [s](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{scale(g, s)};
                         });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var exp(const Var& a) {
    Tensor out = map_values(a.value(), [](double v) { return std::exp(v); });
    return a.tape().push(std::move(out), "exp", {a},
                         [](const Var& self, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{mul(g, self)};
                         });
}

Var sin(const Var& a) {
    Tensor out = map_values(a.value(), [](double v) { return std::sin(v); });
    return a.tape().push(std::move(out), "sin", {a},
                         [](const Var&, const Var& g, const std::vector<Var>& p, const std::vector<char>&) {
                             return std::vector<Var>{mul(g, cos(p[0]))};
                         });
}

Var cos(const Var& a) {
    Tensor out = map_values(a.value(), [](double v) { return std::cos(v); });
    return a.tape().push(std::move(out), "cos", {a},
                         [](const Var&, const Var& g, const std::vector<Var>& p, const std::vector<char>&) {
                             return std::vector<Var>{neg(mul(g, sin(p[0])))};
                         });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t r = a.rows();
    const std::size_t c = a.cols();
    return a.tape().push(Tensor::scalar(s), "sum", {a},
                         [r, c](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{broadcast_scalar(g, r, c)};
                         });
}

Var sq_norm(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v * v;
    return a.tape().push(Tensor::scalar(s), "sq_norm", {a},
                         [](const Var&, const Var& g, const std::vector<Var>& p, const std::vector<char>&) {
                             Var gb = broadcast_scalar(g, p[0].rows(), p[0].cols());
                             return std::vector<Var>{scale(mul(p[0], gb), 2.0)};
                         });
}

Var broadcast_scalar(const Var& s, std::size_t rows, std::size_t cols) {
    if (s.value().size() != 1) throw DimensionError("broadcast_scalar: input must be 1x1");
    Tensor out = Tensor::matrix(rows, cols, s.value()[0]);
    return s.tape().push(std::move(out), "broadcast_scalar", {s},
                         [](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{sum(g)};
                         });
}

Var gather_rows(const Var& a, const IndexList& idx) {
    const Tensor& av = a.value();
    const std::size_t cols = av.cols();
    const std::size_t src_rows = av.rows();
    if (idx->empty()) throw DimensionError("gather_rows: empty index");
    Tensor out = Tensor::matrix(idx->size(), cols);
    for (std::size_t i = 0; i < idx->size(); ++i) {
        const std::size_t r = (*idx)[i];
        if (r >= src_rows) throw DimensionError("gather_rows: index " + std::to_string(r) + " out of range");
        std::memcpy(out.data() + i * cols, av.data() + r * cols, cols * sizeof(double));
    }
    return a.tape().push(std::move(out), "gather_rows", {a},
                         [idx, src_rows](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{scatter_add_rows(g, idx, src_rows)};
                         });
}

Var scatter_add_rows(const Var& a, const IndexList& idx, std::size_t rows) {
    const Tensor& av = a.value();
    const std::size_t cols = av.cols();
    if (idx->size() != av.rows()) {
        throw DimensionError("scatter_add_rows: index length " + std::to_string(idx->size()) + " vs rows " +
                             std::to_string(av.rows()));
    }
    Tensor out = Tensor::matrix(rows, cols);
    for (std::size_t i = 0; i < idx->size(); ++i) {
        const std::size_t r = (*idx)[i];
        if (r >= rows) throw DimensionError("scatter_add_rows: index " + std::to_string(r) + " out of range");
        double* dst = out.data() + r * cols;
        const double* src = av.data() + i * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
    return a.tape().push(std::move(out), "scatter_add_rows", {a},
                         [idx](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{gather_rows(g, idx)};
                         });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t rows = parts[0].rows();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
        require_same_tape(parts[0], p);
        offsets.push_back(total);
        total += p.cols();
    }
    Tensor out = Tensor::matrix(rows, total);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = parts[k].value();
        const std::size_t c = pv.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            std::memcpy(out.data() + r * total + offsets[k], pv.data() + r * c, c * sizeof(double));
        }
    }
    return parts[0].tape().push(
        std::move(out), "concat_cols", parts,
        [offsets](const Var&, const Var& g, const std::vector<Var>& p, const std::vector<char>& need) {
            std::vector<Var> out(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) {
                if (need[k]) out[k] = slice_cols(g, offsets[k], offsets[k] + p[k].cols());
            }
            return out;
        });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
    const Tensor& av = a.value();
    const std::size_t cols = av.cols();
    if (begin >= end || end > cols) throw DimensionError("slice_cols: invalid range");
    const std::size_t w = end - begin;
    Tensor out = Tensor::matrix(av.rows(), w);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        std::memcpy(out.data() + r * w, av.data() + r * cols + begin, w * sizeof(double));
    }
    return a.tape().push(std::move(out), "slice_cols", {a},
                         [begin, cols](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{pad_cols(g, begin, cols)};
                         });
}

Var pad_cols(const Var& a, std::size_t begin, std::size_t total) {
    const Tensor& av = a.value();
    const std::size_t w = av.cols();
    if (begin + w > total) throw DimensionError("pad_cols: slice exceeds total width");
    Tensor out = Tensor::matrix(av.rows(), total);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        std::memcpy(out.data() + r * total + begin, av.data() + r * w, w * sizeof(double));
    }
    return a.tape().push(std::move(out), "pad_cols", {a},
                         [begin, w](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{slice_cols(g, begin, begin + w)};
                         });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
    const std::size_t r0 = a.rows();
    const std::size_t c0 = a.cols();
    Tensor out = a.value().reshaped(Shape{rows, cols});
    return a.tape().push(std::move(out), "reshape", {a},
                         [r0, c0](const Var&, const Var& g, const std::vector<Var>&, const std::vector<char>&) {
                             return std::vector<Var>{reshape(g, r0, c0)};
                         });
}

Var segment_softmax(const Var& a, std::size_t segment) {
    const Tensor& av = a.value();
    const std::size_t rows = av.rows();
    const std::size_t cols = av.cols();
    if (segment == 0 || rows % segment != 0) {
        throw DimensionError("segment_softmax: " + std::to_string(rows) + " rows not divisible into segments of " +
                             std::to_string(segment));
    }
    const std::size_t groups = rows / segment;
    Tensor out = Tensor::matrix(rows, cols);
    for (std::size_t gi = 0; gi < groups; ++gi) {
        for (std::size_t c = 0; c < cols; ++c) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < segment; ++s) mx = std::max(mx, av((gi * segment + s), c));
            double z = 0.0;
            for (std::size_t s = 0; s < segment; ++s) {
                const double e = std::exp(av(gi * segment + s, c) - mx);
                out(gi * segment + s, c) = e;
                z += e;
            }
            for (std::size_t s = 0; s < segment; ++s) out(gi * segment + s, c) /= z;
        }
    }
    return a.tape().push(std::move(out), "segment_softmax", {a},
                         [segment, groups](const Var& self, const Var& g, const std::vector<Var>&,
                                           const std::vector<char>&) {
                             std::vector<std::size_t> owner(groups * segment);
                             for (std::size_t r = 0; r < owner.size(); ++r) owner[r] = r / segment;
                             auto idx = make_index(std::move(owner));
                             Var gy = mul(g, self);
                             Var total = gather_rows(scatter_add_rows(gy, idx, groups), idx);
                             return std::vector<Var>{sub(gy, mul(self, total))};
                         });
}

Var softmax_rows(const Var& a) {
    const std::size_t r = a.rows();
    const std::size_t c = a.cols();
    return reshape(segment_softmax(reshape(a, r * c, 1), c), r, c);
}

// --- whole-function utilities -----------------------------------------------

namespace {

double evaluate_value(const ScalarFn& f, std::span<const NamedTensor> params) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.constant(p.value));
    Var out = f(tape, leaves);
    return out.item();
}

}  // namespace

ValueAndGrads evaluate_with_gradients(const ScalarFn& f, std::span<const NamedTensor> params) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p.value, true));
    Var out = f(tape, leaves);
    ValueAndGrads result;
    result.value = out.item();
    auto grads = grad(out, leaves, false);
    for (const auto& g : grads) result.grads.push_back(g.value());
    return result;
}

FdReport finite_difference_check(const ScalarFn& f, std::span<const NamedTensor> params, const FdOptions& options) {
    if (!(options.h > 0.0)) throw ConfigError("finite_difference_check: h must be positive");

    const ValueAndGrads analytic = evaluate_with_gradients(f, params);
    const double again = evaluate_value(f, params);
    if (std::memcmp(&again, &analytic.value, sizeof(double)) != 0) {
        throw CheckInvalid("finite_difference_check: function is not deterministic");
    }

    std::vector<NamedTensor> work(params.begin(), params.end());
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    FdReport report;
    for (std::size_t pi = 0; pi < work.size(); ++pi) {
        Tensor& theta = work[pi].value;
        const Tensor& g = analytic.grads[pi];
        FdParamReport pr;
        pr.name = work[pi].name;
        double max_abs_diff = 0.0;
        double max_abs_fd = 0.0;

        auto probe = [&](const std::vector<double>& dir) {
            const Tensor saved = theta;
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = saved[i] + options.h * dir[i];
            const double fp = evaluate_value(f, work);
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = saved[i] - options.h * dir[i];
            const double fm = evaluate_value(f, work);
            theta = saved;
            const double fd = (fp - fm) / (2.0 * options.h);
            double ad = 0.0;
            for (std::size_t i = 0; i < theta.size(); ++i) ad += g[i] * dir[i];
            max_abs_diff = std::max(max_abs_diff, std::abs(ad - fd));
            max_abs_fd = std::max(max_abs_fd, std::abs(fd));
            ++pr.probes;
        };

        if (theta.size() <= options.max_coordinates) {
            std::vector<double> dir(theta.size(), 0.0);
            for (std::size_t i = 0; i < theta.size(); ++i) {
                dir[i] = 1.0;
                probe(dir);
                dir[i] = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < options.directions; ++k) {
                std::vector<double> dir(theta.size());
                double norm = 0.0;
                for (auto& v : dir) {
                    v = normal(rng);
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                for (auto& v : dir) v /= norm;
                probe(dir);
            }
        }
        pr.max_rel_error = max_abs_diff / std::max(max_abs_fd, 1e-12);
        report.max_rel_error = std::max(report.max_rel_error, pr.max_rel_error);
        report.params.push_back(pr);
    }
    report.pass = report.max_rel_error <= options.tol;
    return report;
}

}  // namespace enf::ad
