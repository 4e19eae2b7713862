#include "apollo/autodiff.hpp"

#include "apollo/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace apollo::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMap(t.values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(std::vector<double>& v, std::size_t rows, std::size_t cols) {
    return MutMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_tape(Var a, Var b) {
    if (!a || !b || a.tape() != b.tape()) throw InvalidArgument("operands recorded on different tapes");
}

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw ShapeError(std::string(what) + " expects a matrix, got " + shape_string(t.shape));
}

void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

} // namespace

// ---- tape -----------------------------------------------------------------

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
    if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var(this, it->second);
    nodes_.push_back(Node{param.value, {}, {}, &param, record_});
    param_nodes_.emplace(&param, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& param) {
    if (record_) throw InvalidArgument("read-only parameter '" + param.name + "' on a recording tape");
    if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var(this, it->second);
    nodes_.push_back(Node{param.value, {}, {}, nullptr, false});
    param_nodes_.emplace(&param, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
    bool needs = false;
    if (record_) {
        for (Var in : inputs) {
            if (in.tape() != this) throw InvalidArgument("input recorded on a different tape");
            needs = needs || nodes_[in.id()].needs_grad;
        }
    }
    Node node{std::move(value), {}, {}, nullptr, needs};
    if (needs) node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw InvalidArgument("loss recorded on a different tape");
    if (!record_) throw InvalidArgument("backward on a tape created without recording");
    if (value(loss).size() != 1)
        throw ShapeError("backward needs a scalar loss, got " + shape_string(value(loss).shape));
    grad_buffer(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty() || !n.backward) continue;
        n.backward(*this);
    }
    for (Node& n : nodes_) {
        if (n.param == nullptr || n.grad.empty()) continue;
        accumulate(n.param->grad, n.grad);
    }
}

// ---- linear algebra -------------------------------------------------------

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_matrix(av, "matmul");
    require_matrix(bv, "matmul");
    const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    if (bv.shape[0] != k)
        throw ShapeError("matmul dimension mismatch: " + shape_string(av.shape) + " . " + shape_string(bv.shape));
    Tensor out({m, n});
    as_matrix(out.values, m, n).noalias() = as_matrix(av, m, k) * as_matrix(bv, k, n);
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib, m, k, n, id = a.tape()->size()](Tape& t) {
        auto go = MutMap(t.grad_buffer(id).data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        if (t.needs_grad(ia))
            as_matrix(t.grad_buffer(ia), m, k).noalias() += go * as_matrix(t.value(ib), k, n).transpose();
        if (t.needs_grad(ib))
            as_matrix(t.grad_buffer(ib), k, n).noalias() += as_matrix(t.value(ia), m, k).transpose() * go;
    });
}

Var matmul_nt(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_matrix(av, "matmul_nt");
    require_matrix(bv, "matmul_nt");
    const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[0];
    if (bv.shape[1] != k)
        throw ShapeError("matmul_nt dimension mismatch: " + shape_string(av.shape) + " . " +
                         shape_string(bv.shape) + "^T");
    Tensor out({m, n});
    as_matrix(out.values, m, n).noalias() = as_matrix(av, m, k) * as_matrix(bv, n, k).transpose();
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib, m, k, n, id = a.tape()->size()](Tape& t) {
        auto go = MutMap(t.grad_buffer(id).data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        if (t.needs_grad(ia))
            as_matrix(t.grad_buffer(ia), m, k).noalias() += go * as_matrix(t.value(ib), n, k);
        if (t.needs_grad(ib))
            as_matrix(t.grad_buffer(ib), n, k).noalias() += go.transpose() * as_matrix(t.value(ia), m, k);
    });
}

// ---- elementwise ----------------------------------------------------------

Var add(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape != bv.shape)
        throw ShapeError("add shape mismatch: " + shape_string(av.shape) + " vs " + shape_string(bv.shape));
    Tensor out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib, id = a.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        if (t.needs_grad(ia)) accumulate(t.grad_buffer(ia), go);
        if (t.needs_grad(ib)) accumulate(t.grad_buffer(ib), go);
    });
}

Var add_bias(Var x, Var bias) {
    require_same_tape(x, bias);
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    const std::size_t n = xv.cols();
    if (bv.size() != n)
        throw ShapeError("add_bias: bias " + shape_string(bv.shape) + " does not match " + shape_string(xv.shape));
    const std::size_t m = xv.rows();
    Tensor out(xv.shape);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] = xv[r * n + c] + bv[c];
    const std::size_t ix = x.id(), ib = bias.id();
    return x.tape()->record(std::move(out), {x, bias}, [ix, ib, m, n, id = x.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        if (t.needs_grad(ix)) accumulate(t.grad_buffer(ix), go);
        if (t.needs_grad(ib)) {
            auto& gb = t.grad_buffer(ib);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) gb[c] += go[r * n + c];
        }
    });
}

Var mul(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape != bv.shape)
        throw ShapeError("mul shape mismatch: " + shape_string(av.shape) + " vs " + shape_string(bv.shape));
    Tensor out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib, id = a.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        if (t.needs_grad(ia)) {
            auto& ga = t.grad_buffer(ia);
            const Tensor& bv = t.value(ib);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv[i];
        }
        if (t.needs_grad(ib)) {
            auto& gb = t.grad_buffer(ib);
            const Tensor& av = t.value(ia);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * av[i];
        }
    });
}

Var scale(Var x, double factor) {
    const Tensor& xv = x.value();
    Tensor out(xv.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {x}, [ix, factor, id = x.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        auto& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
    });
}

Var sum(Var x) {
    const Tensor& xv = x.value();
    double total = 0.0;
    for (double v : xv.values) total += v;
    const std::size_t ix = x.id();
    return x.tape()->record(Tensor({}, {total}), {x}, [ix, id = x.tape()->size()](Tape& t) {
        const double g = t.grad_buffer(id)[0];
        for (double& gx : t.grad_buffer(ix)) gx += g;
    });
}

Var reshape(Var x, Shape shape) {
    const Tensor& xv = x.value();
    if (shape_size(shape) != xv.size())
        throw ShapeError("cannot reshape " + shape_string(xv.shape) + " to " + shape_string(shape));
    Tensor out(std::move(shape), xv.values);
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {x}, [ix, id = x.tape()->size()](Tape& t) {
        accumulate(t.grad_buffer(ix), t.grad_buffer(id));
    });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Var gelu(Var x) {
    const Tensor& xv = x.value();
    Tensor out(xv.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(xv[i]);
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {x}, [ix, id = x.tape()->size()](Tape& t) {
        constexpr double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
        const auto& go = t.grad_buffer(id);
        const Tensor& xv = t.value(ix);
        auto& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double v = xv[i];
            const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            gx[i] += go[i] * (cdf + v * pdf);
        }
    });
}

// ---- normalisation --------------------------------------------------------

Var softmax_rows(Var x) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.cols();
    if (n == 0) throw ShapeError("softmax over an empty last dimension");
    const std::size_t m = xv.rows();
    Tensor out(xv.shape);
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
        const double* in = xv.values.data() + r * n;
        double* o = out.values.data() + r * n;
        const double mx = *std::max_element(in, in + n);
        if (mx == neg_inf) throw InvalidArgument("softmax row " + std::to_string(r) + " is fully masked");
        double z = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            o[c] = in[c] == neg_inf ? 0.0 : std::exp(in[c] - mx);
            z += o[c];
        }
        for (std::size_t c = 0; c < n; ++c) o[c] /= z;
    }
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {x}, [ix, m, n, id = x.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        const Tensor& p = t.value(id);
        auto& gx = t.grad_buffer(ix);
        for (std::size_t r = 0; r < m; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < n; ++c) dot += go[r * n + c] * p[r * n + c];
            for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += p[r * n + c] * (go[r * n + c] - dot);
        }
    });
}

Var layernorm(Var x, Var gain, Var bias, double eps) {
    require_same_tape(x, gain);
    require_same_tape(x, bias);
    if (!(eps > 0.0)) throw InvalidArgument("layernorm eps must be positive");
    const Tensor& xv = x.value();
    const std::size_t d = xv.cols();
    if (gain.value().size() != d || bias.value().size() != d)
        throw ShapeError("layernorm: gain/bias do not match width " + std::to_string(d));
    const std::size_t m = xv.rows();
    const Tensor& g = gain.value();
    const Tensor& b = bias.value();

    Tensor out(xv.shape);
    std::vector<double> xhat(xv.size());
    std::vector<double> rstd(m);
    for (std::size_t r = 0; r < m; ++r) {
        const double* in = xv.values.data() + r * d;
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += in[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
        var /= static_cast<double>(d);
        rstd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            const double h = (in[c] - mean) * rstd[r];
            xhat[r * d + c] = h;
            out[r * d + c] = h * g[c] + b[c];
        }
    }
    const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
    return x.tape()->record(
        std::move(out), {x, gain, bias},
        [ix, ig, ib, m, d, xhat = std::move(xhat), rstd = std::move(rstd), id = x.tape()->size()](Tape& t) {
            const auto& go = t.grad_buffer(id);
            if (t.needs_grad(ig)) {
                auto& gg = t.grad_buffer(ig);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < d; ++c) gg[c] += go[r * d + c] * xhat[r * d + c];
            }
            if (t.needs_grad(ib)) {
                auto& gb = t.grad_buffer(ib);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < d; ++c) gb[c] += go[r * d + c];
            }
            if (t.needs_grad(ix)) {
                const Tensor& g = t.value(ig);
                auto& gx = t.grad_buffer(ix);
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t r = 0; r < m; ++r) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        const double dh = go[r * d + c] * g[c];
                        mean_dh += dh;
                        mean_dh_h += dh * xhat[r * d + c];
                    }
                    mean_dh *= inv_d;
                    mean_dh_h *= inv_d;
                    for (std::size_t c = 0; c < d; ++c) {
                        const double dh = go[r * d + c] * g[c];
                        gx[r * d + c] += rstd[r] * (dh - mean_dh - xhat[r * d + c] * mean_dh_h);
                    }
                }
            }
        });
}

// ---- lookup and loss ------------------------------------------------------

Var embedding(Var table, std::span<const int> ids) {
    const Tensor& tv = table.value();
    require_matrix(tv, "embedding");
    const std::size_t rows = tv.shape[0], d = tv.shape[1];
    Tensor out({ids.size(), d});
    std::vector<int> saved(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows)
            throw InvalidArgument("embedding id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                                  " outside [0, " + std::to_string(rows) + ")");
        std::copy_n(tv.values.data() + static_cast<std::size_t>(ids[i]) * d, d, out.values.data() + i * d);
    }
    const std::size_t it = table.id();
    return table.tape()->record(std::move(out), {table}, [it, d, saved = std::move(saved), id = table.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        auto& gt = t.grad_buffer(it);
        for (std::size_t i = 0; i < saved.size(); ++i) {
            double* dst = gt.data() + static_cast<std::size_t>(saved[i]) * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] += go[i * d + c];
        }
    });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
    const Tensor& lv = logits.value();
    const std::size_t v = lv.cols();
    const std::size_t m = lv.rows();
    if (targets.size() != m)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(m) + " rows");
    std::vector<double> probs(lv.size());
    std::vector<int> saved(targets.begin(), targets.end());
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t r = 0; r < m; ++r) {
        const int target = targets[r];
        if (target == kIgnoreTarget) continue;
        if (target < 0 || static_cast<std::size_t>(target) >= v)
            throw InvalidArgument("cross_entropy target " + std::to_string(target) + " at index " + std::to_string(r) +
                                  " outside [0, " + std::to_string(v) + ")");
        const double* in = lv.values.data() + r * v;
        double* p = probs.data() + r * v;
        const double mx = *std::max_element(in, in + v);
        double z = 0.0;
        for (std::size_t c = 0; c < v; ++c) {
            p[c] = std::exp(in[c] - mx);
            z += p[c];
        }
        for (std::size_t c = 0; c < v; ++c) p[c] /= z;
        total += -(in[target] - mx - std::log(z));
        ++counted;
    }
    if (counted == 0) throw InvalidArgument("cross_entropy: every target is ignored");
    const double inv_count = 1.0 / static_cast<double>(counted);
    const std::size_t il = logits.id();
    return logits.tape()->record(
        Tensor({}, {total * inv_count}), {logits},
        [il, m, v, inv_count, probs = std::move(probs), saved = std::move(saved), id = logits.tape()->size()](Tape& t) {
            const double g = t.grad_buffer(id)[0] * inv_count;
            auto& gl = t.grad_buffer(il);
            for (std::size_t r = 0; r < m; ++r) {
                if (saved[r] == kIgnoreTarget) continue;
                for (std::size_t c = 0; c < v; ++c) gl[r * v + c] += g * probs[r * v + c];
                gl[r * v + static_cast<std::size_t>(saved[r])] -= g;
            }
        });
}

// ---- attention ------------------------------------------------------------

Var causal_attention_head(Var q, Var k, Var v, std::size_t batch, std::size_t seq, std::size_t offset,
                          std::size_t head_dim) {
    require_same_tape(q, k);
    require_same_tape(q, v);
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    require_matrix(qv, "attention");
    if (qv.shape != kv.shape || qv.shape != vv.shape)
        throw ShapeError("attention: q/k/v shapes differ");
    const std::size_t width = qv.shape[1];
    if (qv.shape[0] != batch * seq)
        throw ShapeError("attention: " + shape_string(qv.shape) + " is not batch*seq rows");
    if (offset + head_dim > width) throw ShapeError("attention: head slice exceeds projection width");

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Tensor out({batch * seq, head_dim});
    // Lower-triangular probabilities, row i holds entries j <= i.
    std::vector<double> probs(batch * seq * seq, 0.0);
    std::vector<double> scores(seq);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t base = b * seq;
        for (std::size_t i = 0; i < seq; ++i) {
            const double* qi = qv.values.data() + (base + i) * width + offset;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = kv.values.data() + (base + j) * width + offset;
                double s = 0.0;
                for (std::size_t c = 0; c < head_dim; ++c) s += qi[c] * kj[c];
                scores[j] = s * inv_sqrt;
                mx = std::max(mx, scores[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                z += scores[j];
            }
            double* p = probs.data() + (base + i) * seq;
            double* o = out.values.data() + (base + i) * head_dim;
            for (std::size_t j = 0; j <= i; ++j) {
                p[j] = scores[j] / z;
                const double* vj = vv.values.data() + (base + j) * width + offset;
                for (std::size_t c = 0; c < head_dim; ++c) o[c] += p[j] * vj[c];
            }
        }
    }

    const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
    return q.tape()->record(
        std::move(out), {q, k, v},
        [iq, ik, iv, batch, seq, offset, head_dim, width, inv_sqrt, probs = std::move(probs),
         id = q.tape()->size()](Tape& t) {
            const auto& go = t.grad_buffer(id);
            const Tensor& qv = t.value(iq);
            const Tensor& kv = t.value(ik);
            const Tensor& vv = t.value(iv);
            const bool need_q = t.needs_grad(iq), need_k = t.needs_grad(ik), need_v = t.needs_grad(iv);
            double* gq = need_q ? t.grad_buffer(iq).data() : nullptr;
            double* gk = need_k ? t.grad_buffer(ik).data() : nullptr;
            double* gv = need_v ? t.grad_buffer(iv).data() : nullptr;
            std::vector<double> dp(seq);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t base = b * seq;
                for (std::size_t i = 0; i < seq; ++i) {
                    const double* p = probs.data() + (base + i) * seq;
                    const double* doi = go.data() + (base + i) * head_dim;
                    double dot = 0.0;
                    for (std::size_t j = 0; j <= i; ++j) {
                        const double* vj = vv.values.data() + (base + j) * width + offset;
                        double s = 0.0;
                        for (std::size_t c = 0; c < head_dim; ++c) s += doi[c] * vj[c];
                        dp[j] = s;
                        dot += s * p[j];
                        if (gv) {
                            double* gvj = gv + (base + j) * width + offset;
                            for (std::size_t c = 0; c < head_dim; ++c) gvj[c] += p[j] * doi[c];
                        }
                    }
                    const double* qi = qv.values.data() + (base + i) * width + offset;
                    double* gqi = gq ? gq + (base + i) * width + offset : nullptr;
                    for (std::size_t j = 0; j <= i; ++j) {
                        const double ds = p[j] * (dp[j] - dot) * inv_sqrt;
                        if (ds == 0.0) continue;
                        const double* kj = kv.values.data() + (base + j) * width + offset;
                        if (gqi)
                            for (std::size_t c = 0; c < head_dim; ++c) gqi[c] += ds * kj[c];
                        if (gk) {
                            double* gkj = gk + (base + j) * width + offset;
                            for (std::size_t c = 0; c < head_dim; ++c) gkj[c] += ds * qi[c];
                        }
                    }
                }
            }
        });
}

// ---- slicing --------------------------------------------------------------

Var slice_rows(Var x, std::size_t start, std::size_t count) {
    const Tensor& xv = x.value();
    require_matrix(xv, "slice_rows");
    const std::size_t n = xv.shape[1];
    if (start + count > xv.shape[0]) throw ShapeError("slice_rows out of range for " + shape_string(xv.shape));
    Tensor out({count, n});
    std::copy_n(xv.values.data() + start * n, count * n, out.values.data());
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {x}, [ix, start, count, n, id = x.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        auto& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < count * n; ++i) gx[start * n + i] += go[i];
    });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
    const Tensor& xv = x.value();
    require_matrix(xv, "slice_cols");
    const std::size_t m = xv.shape[0], n = xv.shape[1];
    if (start + count > n) throw ShapeError("slice_cols out of range for " + shape_string(xv.shape));
    Tensor out({m, count});
    for (std::size_t r = 0; r < m; ++r) std::copy_n(xv.values.data() + r * n + start, count, out.values.data() + r * count);
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {x}, [ix, start, count, m, n, id = x.tape()->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        auto& gx = t.grad_buffer(ix);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < count; ++c) gx[r * n + start + c] += go[r * count + c];
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols of nothing");
    const std::size_t m = parts[0].value().shape.at(0);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (Var p : parts) {
        require_same_tape(parts[0], p);
        require_matrix(p.value(), "concat_cols");
        if (p.value().shape[0] != m) throw ShapeError("concat_cols row mismatch");
        widths.push_back(p.value().shape[1]);
        total += widths.back();
    }
    Tensor out({m, total});
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = parts[k].value();
        for (std::size_t r = 0; r < m; ++r)
            std::copy_n(pv.values.data() + r * widths[k], widths[k], out.values.data() + r * total + col);
        col += widths[k];
    }
    std::vector<std::size_t> ids;
    for (Var p : parts) ids.push_back(p.id());
    Tape* tape = parts[0].tape();
    return tape->record(std::move(out), parts, [ids, widths, m, total, id = tape->size()](Tape& t) {
        const auto& go = t.grad_buffer(id);
        std::size_t col = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (t.needs_grad(ids[k])) {
                auto& gp = t.grad_buffer(ids[k]);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c) gp[r * widths[k] + c] += go[r * total + col + c];
            }
            col += widths[k];
        }
    });
}

} // namespace apollo::ad
