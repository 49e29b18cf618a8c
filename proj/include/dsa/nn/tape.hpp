#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/core/tensor.hpp"
#include "dsa/nn/activation.hpp"
#include "dsa/nn/gaussian.hpp"

namespace dsa::nn {

using Vec = std::vector<double>;

// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Handle to a named parameter in a ParameterStore.
struct ParamId {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

// Persistent parameter storage shared by all tapes built for one model.
// Gradients accumulate additively across Tape::backward calls; the trainer
// zeroes them at batch boundaries and reduces explicitly.
class ParameterStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    ParamId add(const std::string& name, Tensor init) {
        Entry e;
        e.name = name;
        e.grad = Tensor(init.shape(), 0.0);
        e.value = std::move(init);
        entries_.push_back(std::move(e));
        return ParamId{static_cast<int>(entries_.size()) - 1};
    }

    int count() const { return static_cast<int>(entries_.size()); }

    Entry& at(ParamId id) { return entries_.at(static_cast<std::size_t>(id.idx)); }
    const Entry& at(ParamId id) const { return entries_.at(static_cast<std::size_t>(id.idx)); }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grad() {
        for (auto& e : entries_) e.grad.fill(0.0);
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

private:
    std::vector<Entry> entries_;
};

// Reverse-mode gradient tape. Every op appends a node holding the forward
// value and a closure that propagates the adjoint to its inputs. Replaying
// the same ops on the same values is bit-exact; backward() visits nodes in
// reverse creation order, so each node's adjoint is complete when read.
class Tape {
public:
    explicit Tape(ParameterStore* params = nullptr) : params_(params) {
        if (params_) param_nodes_.assign(static_cast<std::size_t>(params_->count()), -1);
    }

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t node_count() const { return nodes_.size(); }

    const Vec& value(Var v) const { return nodes_.at(check(v)).value; }
    const Vec& grad(Var v) const { return nodes_.at(check(v)).grad; }

    double scalar(Var v) const {
        const Vec& x = value(v);
        require_shape(x.size() == 1, "Tape::scalar: node is not a scalar");
        return x[0];
    }

    Var input(Vec v) { return make(std::move(v), {}); }

    Var scalar_input(double x) { return input(Vec{x}); }

    // Leaf view of a parameter; memoized so each parameter appears once per tape.
    Var param(ParamId id) {
        require(params_ != nullptr, "Tape::param: tape has no parameter store");
        int& memo = param_nodes_.at(static_cast<std::size_t>(id.idx));
        if (memo >= 0) return Var{memo};
        const auto& entry = params_->at(id);
        Var v = make(entry.value.values(), [this, id](Node& n) {
            auto& g = params_->at(id).grad.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        });
        memo = v.id;
        return v;
    }

    Var add(Var a, Var b) {
        const Vec& x = value(a);
        const Vec& y = value(b);
        require_shape(x.size() == y.size(), "Tape::add: size mismatch");
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
        return make(std::move(out), [this, a, b](Node& n) {
            accumulate(a, n.grad);
            accumulate(b, n.grad);
        });
    }

    Var sub(Var a, Var b) {
        const Vec& x = value(a);
        const Vec& y = value(b);
        require_shape(x.size() == y.size(), "Tape::sub: size mismatch");
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
        return make(std::move(out), [this, a, b](Node& n) {
            accumulate(a, n.grad);
            Vec neg(n.grad.size());
            for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -n.grad[i];
            accumulate(b, neg);
        });
    }

    // Hadamard product.
    Var mul(Var a, Var b) {
        const Vec& x = value(a);
        const Vec& y = value(b);
        require_shape(x.size() == y.size(), "Tape::mul: size mismatch");
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
        return make(std::move(out), [this, a, b](Node& n) {
            const Vec& xv = nodes_[static_cast<std::size_t>(a.id)].value;
            const Vec& yv = nodes_[static_cast<std::size_t>(b.id)].value;
            Vec ga(n.grad.size()), gb(n.grad.size());
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                ga[i] = n.grad[i] * yv[i];
                gb[i] = n.grad[i] * xv[i];
            }
            accumulate(a, ga);
            accumulate(b, gb);
        });
    }

    Var scale(Var a, double c) {
        Vec out = value(a);
        for (auto& v : out) v *= c;
        return make(std::move(out), [this, a, c](Node& n) {
            Vec g(n.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = c * n.grad[i];
            accumulate(a, g);
        });
    }

    // Elementwise product with a constant vector (mask application, dropout).
    Var cmul(Var a, Vec c) {
        const Vec& x = value(a);
        require_shape(x.size() == c.size(), "Tape::cmul: size mismatch");
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * c[i];
        return make(std::move(out), [this, a, c = std::move(c)](Node& n) {
            Vec g(n.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = c[i] * n.grad[i];
            accumulate(a, g);
        });
    }

    Var concat(Var a, Var b) {
        const Vec& x = value(a);
        const Vec& y = value(b);
        Vec out;
        out.reserve(x.size() + y.size());
        out.insert(out.end(), x.begin(), x.end());
        out.insert(out.end(), y.begin(), y.end());
        const std::size_t na = x.size();
        return make(std::move(out), [this, a, b, na](Node& n) {
            Vec ga(n.grad.begin(), n.grad.begin() + static_cast<std::ptrdiff_t>(na));
            Vec gb(n.grad.begin() + static_cast<std::ptrdiff_t>(na), n.grad.end());
            accumulate(a, ga);
            accumulate(b, gb);
        });
    }

    Var slice(Var a, int offset, int len) {
        const Vec& x = value(a);
        require_shape(offset >= 0 && len >= 0 &&
                          static_cast<std::size_t>(offset + len) <= x.size(),
                      "Tape::slice: range out of bounds");
        Vec out(x.begin() + offset, x.begin() + offset + len);
        return make(std::move(out), [this, a, offset](Node& n) {
            Vec g(nodes_[static_cast<std::size_t>(a.id)].value.size(), 0.0);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                g[static_cast<std::size_t>(offset) + i] = n.grad[i];
            accumulate(a, g);
        });
    }

    // y = W x where W is a row-major (rows x cols) matrix stored as a flat node.
    Var matvec(Var w, int rows, int cols, Var x) {
        const Vec& wv = value(w);
        const Vec& xv = value(x);
        require_shape(wv.size() == static_cast<std::size_t>(rows) * cols,
                      "Tape::matvec: weight size mismatch");
        require_shape(xv.size() == static_cast<std::size_t>(cols),
                      "Tape::matvec: input size mismatch");
        Vec out(static_cast<std::size_t>(rows), 0.0);
        for (int i = 0; i < rows; ++i) {
            const double* row = wv.data() + static_cast<std::size_t>(i) * cols;
            double acc = 0.0;
            for (int j = 0; j < cols; ++j) acc += row[j] * xv[j];
            out[static_cast<std::size_t>(i)] = acc;
        }
        return make(std::move(out), [this, w, x, rows, cols](Node& n) {
            const Vec& wv = nodes_[static_cast<std::size_t>(w.id)].value;
            const Vec& xv = nodes_[static_cast<std::size_t>(x.id)].value;
            Vec gw(wv.size(), 0.0);
            Vec gx(xv.size(), 0.0);
            for (int i = 0; i < rows; ++i) {
                const double gi = n.grad[static_cast<std::size_t>(i)];
                if (gi == 0.0) continue;
                const double* row = wv.data() + static_cast<std::size_t>(i) * cols;
                double* grow = gw.data() + static_cast<std::size_t>(i) * cols;
                for (int j = 0; j < cols; ++j) {
                    grow[j] += gi * xv[static_cast<std::size_t>(j)];
                    gx[static_cast<std::size_t>(j)] += gi * row[j];
                }
            }
            accumulate(w, gw);
            accumulate(x, gx);
        });
    }

    Var activation(Var a, Activation f) {
        const Vec& x = value(a);
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(f, x[i]);
        return make(std::move(out), [this, a, f](Node& n) {
            const Vec& x = nodes_[static_cast<std::size_t>(a.id)].value;
            Vec g(n.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = n.grad[i] * activate_grad(f, x[i], n.value[i]);
            accumulate(a, g);
        });
    }

    // softplus(x) + floor, elementwise; the variance-head map. The floor keeps
    // downstream KL and log-density terms away from the variance singularity.
    Var softplus_floor(Var a, double floor) {
        const Vec& x = value(a);
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = softplus(x[i]) + floor;
        return make(std::move(out), [this, a](Node& n) {
            const Vec& x = nodes_[static_cast<std::size_t>(a.id)].value;
            Vec g(n.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * sigmoid(x[i]);
            accumulate(a, g);
        });
    }

    Var sum(Var a) {
        const Vec& x = value(a);
        double acc = 0.0;
        for (double v : x) acc += v;
        return make(Vec{acc}, [this, a](Node& n) {
            Vec g(nodes_[static_cast<std::size_t>(a.id)].value.size(), n.grad[0]);
            accumulate(a, g);
        });
    }

    // Masked Gaussian log-density: sum over mask=1 dimensions of
    // log N(x_d | mean_d, variance_d). Scalar output. Mirrors
    // gaussian_log_density() term for term so eval paths agree bitwise.
    Var gaussian_logpdf(Var mean, Var variance, Vec x, Vec mask) {
        const Vec& mu = value(mean);
        const Vec& var = value(variance);
        require_shape(mu.size() == var.size() && mu.size() == x.size() && mu.size() == mask.size(),
                      "Tape::gaussian_logpdf: size mismatch");
        double acc = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) {
            if (mask[d] == 0.0) continue;
            const double v = var[d];
            if (!(v > 0.0)) throw DomainError("Tape::gaussian_logpdf: nonpositive variance");
            const double r = x[d] - mu[d];
            acc += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * r * r / v;
        }
        return make(Vec{acc}, [this, mean, variance, x = std::move(x), mask = std::move(mask)](Node& n) {
            const double g = n.grad[0];
            const Vec& mu = nodes_[static_cast<std::size_t>(mean.id)].value;
            const Vec& var = nodes_[static_cast<std::size_t>(variance.id)].value;
            Vec gmu(mu.size(), 0.0), gvar(var.size(), 0.0);
            for (std::size_t d = 0; d < mu.size(); ++d) {
                if (mask[d] == 0.0) continue;
                const double v = var[d];
                const double r = x[d] - mu[d];
                gmu[d] = g * r / v;
                gvar[d] = g * (-0.5 / v + 0.5 * r * r / (v * v));
            }
            accumulate(mean, gmu);
            accumulate(variance, gvar);
        });
    }

    // KL(q || p) between diagonal Gaussians given as (mean, variance) nodes.
    Var kl_diag(Var mean_q, Var var_q, Var mean_p, Var var_p) {
        const Vec& mq = value(mean_q);
        const Vec& vq = value(var_q);
        const Vec& mp = value(mean_p);
        const Vec& vp = value(var_p);
        require_shape(mq.size() == vq.size() && mq.size() == mp.size() && mq.size() == vp.size(),
                      "Tape::kl_diag: size mismatch");
        double acc = 0.0;
        for (std::size_t d = 0; d < mq.size(); ++d) {
            if (!(vq[d] > 0.0) || !(vp[d] > 0.0))
                throw DomainError("Tape::kl_diag: nonpositive variance");
            const double dm = mq[d] - mp[d];
            acc += 0.5 * (std::log(vp[d] / vq[d]) + (vq[d] + dm * dm) / vp[d] - 1.0);
        }
        return make(Vec{acc}, [this, mean_q, var_q, mean_p, var_p](Node& n) {
            const double g = n.grad[0];
            const Vec& mq = nodes_[static_cast<std::size_t>(mean_q.id)].value;
            const Vec& vq = nodes_[static_cast<std::size_t>(var_q.id)].value;
            const Vec& mp = nodes_[static_cast<std::size_t>(mean_p.id)].value;
            const Vec& vp = nodes_[static_cast<std::size_t>(var_p.id)].value;
            const std::size_t k = mq.size();
            Vec gmq(k), gvq(k), gmp(k), gvp(k);
            for (std::size_t d = 0; d < k; ++d) {
                const double dm = mq[d] - mp[d];
                gmq[d] = g * dm / vp[d];
                gmp[d] = -gmq[d];
                gvq[d] = g * 0.5 * (1.0 / vp[d] - 1.0 / vq[d]);
                gvp[d] = g * 0.5 * (1.0 / vp[d] - (vq[d] + dm * dm) / (vp[d] * vp[d]));
            }
            accumulate(mean_q, gmq);
            accumulate(var_q, gvq);
            accumulate(mean_p, gmp);
            accumulate(var_p, gvp);
        });
    }

    // mean + sqrt(variance) * noise with fixed noise; the differentiable
    // sampling path used by the variational objective.
    Var reparameterize(Var mean, Var variance, Vec noise) {
        const Vec& mu = value(mean);
        const Vec& var = value(variance);
        require_shape(mu.size() == var.size() && mu.size() == noise.size(),
                      "Tape::reparameterize: size mismatch");
        Vec out(mu.size());
        for (std::size_t d = 0; d < mu.size(); ++d)
            out[d] = mu[d] + std::sqrt(var[d]) * noise[d];
        return make(std::move(out), [this, mean, variance, noise = std::move(noise)](Node& n) {
            const Vec& var = nodes_[static_cast<std::size_t>(variance.id)].value;
            Vec gvar(var.size());
            for (std::size_t d = 0; d < var.size(); ++d)
                gvar[d] = n.grad[d] * noise[d] * 0.5 / std::sqrt(var[d]);
            accumulate(mean, n.grad);
            accumulate(variance, gvar);
        });
    }

    // Reverse-mode sweep from a scalar loss. Parameter gradients accumulate
    // into the store; parameters with no path to the loss keep exact zeros.
    void backward(Var loss) {
        const Vec& l = value(loss);
        require_shape(l.size() == 1, "Tape::backward: loss must be a scalar");
        for (auto& n : nodes_) {
            n.grad.assign(n.value.size(), 0.0);
        }
        nodes_[static_cast<std::size_t>(loss.id)].grad[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.back) n.back(n);
        }
    }

private:
    struct Node {
        Vec value;
        Vec grad;
        std::function<void(Node&)> back;
    };

    std::size_t check(Var v) const {
        require_shape(v.id >= 0 && static_cast<std::size_t>(v.id) < nodes_.size(),
                      "Tape: invalid Var");
        return static_cast<std::size_t>(v.id);
    }

    Var make(Vec value, std::function<void(Node&)> back) {
        Node n;
        n.value = std::move(value);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void accumulate(Var target, const Vec& g) {
        Node& n = nodes_[static_cast<std::size_t>(target.id)];
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }

    std::vector<Node> nodes_;
    ParameterStore* params_;
    std::vector<int> param_nodes_;
};

}  // namespace dsa::nn
