#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dsa/core/random.hpp"
#include "dsa/nn/tape.hpp"

namespace dsa::nn {

// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(int rows, int cols, RandomStream& rng) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    Tensor w({rows, cols});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    return w;
}

// Fully connected layer: activation(W x + b).
struct DenseLayer {
    ParamId weight;  // (out x in), row-major
    ParamId bias;    // (out)
    int in = 0;
    int out = 0;
    Activation activation = Activation::Identity;

    static DenseLayer create(ParameterStore& store, const std::string& name, int in, int out,
                             Activation act, RandomStream& rng) {
        require_shape(in > 0 && out > 0, "DenseLayer: dimensions must be positive");
        DenseLayer l;
        l.in = in;
        l.out = out;
        l.activation = act;
        l.weight = store.add(name + ".W", glorot_uniform(out, in, rng));
        l.bias = store.add(name + ".b", Tensor({out}, 0.0));
        return l;
    }

    Var forward(Tape& t, Var x) const {
        Var h = t.matvec(t.param(weight), out, in, x);
        h = t.add(h, t.param(bias));
        return t.activation(h, activation);
    }
};

// Standard LSTM cell. Each gate owns an (H x (D_in + H)) weight over the
// concatenation [x; h] and an H bias. Forget bias initialized to 1.
struct LstmCell {
    ParamId w_input, b_input;
    ParamId w_forget, b_forget;
    ParamId w_output, b_output;
    ParamId w_candidate, b_candidate;
    int input_dim = 0;
    int hidden = 0;

    static LstmCell create(ParameterStore& store, const std::string& name, int input_dim,
                           int hidden, RandomStream& rng) {
        require_shape(input_dim > 0 && hidden > 0, "LstmCell: dimensions must be positive");
        LstmCell c;
        c.input_dim = input_dim;
        c.hidden = hidden;
        const int cols = input_dim + hidden;
        c.w_input = store.add(name + ".Wi", glorot_uniform(hidden, cols, rng));
        c.b_input = store.add(name + ".bi", Tensor({hidden}, 0.0));
        c.w_forget = store.add(name + ".Wf", glorot_uniform(hidden, cols, rng));
        c.b_forget = store.add(name + ".bf", Tensor({hidden}, 1.0));
        c.w_output = store.add(name + ".Wo", glorot_uniform(hidden, cols, rng));
        c.b_output = store.add(name + ".bo", Tensor({hidden}, 0.0));
        c.w_candidate = store.add(name + ".Wg", glorot_uniform(hidden, cols, rng));
        c.b_candidate = store.add(name + ".bg", Tensor({hidden}, 0.0));
        return c;
    }

    // One step; returns (h', c').
    std::pair<Var, Var> step(Tape& t, Var x, Var h, Var c) const {
        require_shape(t.value(x).size() == static_cast<std::size_t>(input_dim),
                      "LstmCell::step: input size mismatch");
        require_shape(t.value(h).size() == static_cast<std::size_t>(hidden) &&
                          t.value(c).size() == static_cast<std::size_t>(hidden),
                      "LstmCell::step: state size mismatch");
        const int cols = input_dim + hidden;
        Var xh = t.concat(x, h);
        auto gate = [&](ParamId w, ParamId b, Activation f) {
            return t.activation(t.add(t.matvec(t.param(w), hidden, cols, xh), t.param(b)), f);
        };
        Var gi = gate(w_input, b_input, Activation::Sigmoid);
        Var gf = gate(w_forget, b_forget, Activation::Sigmoid);
        Var go = gate(w_output, b_output, Activation::Sigmoid);
        Var gg = gate(w_candidate, b_candidate, Activation::Tanh);
        Var c2 = t.add(t.mul(gf, c), t.mul(gi, gg));
        Var h2 = t.mul(go, t.activation(c2, Activation::Tanh));
        return {h2, c2};
    }
};

// Dropout with inverted scaling: surviving units are divided by the keep
// probability at train time, so evaluation mode is the identity map.
struct DropoutSpec {
    double rate = 0.1;
    bool train_mode = false;

    Var apply(Tape& t, Var x, RandomStream& rng) const {
        require(rate >= 0.0 && rate < 1.0, "DropoutSpec: rate must be in [0, 1)");
        if (!train_mode || rate == 0.0) return x;
        const double keep = 1.0 - rate;
        Vec m(t.value(x).size());
        for (auto& v : m) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        return t.cmul(x, std::move(m));
    }
};

}  // namespace dsa::nn
