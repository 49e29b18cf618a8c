#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "dsa/core/random.hpp"
#include "dsa/nn/adam.hpp"
#include "dsa/nn/gaussian.hpp"
#include "dsa/nn/layers.hpp"
#include "dsa/nn/tape.hpp"
#include "support/fd_check.hpp"

using namespace dsa;
using namespace dsa::nn;
using testsupport::finite_difference_grads;
using testsupport::max_grad_relative_error;

namespace {

DenseLayer dense_with(ParameterStore& store, const std::string& name, int in, int out,
                      Activation act, const std::vector<double>& w, const std::vector<double>& b) {
    RandomStream rng(0);
    DenseLayer l = DenseLayer::create(store, name, in, out, act, rng);
    store.at(l.weight).value.values() = w;
    store.at(l.bias).value.values() = b;
    return l;
}

// Straight-line re-implementation of the LSTM gate equations, used as an
// independent oracle against the tape version.
void lstm_reference(const ParameterStore& store, const LstmCell& cell,
                    const std::vector<double>& x, const std::vector<double>& h,
                    const std::vector<double>& c, std::vector<double>& h_out,
                    std::vector<double>& c_out) {
    const int H = cell.hidden;
    const int cols = cell.input_dim + H;
    std::vector<double> xh(x);
    xh.insert(xh.end(), h.begin(), h.end());
    auto gate = [&](ParamId w, ParamId b, bool tanh_gate) {
        std::vector<double> out(H);
        const auto& wv = store.at(w).value.values();
        const auto& bv = store.at(b).value.values();
        for (int i = 0; i < H; ++i) {
            double acc = bv[i];
            for (int j = 0; j < cols; ++j) acc += wv[i * cols + j] * xh[j];
            out[i] = tanh_gate ? std::tanh(acc) : sigmoid(acc);
        }
        return out;
    };
    auto gi = gate(cell.w_input, cell.b_input, false);
    auto gf = gate(cell.w_forget, cell.b_forget, false);
    auto go = gate(cell.w_output, cell.b_output, false);
    auto gg = gate(cell.w_candidate, cell.b_candidate, true);
    h_out.resize(H);
    c_out.resize(H);
    for (int i = 0; i < H; ++i) {
        c_out[i] = gf[i] * c[i] + gi[i] * gg[i];
        h_out[i] = go[i] * std::tanh(c_out[i]);
    }
}

}  // namespace

TEST_CASE("dense forward matches hand values", "[nn]") {
    ParameterStore store;
    SECTION("identity weights pass input through") {
        auto l = dense_with(store, "l", 2, 2, Activation::Identity, {1, 0, 0, 1}, {0, 0});
        Tape t(&store);
        Var y = l.forward(t, t.input({1.0, 2.0}));
        REQUIRE(t.value(y) == std::vector<double>{1.0, 2.0});
    }
    SECTION("row sum with bias") {
        auto l = dense_with(store, "l", 2, 1, Activation::Identity, {1, 1}, {-3});
        Tape t(&store);
        Var y = l.forward(t, t.input({1.0, 2.0}));
        REQUIRE(t.value(y)[0] == Approx(0.0).margin(0.0));
    }
    SECTION("zero weights under tanh give zeros") {
        auto l = dense_with(store, "l", 3, 2, Activation::Tanh, {0, 0, 0, 0, 0, 0}, {0, 0});
        Tape t(&store);
        Var y = l.forward(t, t.input({0.3, -4.0, 7.0}));
        REQUIRE(t.value(y) == std::vector<double>{0.0, 0.0});
    }
    SECTION("dimension mismatch raises shape error") {
        auto l = dense_with(store, "l", 2, 1, Activation::Identity, {1, 1}, {0});
        Tape t(&store);
        REQUIRE_THROWS_AS(l.forward(t, t.input({1.0, 2.0, 3.0})), ShapeError);
    }
}

TEST_CASE("lstm step edge cases", "[nn]") {
    ParameterStore store;
    RandomStream rng(11);
    LstmCell cell = LstmCell::create(store, "lstm", 2, 2, rng);

    SECTION("all-zero weights and state stay at zero") {
        for (auto& e : store.entries()) e.value.fill(0.0);
        Tape t(&store);
        auto [h2, c2] = cell.step(t, t.input({0.5, -0.5}), t.input({0.0, 0.0}), t.input({0.0, 0.0}));
        REQUIRE(t.value(h2) == std::vector<double>{0.0, 0.0});
        REQUIRE(t.value(c2) == std::vector<double>{0.0, 0.0});
    }

    SECTION("large forget bias carries the cell state through") {
        ParameterStore s1;
        RandomStream r1(3);
        LstmCell one = LstmCell::create(s1, "lstm", 1, 1, r1);
        for (auto& e : s1.entries()) e.value.fill(0.0);
        s1.at(one.b_forget).value.values()[0] = 20.0;
        Tape t(&s1);
        auto [h2, c2] = one.step(t, t.input({0.7}), t.input({0.0}), t.input({1.0}));
        // c' = sigmoid(20) * 1 + sigmoid(0) * tanh(0)
        REQUIRE(t.value(c2)[0] == Approx(1.0).margin(1e-8));
        REQUIRE(t.value(h2)[0] == Approx(0.5 * std::tanh(t.value(c2)[0])).epsilon(1e-12));
    }

    SECTION("random cell matches the straight-line oracle") {
        RandomStream data(99);
        std::vector<double> x{data.normal(), data.normal()};
        std::vector<double> h{data.normal(), data.normal()};
        std::vector<double> c{data.normal(), data.normal()};
        Tape t(&store);
        auto [h2, c2] = cell.step(t, t.input(x), t.input(h), t.input(c));
        std::vector<double> h_ref, c_ref;
        lstm_reference(store, cell, x, h, c, h_ref, c_ref);
        for (int i = 0; i < 2; ++i) {
            REQUIRE(t.value(h2)[i] == Approx(h_ref[i]).margin(1e-12));
            REQUIRE(t.value(c2)[i] == Approx(c_ref[i]).margin(1e-12));
        }
    }

    SECTION("state size mismatch raises shape error") {
        Tape t(&store);
        REQUIRE_THROWS_AS(cell.step(t, t.input({1.0, 2.0}), t.input({0.0}), t.input({0.0, 0.0})),
                          ShapeError);
    }
}

TEST_CASE("gaussian log density closed forms", "[nn]") {
    SECTION("standard normal at the mean") {
        GaussianDiag g{{0.0}, {1.0}};
        REQUIRE(gaussian_log_density({0.0}, g) == Approx(-0.5 * kLog2Pi).epsilon(1e-14));
        REQUIRE(gaussian_log_density({0.0}, g) == Approx(-0.9189385332046727).epsilon(1e-12));
    }
    SECTION("x equal to mean in D dimensions drops the quadratic term") {
        const int D = 7;
        GaussianDiag g;
        g.mean.assign(D, 1.25);
        g.variance.assign(D, 1.0);
        std::vector<double> x(D, 1.25);
        REQUIRE(gaussian_log_density(x, g) == Approx(-0.5 * D * kLog2Pi).epsilon(1e-14));
    }
    SECTION("unit offset adds one half") {
        GaussianDiag g{{0.0}, {1.0}};
        REQUIRE(gaussian_log_density({1.0}, g) == Approx(-0.5 * kLog2Pi - 0.5).epsilon(1e-14));
    }
    SECTION("nonpositive variance raises domain error") {
        GaussianDiag g{{0.0}, {0.0}};
        REQUIRE_THROWS_AS(gaussian_log_density({0.0}, g), DomainError);
    }
    SECTION("density integrates to one (Simpson quadrature)") {
        RandomStream rng(5);
        for (int rep = 0; rep < 4; ++rep) {
            const double mu = rng.uniform(-2.0, 2.0);
            const double var = rng.uniform(0.2, 3.0);
            GaussianDiag g{{mu}, {var}};
            const double sd = std::sqrt(var);
            const double lo = mu - 10.0 * sd;
            const double hi = mu + 10.0 * sd;
            const int n = 4000;  // even
            const double step = (hi - lo) / n;
            double acc = 0.0;
            for (int i = 0; i <= n; ++i) {
                const double x = lo + i * step;
                const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
                acc += w * std::exp(gaussian_log_density({x}, g));
            }
            acc *= step / 3.0;
            REQUIRE(acc == Approx(1.0).margin(1e-6));
        }
    }
}

TEST_CASE("kl divergence between diagonal gaussians", "[nn]") {
    SECTION("identical distributions give exactly zero") {
        GaussianDiag q{{0.4, -1.0}, {0.5, 2.0}};
        REQUIRE(kl_diag_gaussians(q, q) == 0.0);
    }
    SECTION("unit mean shift equals one half") {
        GaussianDiag q{{1.0}, {1.0}};
        GaussianDiag p{{0.0}, {1.0}};
        REQUIRE(kl_diag_gaussians(q, p) == Approx(0.5).epsilon(1e-14));
    }
    SECTION("unit mean shift agrees with a Monte-Carlo estimate") {
        GaussianDiag q{{1.0}, {1.0}};
        GaussianDiag p{{0.0}, {1.0}};
        RandomStream rng(17);
        const int n = 1000000;
        double acc = 0.0, acc2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = 1.0 + rng.normal();
            const double term = gaussian_log_density({z}, q) - gaussian_log_density({z}, p);
            acc += term;
            acc2 += term * term;
        }
        const double mean = acc / n;
        const double se = std::sqrt((acc2 / n - mean * mean) / n);
        REQUIRE(std::fabs(mean - 0.5) < 3.0 * se);
    }
    SECTION("asymmetry") {
        GaussianDiag a{{0.0}, {4.0}};
        GaussianDiag b{{0.0}, {1.0}};
        REQUIRE(kl_diag_gaussians(a, b) != kl_diag_gaussians(b, a));
    }
    SECTION("nonnegative on random pairs; zero only for equal pairs") {
        RandomStream rng(23);
        for (int rep = 0; rep < 200; ++rep) {
            const int d = 1 + rng.uniform_int(5);
            GaussianDiag q, p;
            for (int i = 0; i < d; ++i) {
                q.mean.push_back(rng.normal());
                q.variance.push_back(rng.uniform(0.1, 3.0));
            }
            p = q;
            REQUIRE(kl_diag_gaussians(q, p) == 0.0);
            // Perturb one coordinate; KL must become strictly positive.
            p.mean[0] += 0.25 + rng.uniform();
            REQUIRE(kl_diag_gaussians(q, p) > 0.0);
            GaussianDiag r;
            for (int i = 0; i < d; ++i) {
                r.mean.push_back(rng.normal());
                r.variance.push_back(rng.uniform(0.1, 3.0));
            }
            REQUIRE(kl_diag_gaussians(q, r) >= 0.0);
        }
    }
    SECTION("dimension mismatch raises shape error") {
        GaussianDiag q{{0.0}, {1.0}};
        GaussianDiag p{{0.0, 0.0}, {1.0, 1.0}};
        REQUIRE_THROWS_AS(kl_diag_gaussians(q, p), ShapeError);
    }
}

TEST_CASE("reparameterization", "[nn]") {
    SECTION("zero noise returns the mean exactly") {
        GaussianDiag g{{0.3, -0.7}, {2.0, 0.5}};
        REQUIRE(reparameterize(g, {0.0, 0.0}) == g.mean);
    }
    SECTION("vanishing variance collapses to the mean") {
        GaussianDiag g{{1.5}, {1e-20}};
        REQUIRE(reparameterize(g, {3.0})[0] == Approx(1.5).margin(1e-9));
    }
    SECTION("law of large numbers over draws") {
        GaussianDiag g{{0.8}, {1.44}};
        RandomStream rng(41);
        const int n = 100000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += reparameterize(g, {rng.normal()})[0];
        const double tol = 4.0 * std::sqrt(1.44) / std::sqrt(static_cast<double>(n));
        REQUIRE(std::fabs(acc / n - 0.8) < tol);
    }
}

TEST_CASE("backward on trivial graphs", "[nn]") {
    SECTION("linear loss w*x") {
        ParameterStore store;
        ParamId w = store.add("w", Tensor::from_vector({2.0}));
        Tape t(&store);
        Var loss = t.mul(t.param(w), t.input({3.0}));
        t.backward(loss);
        REQUIRE(store.at(w).grad.values()[0] == 3.0);
    }
    SECTION("tanh at zero has unit slope") {
        ParameterStore store;
        ParamId w = store.add("w", Tensor::from_vector({0.0}));
        Tape t(&store);
        Var loss = t.activation(t.param(w), Activation::Tanh);
        t.backward(loss);
        REQUIRE(store.at(w).grad.values()[0] == 1.0);
    }
    SECTION("non-scalar loss is rejected") {
        ParameterStore store;
        Tape t(&store);
        Var v = t.input({1.0, 2.0});
        REQUIRE_THROWS_AS(t.backward(v), ShapeError);
    }
    SECTION("parameters off the loss path keep exact zero gradients") {
        ParameterStore store;
        ParamId w = store.add("w", Tensor::from_vector({2.0}));
        ParamId unused = store.add("unused", Tensor::from_vector({5.0, 6.0}));
        Tape t(&store);
        Var loss = t.mul(t.param(w), t.input({3.0}));
        t.backward(loss);
        REQUIRE(store.at(unused).grad.values() == std::vector<double>{0.0, 0.0});
    }
}

TEST_CASE("composite network gradients match finite differences", "[nn]") {
    ParameterStore store;
    RandomStream rng(7);
    DenseLayer embed = DenseLayer::create(store, "embed", 3, 4, Activation::Tanh, rng);
    LstmCell cell = LstmCell::create(store, "cell", 4, 3, rng);
    DenseLayer head = DenseLayer::create(store, "head", 3, 2, Activation::Softplus, rng);
    REQUIRE(store.total_size() <= 200);

    const std::vector<double> x1{0.3, -0.8, 0.5};
    const std::vector<double> x2{-0.2, 0.4, 1.1};

    auto eval = [&](Tape& t) {
        Var h = t.input(std::vector<double>(3, 0.0));
        Var c = t.input(std::vector<double>(3, 0.0));
        for (const auto& x : {x1, x2}) {
            Var e = embed.forward(t, t.input(x));
            auto [h2, c2] = cell.step(t, e, h, c);
            h = h2;
            c = c2;
        }
        return t.sum(head.forward(t, h));
    };

    store.zero_grad();
    Tape t(&store);
    t.backward(eval(t));

    auto fd = finite_difference_grads(store, [&]() {
        Tape t2(&store);
        return t2.scalar(eval(t2));
    });
    REQUIRE(max_grad_relative_error(store, fd) < 1e-5);
}

TEST_CASE("fused probabilistic ops gradients match finite differences", "[nn]") {
    ParameterStore store;
    RandomStream rng(13);
    const int d = 4;
    ParamId mu_q = store.add("mu_q", Tensor::from_vector(rng.normal_vector(d)));
    ParamId raw_q = store.add("raw_q", Tensor::from_vector(rng.normal_vector(d)));
    ParamId mu_p = store.add("mu_p", Tensor::from_vector(rng.normal_vector(d)));
    ParamId raw_p = store.add("raw_p", Tensor::from_vector(rng.normal_vector(d)));

    const std::vector<double> x{0.2, -0.4, 1.0, 0.6};
    const std::vector<double> mask{1.0, 0.0, 1.0, 1.0};
    const std::vector<double> noise{0.5, -1.2, 0.3, 2.0};

    auto eval = [&](Tape& t) {
        Var vq = t.softplus_floor(t.param(raw_q), 1e-6);
        Var vp = t.softplus_floor(t.param(raw_p), 1e-6);
        Var z = t.reparameterize(t.param(mu_q), vq, noise);
        Var lp = t.gaussian_logpdf(z, vp, x, mask);
        Var kl = t.kl_diag(t.param(mu_q), vq, t.param(mu_p), vp);
        return t.sub(lp, kl);
    };

    store.zero_grad();
    Tape t(&store);
    t.backward(eval(t));
    auto fd = finite_difference_grads(store, [&]() {
        Tape t2(&store);
        return t2.scalar(eval(t2));
    });
    REQUIRE(max_grad_relative_error(store, fd) < 1e-5);
}

TEST_CASE("relu gradients away from the kink", "[nn]") {
    ParameterStore store;
    RandomStream rng(29);
    DenseLayer l = DenseLayer::create(store, "l", 3, 3, Activation::Relu, rng);
    // Push pre-activations away from zero so central differences are valid.
    store.at(l.bias).value.values() = {0.9, -0.9, 0.8};
    const std::vector<double> x{0.1, -0.05, 0.12};

    auto eval = [&](Tape& t) { return t.sum(l.forward(t, t.input(x))); };
    store.zero_grad();
    Tape t(&store);
    t.backward(eval(t));
    auto fd = finite_difference_grads(store, [&]() {
        Tape t2(&store);
        return t2.scalar(eval(t2));
    });
    REQUIRE(max_grad_relative_error(store, fd) < 1e-5);
}

TEST_CASE("forward replay is bit exact", "[nn]") {
    ParameterStore store;
    RandomStream rng(31);
    DenseLayer l1 = DenseLayer::create(store, "l1", 4, 8, Activation::Tanh, rng);
    DenseLayer l2 = DenseLayer::create(store, "l2", 8, 1, Activation::Identity, rng);
    const std::vector<double> x{0.25, -1.5, 0.75, 2.0};
    auto run = [&]() {
        Tape t(&store);
        return t.scalar(l2.forward(t, l1.forward(t, t.input(x))));
    };
    const double a = run();
    const double b = run();
    REQUIRE(a == b);
}

TEST_CASE("dropout behavior", "[nn]") {
    ParameterStore store;
    SECTION("evaluation mode is the identity") {
        DropoutSpec d{0.4, false};
        Tape t(&store);
        RandomStream rng(1);
        Var x = t.input({1.0, -2.0, 3.0});
        Var y = d.apply(t, x, rng);
        REQUIRE(t.value(y) == t.value(x));
    }
    SECTION("train mode preserves the expectation under inverted scaling") {
        DropoutSpec d{0.3, true};
        RandomStream rng(77);
        const std::vector<double> x{1.0, -2.0, 0.5};
        std::vector<double> acc(3, 0.0);
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            Tape t(&store);
            Var y = d.apply(t, t.input(x), rng);
            for (int j = 0; j < 3; ++j) acc[j] += t.value(y)[j];
        }
        // Per-unit variance of the scaled mask is x^2 * rate / keep.
        for (int j = 0; j < 3; ++j) {
            const double se = std::fabs(x[j]) * std::sqrt(0.3 / 0.7 / n);
            REQUIRE(std::fabs(acc[j] / n - x[j]) < 5.0 * se + 1e-12);
        }
    }
}

TEST_CASE("random layer gradients across types", "[nn]") {
    RandomStream seeds(101);
    for (int rep = 0; rep < 5; ++rep) {
        ParameterStore store;
        RandomStream rng(seeds.next_u64());
        const int in = 2 + rng.uniform_int(3);
        const int hid = 2 + rng.uniform_int(3);
        DenseLayer l1 = DenseLayer::create(store, "l1", in, hid, Activation::Sigmoid, rng);
        LstmCell cell = LstmCell::create(store, "cell", hid, 2, rng);
        REQUIRE(store.total_size() <= 200);
        std::vector<double> x(static_cast<std::size_t>(in));
        for (auto& v : x) v = rng.normal();
        auto eval = [&](Tape& t) {
            Var e = l1.forward(t, t.input(x));
            auto [h2, c2] = cell.step(t, e, t.input({0.0, 0.0}), t.input({0.0, 0.0}));
            return t.sum(t.mul(h2, c2));
        };
        store.zero_grad();
        Tape t(&store);
        t.backward(eval(t));
        auto fd = finite_difference_grads(store, [&]() {
            Tape t2(&store);
            return t2.scalar(eval(t2));
        });
        REQUIRE(max_grad_relative_error(store, fd) < 1e-5);
    }
}

TEST_CASE("adam reduces a quadratic", "[nn]") {
    ParameterStore store;
    ParamId w = store.add("w", Tensor::from_vector({4.0, -3.0}));
    AdamOptimizer opt(store, 0.05);
    for (int i = 0; i < 400; ++i) {
        store.zero_grad();
        Tape t(&store);
        Var p = t.param(w);
        Var loss = t.sum(t.mul(p, p));
        t.backward(loss);
        opt.step();
    }
    REQUIRE(std::fabs(store.at(w).value.values()[0]) < 1e-2);
    REQUIRE(std::fabs(store.at(w).value.values()[1]) < 1e-2);
}
