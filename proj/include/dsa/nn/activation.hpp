#pragma once

#include <cmath>
#include <string>

#include "dsa/core/error.hpp"

namespace dsa::nn {

enum class Activation { Identity, Tanh, Relu, Softplus, Sigmoid };

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Inverse of softplus, defined for y > 0.
inline double softplus_inverse(double y) {
    require(y > 0.0, "softplus_inverse: argument must be positive");
    // log(exp(y) - 1), stable for both small and large y.
    return y > 30.0 ? y : std::log(std::expm1(y));
}

inline double activate(Activation f, double x) {
    switch (f) {
        case Activation::Identity: return x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Softplus: return softplus(x);
        case Activation::Sigmoid: return sigmoid(x);
    }
    throw DataError("activate: unknown activation");
}

// Derivative at x, given the already-computed output y = activate(f, x).
inline double activate_grad(Activation f, double x, double y) {
    switch (f) {
        case Activation::Identity: return 1.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Softplus: return sigmoid(x);
        case Activation::Sigmoid: return y * (1.0 - y);
    }
    throw DataError("activate_grad: unknown activation");
}

inline std::string activation_name(Activation f) {
    switch (f) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Softplus: return "softplus";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "softplus") return Activation::Softplus;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ConfigError("unknown activation: " + s);
}

}  // namespace dsa::nn
