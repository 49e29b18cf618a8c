#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dsa/core/error.hpp"

namespace dsa {

// Dense row-major tensor of 64-bit floats. Rank is dynamic; most of the code
// base uses rank 1 (vectors) and rank 2 (matrices, row-major).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (int d : shape_) {
            require_shape(d > 0, "Tensor: nonpositive dimension");
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, fill);
    }

    static Tensor from_vector(std::vector<double> v) {
        Tensor t;
        t.shape_ = {static_cast<int>(v.size())};
        t.data_ = std::move(v);
        return t;
    }

    static Tensor from_matrix(int rows, int cols, std::vector<double> v) {
        require_shape(static_cast<std::size_t>(rows) * cols == v.size(),
                      "Tensor: matrix data does not match shape");
        Tensor t;
        t.shape_ = {rows, cols};
        t.data_ = std::move(v);
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int rows() const { return dim(0); }
    int cols() const { return dim(1); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(int i, int j) {
        return data_[static_cast<std::size_t>(i) * cols() + j];
    }
    double at(int i, int j) const {
        return data_[static_cast<std::size_t>(i) * cols() + j];
    }

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

    void require_finite(const std::string& what) const {
        for (double v : data_)
            if (!std::isfinite(v)) throw NumericError(what + ": non-finite entry");
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace dsa
