#pragma once

#include <cstddef>
#include <vector>

#include "czopt/rng.hpp"

namespace czopt {

// Row-major real matrix for batched network math.
struct RealMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
};

enum class Act { Relu, Linear };

// Plain fully-connected network with explicit forward caches and hand-rolled
// backprop. Weight layout per layer: w[out x in], y = x w^T + b.
class Mlp {
public:
    struct Layer {
        RealMatrix w;
        std::vector<double> b;
        Act act = Act::Relu;
    };

    Mlp() = default;
    // sizes = {in, h1, ..., out}; hidden layers ReLU, output linear
    static Mlp make(const std::vector<int>& sizes, Rng& rng, double final_scale = 1.0);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }

    struct Forward {
        std::vector<RealMatrix> acts;  // acts[0] = input, acts[L] = output
    };

    RealMatrix forward(const RealMatrix& x) const;
    RealMatrix forward(const RealMatrix& x, Forward& cache) const;

    struct Grads {
        std::vector<RealMatrix> dw;
        std::vector<std::vector<double>> db;
    };
    Grads zero_grads() const;

    // Backpropagates dy (same shape as the output); accumulates parameter
    // gradients into g and returns the input gradient.
    RealMatrix backward(const Forward& cache, const RealMatrix& dy, Grads& g) const;

    std::size_t param_count() const;
    // flat views used by the optimizer, finite-difference tests and checkpoints
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
    static std::vector<double> flatten_grads(const Grads& g);

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

private:
    std::vector<Layer> layers_;
    int in_dim_ = 0, out_dim_ = 0;
};

// Adam with bias correction over an Mlp's flat parameter vector.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t n_params, double lr) : lr_(lr), m_(n_params, 0.0), v_(n_params, 0.0) {}
    void step(Mlp& net, const Mlp::Grads& grads);
    double lr() const { return lr_; }

private:
    double lr_ = 3e-4;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace czopt
