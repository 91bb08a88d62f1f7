#include "czopt/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace czopt {

namespace {

// y[B x out] = x[B x in] w^T[in x out] + b
void linear_forward(const RealMatrix& x, const RealMatrix& w, const std::vector<double>& b,
                    RealMatrix& y) {
    const std::size_t batch = x.rows, in = x.cols, out = w.rows;
#pragma omp parallel for schedule(static) if (batch * in * out > 16384)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch); ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        for (std::size_t j = 0; j < out; ++j) {
            const double* wj = w.row(j);
            double acc = b[j];
            for (std::size_t k = 0; k < in; ++k) acc += xi[k] * wj[k];
            yi[j] = acc;
        }
    }
}

// dx[B x in] = dy[B x out] w[out x in]
void linear_backward_input(const RealMatrix& dy, const RealMatrix& w, RealMatrix& dx) {
    const std::size_t batch = dy.rows, out = dy.cols, in = w.cols;
#pragma omp parallel for schedule(static) if (batch * in * out > 16384)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch); ++i) {
        const double* dyi = dy.row(i);
        double* dxi = dx.row(i);
        for (std::size_t k = 0; k < in; ++k) dxi[k] = 0.0;
        for (std::size_t j = 0; j < out; ++j) {
            const double d = dyi[j];
            const double* wj = w.row(j);
            for (std::size_t k = 0; k < in; ++k) dxi[k] += d * wj[k];
        }
    }
}

// dw[out x in] += dy^T x ; db += column sums of dy
void linear_backward_params(const RealMatrix& dy, const RealMatrix& x, RealMatrix& dw,
                            std::vector<double>& db) {
    const std::size_t batch = dy.rows, out = dy.cols, in = x.cols;
#pragma omp parallel for schedule(static) if (batch * in * out > 16384)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(out); ++j) {
        double* dwj = dw.row(j);
        double bacc = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            const double d = dy(i, j);
            bacc += d;
            const double* xi = x.row(i);
            for (std::size_t k = 0; k < in; ++k) dwj[k] += d * xi[k];
        }
        db[j] += bacc;
    }
}

}  // namespace

Mlp Mlp::make(const std::vector<int>& sizes, Rng& rng, double final_scale) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    Mlp net;
    net.in_dim_ = sizes.front();
    net.out_dim_ = sizes.back();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        const int in = sizes[l], out = sizes[l + 1];
        layer.w = RealMatrix(out, in);
        layer.b.assign(out, 0.0);
        const bool last = (l + 2 == sizes.size());
        const double scale = std::sqrt(2.0 / in) * (last ? final_scale : 1.0);
        for (double& w : layer.w.a) w = scale * rng.normal();
        layer.act = last ? Act::Linear : Act::Relu;
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

RealMatrix Mlp::forward(const RealMatrix& x, Forward& cache) const {
    cache.acts.clear();
    cache.acts.reserve(layers_.size() + 1);
    cache.acts.push_back(x);
    for (const Layer& layer : layers_) {
        RealMatrix y(cache.acts.back().rows, layer.w.rows);
        linear_forward(cache.acts.back(), layer.w, layer.b, y);
        if (layer.act == Act::Relu)
            for (double& v : y.a) v = (v > 0.0) ? v : 0.0;
        cache.acts.push_back(std::move(y));
    }
    return cache.acts.back();
}

RealMatrix Mlp::forward(const RealMatrix& x) const {
    Forward cache;
    return forward(x, cache);
}

Mlp::Grads Mlp::zero_grads() const {
    Grads g;
    for (const Layer& layer : layers_) {
        g.dw.emplace_back(layer.w.rows, layer.w.cols);
        g.db.emplace_back(layer.b.size(), 0.0);
    }
    return g;
}

RealMatrix Mlp::backward(const Forward& cache, const RealMatrix& dy, Grads& g) const {
    RealMatrix delta = dy;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        if (layer.act == Act::Relu) {
            const RealMatrix& post = cache.acts[l + 1];
            for (std::size_t i = 0; i < delta.a.size(); ++i)
                if (post.a[i] <= 0.0) delta.a[i] = 0.0;
        }
        linear_backward_params(delta, cache.acts[l], g.dw[l], g.db[l]);
        RealMatrix dx(delta.rows, layer.w.cols);
        linear_backward_input(delta, layer.w, dx);
        delta = std::move(dx);
    }
    return delta;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += l.w.a.size() + l.b.size();
    return n;
}

std::vector<double> Mlp::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const Layer& l : layers_) {
        flat.insert(flat.end(), l.w.a.begin(), l.w.a.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void Mlp::unflatten(const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (Layer& l : layers_) {
        for (double& w : l.w.a) w = flat[pos++];
        for (double& b : l.b) b = flat[pos++];
    }
    if (pos != flat.size()) throw std::invalid_argument("Mlp::unflatten: size mismatch");
}

std::vector<double> Mlp::flatten_grads(const Grads& g) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
        flat.insert(flat.end(), g.dw[l].a.begin(), g.dw[l].a.end());
        flat.insert(flat.end(), g.db[l].begin(), g.db[l].end());
    }
    return flat;
}

void Adam::step(Mlp& net, const Mlp::Grads& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    std::size_t pos = 0;
    auto update = [&](double& param, double g) {
        m_[pos] = beta1_ * m_[pos] + (1.0 - beta1_) * g;
        v_[pos] = beta2_ * v_[pos] + (1.0 - beta2_) * g * g;
        param -= lr_ * (m_[pos] / bc1) / (std::sqrt(v_[pos] / bc2) + eps_);
        ++pos;
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].w.a.size(); ++i)
            update(layers[l].w.a[i], grads.dw[l].a[i]);
        for (std::size_t i = 0; i < layers[l].b.size(); ++i)
            update(layers[l].b[i], grads.db[l][i]);
    }
}

}  // namespace czopt
