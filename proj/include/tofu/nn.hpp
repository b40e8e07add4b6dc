#pragma once
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tofu/mat.hpp"
#include "tofu/rng.hpp"

namespace tofu {

enum class Activation { relu, identity };
enum class LossKind { cross_entropy, squared_error };

struct Layer {
    Mat W;                   // in x out
    std::vector<double> b;   // out
};

// A small feed-forward network: hidden layers use `activation` (with optional
// dropout in train mode), the last layer emits raw logits.
struct ModelParams {
    std::vector<Layer> layers;
    Activation activation = Activation::relu;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    double dropout_rate = 0.0;
    double weight_decay = 0.0;

    std::size_t num_params() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.W.a.size() + l.b.size();
        return n;
    }
};

inline void check_shapes(const ModelParams& p) {
    if (p.layers.empty()) throw std::invalid_argument("model has no layers");
    if (p.layers.front().W.rows != p.input_dim)
        throw std::invalid_argument("first layer rows != input_dim");
    if (p.layers.back().W.cols != p.output_dim)
        throw std::invalid_argument("last layer cols != output_dim");
    for (std::size_t k = 0; k + 1 < p.layers.size(); ++k)
        if (p.layers[k].W.cols != p.layers[k + 1].W.rows)
            throw std::invalid_argument("layer " + std::to_string(k) +
                                        " output width does not feed layer " + std::to_string(k + 1));
    for (std::size_t k = 0; k < p.layers.size(); ++k)
        if (p.layers[k].b.size() != p.layers[k].W.cols)
            throw std::invalid_argument("layer " + std::to_string(k) + " bias size != cols");
}

// Glorot-uniform weights, zero biases.
inline ModelParams make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                            Rng& rng, Activation act = Activation::relu, double dropout = 0.0,
                            double weight_decay = 0.0) {
    ModelParams p;
    p.activation = act;
    p.input_dim = in;
    p.output_dim = out;
    p.dropout_rate = dropout;
    p.weight_decay = weight_decay;
    std::vector<std::size_t> dims;
    dims.push_back(in);
    for (auto h : hidden) dims.push_back(h);
    dims.push_back(out);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        Layer l;
        l.W = Mat(dims[k], dims[k + 1]);
        l.b.assign(dims[k + 1], 0.0);
        const double limit = std::sqrt(6.0 / double(dims[k] + dims[k + 1]));
        for (double& w : l.W.a) w = rng.uniform(-limit, limit);
        p.layers.push_back(std::move(l));
    }
    return p;
}

struct Batch {
    Mat inputs;
    std::vector<int> labels;
    std::optional<int> group_id;
};

inline void check_batch(const Batch& b, std::size_t num_classes) {
    if (b.inputs.rows != b.labels.size())
        throw std::invalid_argument("batch: input rows != label count");
    for (int y : b.labels)
        if (y < 0 || std::size_t(y) >= num_classes)
            throw std::out_of_range("batch: label " + std::to_string(y) + " outside [0," +
                                    std::to_string(num_classes) + ")");
}

struct ForwardCache {
    std::vector<Mat> act;    // act[0] = input, act[k+1] = output of layer k (post dropout)
    std::vector<Mat> pre;    // pre[k] = pre-activation of layer k
    std::vector<Mat> mask;   // dropout mask per hidden layer (0 or 1/(1-p)); empty in eval mode
};

namespace detail {
inline void require_finite(const Mat& m, std::size_t layer, const char* what) {
    if (!m.finite())
        throw std::runtime_error(std::string("non-finite ") + what + " at layer " +
                                 std::to_string(layer));
}
}  // namespace detail

inline ForwardCache forward_cached(const ModelParams& p, const Mat& inputs, bool train_mode,
                                   Rng& rng) {
    if (inputs.cols != p.input_dim)
        throw std::invalid_argument("forward: input cols " + std::to_string(inputs.cols) +
                                    " != input_dim " + std::to_string(p.input_dim));
    ForwardCache c;
    c.act.reserve(p.layers.size() + 1);
    c.act.push_back(inputs);
    const bool use_dropout = train_mode && p.dropout_rate > 0.0;
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        const Layer& l = p.layers[k];
        Mat z = matmul(c.act.back(), l.W);
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zi = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) zi[j] += l.b[j];
        }
        detail::require_finite(z, k, "pre-activation");
        c.pre.push_back(z);
        const bool last = (k + 1 == p.layers.size());
        if (last) {
            c.act.push_back(std::move(z));
            break;
        }
        if (p.activation == Activation::relu)
            for (double& v : z.a) v = v > 0.0 ? v : 0.0;
        if (use_dropout) {
            Mat m(z.rows, z.cols);
            const double keep = 1.0 - p.dropout_rate;
            for (double& v : m.a) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
            for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] *= m.a[i];
            c.mask.push_back(std::move(m));
        }
        c.act.push_back(std::move(z));
    }
    return c;
}

inline Mat forward(const ModelParams& p, const Mat& inputs, bool train_mode, Rng& rng) {
    return forward_cached(p, inputs, train_mode, rng).act.back();
}

// Eval-mode forward; dropout is off so no rng is consumed.
inline Mat forward_eval(const ModelParams& p, const Mat& inputs) {
    Rng unused(0);
    return forward(p, inputs, false, unused);
}

// Mean negative log softmax probability of the true class, max-stabilized.
// Also returns the row-wise softmax probabilities.
inline std::pair<double, Mat> cross_entropy(const Mat& logits, const std::vector<int>& labels) {
    if (logits.rows != labels.size())
        throw std::invalid_argument("cross_entropy: rows != label count");
    Mat probs(logits.rows, logits.cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || std::size_t(y) >= logits.cols)
            throw std::out_of_range("cross_entropy: label " + std::to_string(y) +
                                    " outside [0," + std::to_string(logits.cols) + ")");
        const double* li = logits.row(i);
        double mx = li[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, li[j]);
        double sum = 0.0;
        double* pi = probs.row(i);
        for (std::size_t j = 0; j < logits.cols; ++j) {
            pi[j] = std::exp(li[j] - mx);
            sum += pi[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) pi[j] /= sum;
        loss += -(li[y] - mx - std::log(sum));
    }
    loss /= double(logits.rows);
    return {loss, std::move(probs)};
}

using Gradients = std::vector<Layer>;

inline Gradients zero_like(const ModelParams& p) {
    Gradients g;
    g.reserve(p.layers.size());
    for (const auto& l : p.layers) {
        Layer z;
        z.W = Mat(l.W.rows, l.W.cols);
        z.b.assign(l.b.size(), 0.0);
        g.push_back(std::move(z));
    }
    return g;
}

// Backpropagate d(loss)/d(logits) through the cached forward pass.
// Weight decay is NOT applied here; see backward().
inline Gradients backprop(const ModelParams& p, const ForwardCache& c, const Mat& dlogits) {
    Gradients g = zero_like(p);
    Mat delta = dlogits;
    for (std::size_t k = p.layers.size(); k-- > 0;) {
        g[k].W = matmul_at(c.act[k], delta);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* di = delta.row(i);
            for (std::size_t j = 0; j < delta.cols; ++j) g[k].b[j] += di[j];
        }
        detail::require_finite(g[k].W, k, "weight gradient");
        if (k == 0) break;
        Mat prev = matmul_bt(delta, p.layers[k].W);
        // through dropout, then through the activation of layer k-1
        if (!c.mask.empty() && k - 1 < c.mask.size())
            for (std::size_t i = 0; i < prev.a.size(); ++i) prev.a[i] *= c.mask[k - 1].a[i];
        if (p.activation == Activation::relu) {
            const Mat& z = c.pre[k - 1];
            for (std::size_t i = 0; i < prev.a.size(); ++i)
                if (z.a[i] <= 0.0) prev.a[i] = 0.0;
        }
        delta = std::move(prev);
    }
    return g;
}

inline void add_weight_decay(const ModelParams& p, Gradients& g) {
    if (p.weight_decay == 0.0) return;
    for (std::size_t k = 0; k < p.layers.size(); ++k)
        for (std::size_t i = 0; i < g[k].W.a.size(); ++i)
            g[k].W.a[i] += p.weight_decay * p.layers[k].W.a[i];
}

// Gradients of the mean loss plus the weight-decay term (weights only, not
// biases) with respect to every parameter.
inline Gradients backward(const ModelParams& p, const Batch& batch, LossKind kind, bool train_mode,
                          Rng& rng) {
    ForwardCache c = forward_cached(p, batch.inputs, train_mode, rng);
    const Mat& logits = c.act.back();
    const double n = double(logits.rows);
    Mat dlogits(logits.rows, logits.cols);
    if (kind == LossKind::cross_entropy) {
        auto [loss, probs] = cross_entropy(logits, batch.labels);
        (void)loss;
        dlogits = std::move(probs);
        for (std::size_t i = 0; i < dlogits.rows; ++i) dlogits(i, std::size_t(batch.labels[i])) -= 1.0;
    } else {
        // squared-logit surrogate: (1/2n) sum ||logits - onehot(y)||^2
        dlogits = logits;
        for (std::size_t i = 0; i < dlogits.rows; ++i) {
            const int y = batch.labels[i];
            if (y < 0 || std::size_t(y) >= dlogits.cols)
                throw std::out_of_range("backward: label outside logit range");
            dlogits(i, std::size_t(y)) -= 1.0;
        }
    }
    for (double& v : dlogits.a) v /= n;
    Gradients g = backprop(p, c, dlogits);
    add_weight_decay(p, g);
    return g;
}

inline double loss_value(const ModelParams& p, const Batch& batch, LossKind kind, bool train_mode,
                         Rng& rng) {
    Mat logits = forward(p, batch.inputs, train_mode, rng);
    if (kind == LossKind::cross_entropy) return cross_entropy(logits, batch.labels).first;
    double s = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        for (std::size_t j = 0; j < logits.cols; ++j) {
            const double t = (std::size_t(batch.labels[i]) == j) ? 1.0 : 0.0;
            const double d = logits(i, j) - t;
            s += 0.5 * d * d;
        }
    }
    return s / double(logits.rows);
}

struct AdamState {
    long step_count = 0;
    std::vector<Layer> first_moment;
    std::vector<Layer> second_moment;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState like(const ModelParams& p, double lr) {
        AdamState s;
        s.learning_rate = lr;
        s.first_moment = zero_like(p);
        s.second_moment = zero_like(p);
        return s;
    }
};

// Standard bias-corrected Adam update, elementwise, in place.
inline void adam_step(AdamState& s, ModelParams& p, const Gradients& g) {
    if (g.size() != p.layers.size() || s.first_moment.size() != p.layers.size())
        throw std::invalid_argument("adam_step: layer count mismatch");
    s.step_count += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, double(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, double(s.step_count));
    auto update = [&](double& param, double& m, double& v, double grad) {
        m = s.beta1 * m + (1.0 - s.beta1) * grad;
        v = s.beta2 * v + (1.0 - s.beta2) * grad * grad;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        param -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    };
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        Layer& l = p.layers[k];
        if (!g[k].W.same_shape(l.W) || g[k].b.size() != l.b.size())
            throw std::invalid_argument("adam_step: shape mismatch at layer " + std::to_string(k));
        for (std::size_t i = 0; i < l.W.a.size(); ++i)
            update(l.W.a[i], s.first_moment[k].W.a[i], s.second_moment[k].W.a[i], g[k].W.a[i]);
        for (std::size_t i = 0; i < l.b.size(); ++i)
            update(l.b[i], s.first_moment[k].b[i], s.second_moment[k].b[i], g[k].b[i]);
    }
}

inline std::vector<int> predict_argmax(const Mat& logits) {
    std::vector<int> out(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* li = logits.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j)
            if (li[j] > li[best]) best = j;
        out[i] = int(best);
    }
    return out;
}

}  // namespace tofu
