#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "icl/error.hpp"

namespace icl {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vec = VecX<double>;
using Matrix = RowMatX<double>;

/// true = action allowed.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Exact equality including shape (Eigen's operator== requires equal shapes).
template <typename A, typename B>
bool same(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.derived().array() == b.derived().array()).all();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
    return x.derived().array().isFinite().all();
}

/// Numerically stable softmax over the allowed entries; disallowed entries are exactly 0.
template <typename Derived>
VecX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits, const Mask* mask = nullptr) {
    using Scalar = typename Derived::Scalar;
    const auto n = logits.size();
    if (mask && mask->size() != n) throw Error("shape_mismatch", "mask length differs from logits length");
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!mask || (*mask)(i)) hi = std::max(hi, logits(i));
    if (!std::isfinite(hi)) throw Error("empty_action_space", "empty action space");

    VecX<Scalar> out = VecX<Scalar>::Zero(n);
    Scalar total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (mask && !(*mask)(i)) continue;
        out(i) = std::exp(logits(i) - hi);
        total += out(i);
    }
    out /= total;
    return out;
}

/// log-softmax over allowed entries; disallowed entries are -inf.
template <typename Derived>
VecX<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits, const Mask* mask = nullptr) {
    using Scalar = typename Derived::Scalar;
    const auto n = logits.size();
    if (mask && mask->size() != n) throw Error("shape_mismatch", "mask length differs from logits length");
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!mask || (*mask)(i)) hi = std::max(hi, logits(i));
    if (!std::isfinite(hi)) throw Error("empty_action_space", "empty action space");
    Scalar total = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!mask || (*mask)(i)) total += std::exp(logits(i) - hi);
    const Scalar lse = hi + std::log(total);
    VecX<Scalar> out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out(i) = (!mask || (*mask)(i)) ? logits(i) - lse : -std::numeric_limits<Scalar>::infinity();
    return out;
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
    const auto hi = v.maxCoeff();
    return hi + std::log((v.array() - hi).exp().sum());
}

/// Numerically stable -log(sigmoid(x)).
template <typename Scalar>
Scalar softplus_neg(Scalar x) {
    return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

template <typename Scalar>
struct Mlp2Grad;

/// Two-layer perceptron with tanh hidden units and a scalar output:
///   y = w2 . tanh(W1^T x + b1) + b2
template <typename Scalar>
struct Mlp2 {
    RowMatX<Scalar> w1;  // input_dim x hidden
    VecX<Scalar> b1;
    VecX<Scalar> w2;     // hidden x 1
    Scalar b2 = 0;

    Mlp2() = default;
    Mlp2(Eigen::Index input_dim, Eigen::Index hidden)
        : w1(RowMatX<Scalar>::Zero(input_dim, hidden)),
          b1(VecX<Scalar>::Zero(hidden)),
          w2(VecX<Scalar>::Zero(hidden)) {
        if (hidden <= 0) throw Error("invalid_argument", "hidden width must be positive");
    }

    Eigen::Index input_dim() const { return w1.rows(); }
    Eigen::Index hidden() const { return w1.cols(); }
    Eigen::Index num_params() const { return w1.size() + b1.size() + w2.size() + 1; }

    /// Glorot-uniform weights, zero biases.
    template <typename Rng>
    void init_random(Rng& rng) {
        const Scalar a1 = std::sqrt(Scalar(6) / Scalar(input_dim() + hidden()));
        const Scalar a2 = std::sqrt(Scalar(6) / Scalar(hidden() + 1));
        std::uniform_real_distribution<Scalar> u1(-a1, a1), u2(-a2, a2);
        for (Eigen::Index i = 0; i < w1.rows(); ++i)
            for (Eigen::Index j = 0; j < w1.cols(); ++j) w1(i, j) = u1(rng);
        for (Eigen::Index j = 0; j < w2.size(); ++j) w2(j) = u2(rng);
        b1.setZero();
        b2 = 0;
    }

    template <typename Derived>
    void check_input(const Eigen::MatrixBase<Derived>& x) const {
        if (x.size() != input_dim())
            throw Error("shape_mismatch", "mlp input has length " + std::to_string(x.size()) + ", expected " +
                                              std::to_string(input_dim()));
    }

    template <typename Derived>
    Scalar forward(const Eigen::MatrixBase<Derived>& x) const {
        check_input(x);
        const VecX<Scalar> a = ((w1.transpose() * x).array() + b1.array()).tanh().matrix();
        return w2.dot(a) + b2;
    }

    template <typename Derived>
    Mlp2Grad<Scalar> backward(const Eigen::MatrixBase<Derived>& x, Scalar upstream) const;

    /// One output per row of `xs` (batch x input_dim).
    VecX<Scalar> forward_batch(const RowMatX<Scalar>& xs) const {
        if (xs.cols() != input_dim()) throw Error("shape_mismatch", "mlp batch input width mismatch");
        const RowMatX<Scalar> a = ((xs * w1).rowwise() + b1.transpose()).array().tanh().matrix();
        return (a * w2).array() + b2;
    }

    /// Gradient of sum_i upstream(i) * forward(row i); the input gradient is left empty.
    Mlp2Grad<Scalar> backward_batch(const RowMatX<Scalar>& xs, const VecX<Scalar>& upstream) const;

    /// Parameters flattened in the order w1 (row-major), b1, w2, b2.
    VecX<Scalar> flatten() const {
        VecX<Scalar> out(num_params());
        Eigen::Index o = 0;
        out.segment(o, w1.size()) = Eigen::Map<const VecX<Scalar>>(w1.data(), w1.size());
        o += w1.size();
        out.segment(o, b1.size()) = b1;
        o += b1.size();
        out.segment(o, w2.size()) = w2;
        o += w2.size();
        out(o) = b2;
        return out;
    }

    void unflatten(const Eigen::Ref<const VecX<Scalar>>& p) {
        if (p.size() != num_params()) throw Error("shape_mismatch", "parameter vector length mismatch");
        Eigen::Index o = 0;
        Eigen::Map<VecX<Scalar>>(w1.data(), w1.size()) = p.segment(o, w1.size());
        o += w1.size();
        b1 = p.segment(o, b1.size());
        o += b1.size();
        w2 = p.segment(o, w2.size());
        o += w2.size();
        b2 = p(o);
    }

    friend bool operator==(const Mlp2& a, const Mlp2& b) {
        return same(a.w1, b.w1) && same(a.b1, b.b1) && same(a.w2, b.w2) && a.b2 == b.b2;
    }
};

template <typename Scalar>
struct Mlp2Grad {
    RowMatX<Scalar> w1;
    VecX<Scalar> b1;
    VecX<Scalar> w2;
    Scalar b2 = 0;
    VecX<Scalar> input;

    static Mlp2Grad zeros_like(const Mlp2<Scalar>& m) {
        Mlp2Grad g;
        g.w1 = RowMatX<Scalar>::Zero(m.w1.rows(), m.w1.cols());
        g.b1 = VecX<Scalar>::Zero(m.b1.size());
        g.w2 = VecX<Scalar>::Zero(m.w2.size());
        g.b2 = 0;
        g.input = VecX<Scalar>::Zero(m.input_dim());
        return g;
    }

    Mlp2Grad& operator+=(const Mlp2Grad& o) {
        w1 += o.w1;
        b1 += o.b1;
        w2 += o.w2;
        b2 += o.b2;
        input += o.input;
        return *this;
    }

    Mlp2Grad& operator*=(Scalar s) {
        w1 *= s;
        b1 *= s;
        w2 *= s;
        b2 *= s;
        input *= s;
        return *this;
    }

    /// Same layout as Mlp2::flatten (input gradient excluded).
    VecX<Scalar> flatten() const {
        VecX<Scalar> out(w1.size() + b1.size() + w2.size() + 1);
        Eigen::Index o = 0;
        out.segment(o, w1.size()) = Eigen::Map<const VecX<Scalar>>(w1.data(), w1.size());
        o += w1.size();
        out.segment(o, b1.size()) = b1;
        o += b1.size();
        out.segment(o, w2.size()) = w2;
        o += w2.size();
        out(o) = b2;
        return out;
    }
};

template <typename Scalar>
template <typename Derived>
Mlp2Grad<Scalar> Mlp2<Scalar>::backward(const Eigen::MatrixBase<Derived>& x, Scalar upstream) const {
    check_input(x);
    const VecX<Scalar> a = ((w1.transpose() * x).array() + b1.array()).tanh().matrix();
    Mlp2Grad<Scalar> g;
    g.b2 = upstream;
    g.w2 = upstream * a;
    // d tanh(u) = 1 - tanh(u)^2
    const VecX<Scalar> du = (upstream * w2.array() * (Scalar(1) - a.array().square())).matrix();
    g.b1 = du;
    g.w1 = x * du.transpose();
    g.input = w1 * du;
    return g;
}

template <typename Scalar>
Mlp2Grad<Scalar> Mlp2<Scalar>::backward_batch(const RowMatX<Scalar>& xs, const VecX<Scalar>& upstream) const {
    if (xs.cols() != input_dim() || xs.rows() != upstream.size())
        throw Error("shape_mismatch", "mlp batch backward shape mismatch");
    const RowMatX<Scalar> a = ((xs * w1).rowwise() + b1.transpose()).array().tanh().matrix();
    Mlp2Grad<Scalar> g;
    g.b2 = upstream.sum();
    g.w2 = a.transpose() * upstream;
    const RowMatX<Scalar> du =
        ((upstream * w2.transpose()).array() * (Scalar(1) - a.array().square())).matrix();
    g.b1 = du.colwise().sum().transpose();
    g.w1 = xs.transpose() * du;
    return g;
}

/// Adam with bias correction over one flat parameter block.
template <typename Scalar>
struct AdamState {
    Scalar lr = Scalar(1e-3);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);
    VecX<Scalar> m;
    VecX<Scalar> v;
    long step = 0;

    AdamState() = default;
    AdamState(Eigen::Index size, Scalar learning_rate)
        : lr(learning_rate), m(VecX<Scalar>::Zero(size)), v(VecX<Scalar>::Zero(size)) {}
};

template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Eigen::Ref<VecX<Scalar>> params, const Eigen::Ref<const VecX<Scalar>>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw Error("shape_mismatch", "adam: parameter, gradient and moment shapes differ");
    if (!all_finite(grads)) throw Error("non_finite", "adam: non-finite gradient");
    ++state.step;
    state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * grads;
    state.v = state.beta2 * state.v + (Scalar(1) - state.beta2) * grads.cwiseProduct(grads);
    const Scalar c1 = Scalar(1) - std::pow(state.beta1, Scalar(state.step));
    const Scalar c2 = Scalar(1) - std::pow(state.beta2, Scalar(state.step));
    params.array() -= state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

/// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
/// numeric gradient by central differences.
template <typename Scalar>
Scalar grad_check(const std::function<Scalar(const VecX<Scalar>&)>& f, const VecX<Scalar>& theta,
                  const VecX<Scalar>& analytic, Scalar step = Scalar(1e-5)) {
    if (analytic.size() != theta.size()) throw Error("shape_mismatch", "grad_check: gradient length mismatch");
    Scalar worst = 0;
    VecX<Scalar> probe = theta;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        probe(i) = theta(i) + step;
        const Scalar up = f(probe);
        probe(i) = theta(i) - step;
        const Scalar down = f(probe);
        probe(i) = theta(i);
        const Scalar numeric = (up - down) / (Scalar(2) * step);
        const Scalar denom = std::max(Scalar(1e-8), std::abs(analytic(i)) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
    }
    return worst;
}

}  // namespace icl
