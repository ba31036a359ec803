#pragma once

// Scalar activation functions, their componentwise application and
// iterated composition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "narrownet/box.hpp"

namespace narrow {

enum class ActivationKind { relu, leaky_relu, elu, celu, selu, softplus, hardtanh, relu6 };

inline std::string_view to_token(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::leaky_relu: return "leaky_relu";
        case ActivationKind::elu: return "elu";
        case ActivationKind::celu: return "celu";
        case ActivationKind::selu: return "selu";
        case ActivationKind::softplus: return "softplus";
        case ActivationKind::hardtanh: return "hardtanh";
        case ActivationKind::relu6: return "relu6";
    }
    return "unknown";
}

inline ActivationKind kind_from_token(std::string_view token) {
    for (auto k : {ActivationKind::relu, ActivationKind::leaky_relu, ActivationKind::elu,
                   ActivationKind::celu, ActivationKind::selu, ActivationKind::softplus,
                   ActivationKind::hardtanh, ActivationKind::relu6}) {
        if (to_token(k) == token) return k;
    }
    throw std::invalid_argument("unknown activation kind '" + std::string(token) + "'");
}

inline bool is_parametrized(ActivationKind kind) {
    return kind != ActivationKind::relu && kind != ActivationKind::hardtanh &&
           kind != ActivationKind::relu6;
}

/// A parametrized scalar nonlinearity. Parameters are validated on
/// construction; evaluation never throws.
///
/// `beta` is the slope (LeakyReLU), the saturation scale (ELU, CELU, SELU)
/// or the sharpness (Softplus). `lambda` is the SELU output scale.
class Activation {
public:
    Activation() = default;

    explicit Activation(ActivationKind kind, double beta = 1.0, double lambda = 1.0)
        : kind_(kind), beta_(beta), lambda_(lambda) {
        if (is_parametrized(kind_) && !(beta_ > 0.0 && std::isfinite(beta_)))
            throw std::invalid_argument(std::string(to_token(kind_)) + ": beta must be positive");
        if (kind_ == ActivationKind::selu && !(lambda_ > 0.0 && std::isfinite(lambda_)))
            throw std::invalid_argument("selu: lambda must be positive");
        if (!is_parametrized(kind_)) beta_ = 1.0;
        if (kind_ != ActivationKind::selu) lambda_ = 1.0;
    }

    static Activation relu() { return Activation(ActivationKind::relu); }
    static Activation leaky_relu(double beta) { return Activation(ActivationKind::leaky_relu, beta); }
    static Activation elu(double beta) { return Activation(ActivationKind::elu, beta); }
    static Activation celu(double beta) { return Activation(ActivationKind::celu, beta); }
    static Activation selu(double lambda, double beta) {
        return Activation(ActivationKind::selu, beta, lambda);
    }
    static Activation softplus(double beta) { return Activation(ActivationKind::softplus, beta); }
    static Activation hardtanh() { return Activation(ActivationKind::hardtanh); }
    static Activation relu6() { return Activation(ActivationKind::relu6); }

    ActivationKind kind() const { return kind_; }
    double beta() const { return beta_; }
    double lambda() const { return lambda_; }

    double operator()(double x) const {
        switch (kind_) {
            case ActivationKind::relu: return x >= 0.0 ? x : 0.0;
            case ActivationKind::leaky_relu: return x >= 0.0 ? x : beta_ * x;
            case ActivationKind::elu: return x >= 0.0 ? x : beta_ * std::expm1(x);
            case ActivationKind::celu: return x >= 0.0 ? x : beta_ * std::expm1(x / beta_);
            case ActivationKind::selu: return lambda_ * (x >= 0.0 ? x : beta_ * std::expm1(x));
            case ActivationKind::softplus:
                // max(x, 0) + log1p(exp(-beta |x|)) / beta, overflow-free form
                return std::max(x, 0.0) + std::log1p(std::exp(-beta_ * std::abs(x))) / beta_;
            case ActivationKind::hardtanh: return std::clamp(x, -1.0, 1.0);
            case ActivationKind::relu6: return std::clamp(x, 0.0, 6.0);
        }
        return x;
    }

    /// Derivative. At a kink the derivative of the branch to the left of
    /// the break point is used (ReLU'(0) = 0, HardTanh'(1) = 1).
    double derivative(double x) const {
        switch (kind_) {
            case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
            case ActivationKind::leaky_relu: return x > 0.0 ? 1.0 : beta_;
            case ActivationKind::elu: return x > 0.0 ? 1.0 : beta_ * std::exp(x);
            case ActivationKind::celu: return x > 0.0 ? 1.0 : std::exp(x / beta_);
            case ActivationKind::selu: return lambda_ * (x > 0.0 ? 1.0 : beta_ * std::exp(x));
            case ActivationKind::softplus: {
                // logistic(beta x), evaluated without overflow
                const double e = std::exp(-beta_ * std::abs(x));
                return x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
            }
            case ActivationKind::hardtanh: return (x > -1.0 && x <= 1.0) ? 1.0 : 0.0;
            case ActivationKind::relu6: return (x > 0.0 && x <= 6.0) ? 1.0 : 0.0;
        }
        return 1.0;
    }

    /// Points where the piecewise definition switches branches.
    std::vector<double> break_points() const {
        switch (kind_) {
            case ActivationKind::softplus: return {};
            case ActivationKind::hardtanh: return {-1.0, 1.0};
            case ActivationKind::relu6: return {0.0, 6.0};
            default: return {0.0};
        }
    }

    friend bool operator==(const Activation&, const Activation&) = default;

private:
    ActivationKind kind_ = ActivationKind::relu;
    double beta_ = 1.0;
    double lambda_ = 1.0;
};

inline double eval(const Activation& act, double x) { return act(x); }

inline Eigen::VectorXd eval_vec(const Activation& act, const Eigen::VectorXd& x) {
    return x.unaryExpr([&act](double v) { return act(v); });
}

/// n-fold composition act(act(...act(x))).
inline double iterate(const Activation& act, std::size_t n, double x) {
    if (n == 0) throw std::invalid_argument("iterate: n must be >= 1");
    for (std::size_t i = 0; i < n; ++i) x = act(x);
    return x;
}

inline constexpr std::size_t default_grid_points = 10001;

struct IterationHypotheses {
    bool holds = false;
    double b = 0.0;  ///< max sampled ratio act(x)/x on [x_lo, c]
};

/// Grid evidence (not a proof) for the two conditions under which the
/// iterates of `act` converge to ReLU: act(x) = x for x >= 0, and
/// 0 <= act(x)/x <= b < 1 on (-inf, c].
inline IterationHypotheses check_iteration_hypotheses(const Activation& act, double c,
                                                      std::size_t samples = default_grid_points,
                                                      double x_lo = -100.0) {
    if (!(c < 0.0)) throw std::invalid_argument("check_iteration_hypotheses: c must be negative");
    if (samples < 2) throw std::invalid_argument("check_iteration_hypotheses: samples must be >= 2");
    x_lo = std::min(x_lo, c);

    bool identity_right = true;
    const double hi = -x_lo;
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = hi * static_cast<double>(i) / static_cast<double>(samples - 1);
        if (std::abs(act(x) - x) > 1e-12 * std::max(1.0, std::abs(x))) {
            identity_right = false;
            break;
        }
    }

    bool nonnegative = true;
    double b = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = grid_coordinate(x_lo, c, i, samples);
        const double r = act(x) / x;
        if (r < 0.0) nonnegative = false;
        b = std::max(b, r);
    }
    return {identity_right && nonnegative && b < 1.0, b};
}

/// Grid estimate of sup |act^n(x) - ReLU(x)| over a one-dimensional box.
inline double iterated_relu_error(const Activation& act, std::size_t n, const Box& domain,
                                  std::size_t grid = default_grid_points) {
    if (domain.dim() != 1) throw std::invalid_argument("iterated_relu_error: domain must be 1-d");
    if (n == 0) throw std::invalid_argument("iterated_relu_error: n must be >= 1");
    double worst = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
        const double x = grid_coordinate(domain.low(0), domain.high(0), i, grid);
        worst = std::max(worst, std::abs(iterate(act, n, x) - std::max(x, 0.0)));
    }
    return worst;
}

}  // namespace narrow
