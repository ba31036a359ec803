#pragma once

// Fully connected networks x -> T_L o sigma_{L-1} o T_{L-1} o ... o sigma_0 o T_0 (x),
// where each T_k is an affine map and each sigma_k acts componentwise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "narrownet/activation.hpp"
#include "narrownet/box.hpp"
#include "narrownet/random.hpp"

namespace narrow {

/// x -> W x + b.
struct AffineMap {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;

    AffineMap() = default;
    AffineMap(Eigen::MatrixXd weights, Eigen::VectorXd bias) : W(std::move(weights)), b(std::move(bias)) {
        if (W.rows() != b.size())
            throw std::invalid_argument("AffineMap: bias length " + std::to_string(b.size()) +
                                        " does not match " + std::to_string(W.rows()) + " output rows");
        if (!W.allFinite() || !b.allFinite()) throw std::invalid_argument("AffineMap: non-finite entry");
    }

    static AffineMap identity(Eigen::Index dim) {
        return {Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
    }

    /// Scalar-diagonal map x -> scale * x + shift * 1.
    static AffineMap diagonal(Eigen::Index dim, double scale, double shift) {
        return {scale * Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Constant(dim, shift)};
    }

    Eigen::Index in_dim() const { return W.cols(); }
    Eigen::Index out_dim() const { return W.rows(); }

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return W * x + b; }

    /// (*this) o inner
    AffineMap after(const AffineMap& inner) const { return {W * inner.W, W * inner.b + b}; }

    friend bool operator==(const AffineMap& l, const AffineMap& r) {
        return l.W.rows() == r.W.rows() && l.W.cols() == r.W.cols() && l.W == r.W && l.b == r.b;
    }
};

struct Layer {
    AffineMap affine;
    Activation activation;

    friend bool operator==(const Layer&, const Layer&) = default;
};

class NeuralNet {
public:
    NeuralNet() = default;

    NeuralNet(std::vector<Layer> layers, AffineMap final_map)
        : layers_(std::move(layers)), final_(std::move(final_map)) {
        Eigen::Index dim = layers_.empty() ? final_.in_dim() : layers_.front().affine.in_dim();
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            if (layers_[k].affine.in_dim() != dim)
                throw std::invalid_argument("NeuralNet: layer " + std::to_string(k) + " expects input dim " +
                                            std::to_string(layers_[k].affine.in_dim()) + ", got " +
                                            std::to_string(dim));
            dim = layers_[k].affine.out_dim();
        }
        if (final_.in_dim() != dim)
            throw std::invalid_argument("NeuralNet: final map expects input dim " +
                                        std::to_string(final_.in_dim()) + ", got " + std::to_string(dim));
    }

    /// Affine-only network.
    explicit NeuralNet(AffineMap final_map) : NeuralNet({}, std::move(final_map)) {}

    const std::vector<Layer>& layers() const { return layers_; }
    const AffineMap& final_map() const { return final_; }

    std::size_t input_dim() const {
        return static_cast<std::size_t>(layers_.empty() ? final_.in_dim() : layers_.front().affine.in_dim());
    }
    std::size_t output_dim() const { return static_cast<std::size_t>(final_.out_dim()); }

    /// Number of activation layers.
    std::size_t depth() const { return layers_.size(); }

    /// Largest hidden layer size; 0 for an affine-only network.
    std::size_t width() const {
        Eigen::Index w = 0;
        for (const auto& l : layers_) w = std::max(w, l.affine.out_dim());
        return static_cast<std::size_t>(w);
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        if (static_cast<std::size_t>(x.size()) != input_dim())
            throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                        ", network expects " + std::to_string(input_dim()));
        Eigen::VectorXd h = x;
        for (const auto& l : layers_) h = eval_vec(l.activation, l.affine(h));
        return final_(h);
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return forward(x); }

    /// Forward pass over the columns of `x`.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
        if (static_cast<std::size_t>(x.rows()) != input_dim())
            throw std::invalid_argument("forward_batch: input has dimension " + std::to_string(x.rows()) +
                                        ", network expects " + std::to_string(input_dim()));
        Eigen::MatrixXd h = x;
        for (const auto& l : layers_) {
            Eigen::MatrixXd z = (l.affine.W * h).colwise() + l.affine.b;
            h = z.unaryExpr([&l](double v) { return l.activation(v); });
        }
        return (final_.W * h).colwise() + final_.b;
    }

    friend bool operator==(const NeuralNet&, const NeuralNet&) = default;

private:
    std::vector<Layer> layers_;
    AffineMap final_;
};

/// Assembles networks stage by stage. Consecutive affine maps are merged so
/// that the result alternates affine maps and activations.
class NetBuilder {
public:
    explicit NetBuilder(Eigen::Index input_dim) : pending_(AffineMap::identity(input_dim)) {}

    NetBuilder& affine(const AffineMap& map) {
        pending_ = map.after(pending_);
        return *this;
    }

    NetBuilder& activation(const Activation& act) {
        layers_.push_back({pending_, act});
        pending_ = AffineMap::identity(pending_.out_dim());
        return *this;
    }

    /// Appends every stage of `net` (its layers, then its final map).
    NetBuilder& append(const NeuralNet& net) {
        for (const auto& l : net.layers()) affine(l.affine).activation(l.activation);
        return affine(net.final_map());
    }

    Eigen::Index current_dim() const { return pending_.out_dim(); }

    NeuralNet build() const { return NeuralNet(layers_, pending_); }

private:
    std::vector<Layer> layers_;
    AffineMap pending_;
};

/// A map between Euclidean spaces with declared dimensions.
struct VecMap {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn;

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return fn(x); }
};

inline VecMap as_map(const NeuralNet& net) {
    return {net.input_dim(), net.output_dim(), [net](const Eigen::VectorXd& x) { return net.forward(x); }};
}

inline VecMap scalar_map(std::function<double(double)> f) {
    return {1, 1, [f = std::move(f)](const Eigen::VectorXd& x) {
                Eigen::VectorXd y(1);
                y[0] = f(x[0]);
                return y;
            }};
}

// ---------------------------------------------------------------------------
// Zero padding

/// Widens every hidden layer to exactly `k` units by appending zero rows and
/// columns. Outputs are bitwise identical to the original.
inline NeuralNet zero_pad(const NeuralNet& net, std::size_t k) {
    if (k < net.width())
        throw std::invalid_argument("zero_pad: target width " + std::to_string(k) + " is below network width " +
                                    std::to_string(net.width()));
    const auto kk = static_cast<Eigen::Index>(k);
    std::vector<Layer> layers;
    Eigen::Index in = static_cast<Eigen::Index>(net.input_dim());
    for (const auto& l : net.layers()) {
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(kk, in);
        W.topLeftCorner(l.affine.W.rows(), l.affine.W.cols()) = l.affine.W;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(kk);
        b.head(l.affine.b.size()) = l.affine.b;
        layers.push_back({AffineMap(std::move(W), std::move(b)), l.activation});
        in = kk;
    }
    const auto& f = net.final_map();
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(f.W.rows(), in);
    W.leftCols(f.W.cols()) = f.W;
    return NeuralNet(std::move(layers), AffineMap(std::move(W), f.b));
}

// ---------------------------------------------------------------------------
// Rank

/// Singular values below this factor times max(rows, cols) times the
/// largest singular value count as zero.
inline constexpr double rank_tolerance_factor = 1e-10;

inline std::size_t numerical_rank(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    const double tol = rank_tolerance_factor * static_cast<double>(std::max(A.rows(), A.cols())) * s[0];
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > tol) ++r;
    return r;
}

inline bool is_full_rank(const Eigen::MatrixXd& A) {
    return numerical_rank(A) == static_cast<std::size_t>(std::min(A.rows(), A.cols()));
}

inline bool all_full_rank(const NeuralNet& net) {
    for (const auto& l : net.layers())
        if (!is_full_rank(l.affine.W)) return false;
    return is_full_rank(net.final_map().W);
}

struct PerturbResult {
    NeuralNet net;
    std::size_t retries = 0;  ///< extra attempts beyond the first, summed over matrices
};

class PerturbationError : public std::runtime_error {
public:
    PerturbationError(const std::string& what, std::size_t attempts)
        : std::runtime_error(what), attempts_(attempts) {}
    std::size_t attempts() const { return attempts_; }

private:
    std::size_t attempts_;
};

inline constexpr std::size_t max_perturbation_attempts = 100;

/// Returns a network whose weight matrices are all full rank, each entry
/// moved by less than delta/2 (so well within delta). Rank-deficient
/// matrices receive uniform noise on every entry; full-rank matrices and
/// all biases are left untouched.
inline PerturbResult perturb_to_full_rank(const NeuralNet& net, double delta, std::uint64_t seed) {
    if (!(delta > 0.0)) throw std::invalid_argument("perturb_to_full_rank: delta must be positive");
    Rng rng(seed);
    std::size_t retries = 0;

    auto fix = [&](const Eigen::MatrixXd& W, std::size_t index) {
        if (is_full_rank(W)) return W;
        for (std::size_t attempt = 0; attempt < max_perturbation_attempts; ++attempt) {
            Eigen::MatrixXd P = W;
            for (Eigen::Index i = 0; i < P.rows(); ++i)
                for (Eigen::Index j = 0; j < P.cols(); ++j) P(i, j) += rng.uniform(-delta / 2, delta / 2);
            if (is_full_rank(P)) {
                retries += attempt;
                return P;
            }
        }
        throw PerturbationError("perturb_to_full_rank: matrix " + std::to_string(index) + " still rank deficient after " +
                                    std::to_string(max_perturbation_attempts) + " attempts",
                                max_perturbation_attempts);
    };

    std::vector<Layer> layers;
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
        const auto& l = net.layers()[k];
        layers.push_back({AffineMap(fix(l.affine.W, k), l.affine.b), l.activation});
    }
    AffineMap final_map(fix(net.final_map().W, layers.size()), net.final_map().b);
    return {NeuralNet(std::move(layers), std::move(final_map)), retries};
}

// ---------------------------------------------------------------------------
// Sup-norm comparison

/// max over the uniform grid of ||f(x) - g(x)||_inf.
inline double sup_gap(const VecMap& f, const VecMap& g, const Box& domain, std::size_t grid_per_axis) {
    if (f.in_dim != g.in_dim || f.out_dim != g.out_dim)
        throw std::invalid_argument("sup_gap: maps differ in dimensions");
    if (domain.dim() != f.in_dim) throw std::invalid_argument("sup_gap: domain dimension mismatch");
    if (grid_per_axis < 2) throw std::invalid_argument("sup_gap: grid_per_axis must be >= 2");
    double worst = 0.0;
    for_each_grid_point(domain, grid_per_axis, [&](const Eigen::VectorXd& x) {
        worst = std::max(worst, (f(x) - g(x)).cwiseAbs().maxCoeff());
    });
    return worst;
}

/// Same as sup_gap for two networks, using batched evaluation.
inline double sup_gap(const NeuralNet& f, const NeuralNet& g, const Box& domain, std::size_t grid_per_axis) {
    if (f.input_dim() != g.input_dim() || f.output_dim() != g.output_dim())
        throw std::invalid_argument("sup_gap: networks differ in dimensions");
    if (domain.dim() != f.input_dim()) throw std::invalid_argument("sup_gap: domain dimension mismatch");
    if (grid_per_axis < 2) throw std::invalid_argument("sup_gap: grid_per_axis must be >= 2");
    const Eigen::MatrixXd X = grid_points(domain, grid_per_axis);
    return (f.forward_batch(X) - g.forward_batch(X)).cwiseAbs().maxCoeff();
}

}  // namespace narrow
