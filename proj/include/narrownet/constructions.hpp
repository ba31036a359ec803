#pragma once

// Explicit width-preserving networks that approximate one activation with
// another:
//
//   * LeakyReLU_alpha from stacks of a fixed LeakyReLU_beta,
//   * LeakyReLU_alpha from ELU layers with recursively chosen scales k_n,
//   * ReLU from a rescaled Softplus_beta,
//   * ReLU from iterates of an activation that fixes [0, inf) and contracts
//     (-inf, 0),
//
// plus whole-network substitution and the brute-force depth witness for
// fixed-slope LeakyReLU networks of width 1 and depth 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "narrownet/activation.hpp"
#include "narrownet/box.hpp"
#include "narrownet/network.hpp"

namespace narrow {

class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A one-dimensional network written as a straight-line sequence of scalar
/// affine maps x -> scale * x + shift and activations. Appending it to a
/// k-dimensional builder applies it componentwise through diagonal maps.
class ScalarProgram {
public:
    ScalarProgram& affine(double scale, double shift) {
        stages_.push_back({true, scale, shift, {}});
        return *this;
    }

    ScalarProgram& activation(const Activation& act) {
        stages_.push_back({false, 1.0, 0.0, act});
        return *this;
    }

    ScalarProgram& append(const ScalarProgram& other) {
        stages_.insert(stages_.end(), other.stages_.begin(), other.stages_.end());
        return *this;
    }

    double operator()(double x) const {
        for (const auto& s : stages_) x = s.is_affine ? s.scale * x + s.shift : s.act(x);
        return x;
    }

    std::size_t activation_count() const {
        return static_cast<std::size_t>(
            std::count_if(stages_.begin(), stages_.end(), [](const Stage& s) { return !s.is_affine; }));
    }

    void append_to(NetBuilder& builder) const {
        const Eigen::Index dim = builder.current_dim();
        for (const auto& s : stages_) {
            if (s.is_affine)
                builder.affine(AffineMap::diagonal(dim, s.scale, s.shift));
            else
                builder.activation(s.act);
        }
    }

    NeuralNet to_net() const {
        NetBuilder b(1);
        append_to(b);
        return b.build();
    }

private:
    struct Stage {
        bool is_affine;
        double scale;
        double shift;
        Activation act;
    };
    std::vector<Stage> stages_;
};

struct ConstructionReport {
    NeuralNet net;
    ScalarProgram program;
    Activation target;
    double epsilon = 0.0;
    Box valid_domain;
    double measured_gap = 0.0;
    std::size_t stages = 0;            ///< index N of the constructed Phi_N
    std::vector<double> coefficients;  ///< construction constants (b, k_n, n, ...)
};

namespace detail {

inline void require_interval(const Box& K, const char* who) {
    if (K.dim() != 1) throw std::invalid_argument(std::string(who) + ": domain must be one-dimensional");
}

inline void require_positive(double v, const char* who, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(who) + ": " + name + " must be positive");
}

/// Smallest integer >= v, ignoring representation noise just above an integer.
inline std::size_t ceil_tolerant(double v) {
    const double r = std::round(v);
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) return static_cast<std::size_t>(std::max(0.0, r));
    return static_cast<std::size_t>(std::max(0.0, std::ceil(v)));
}

inline double grid_gap(const ScalarProgram& p, const Activation& target, const Box& K,
                       std::size_t grid = default_grid_points) {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
        const double x = grid_coordinate(K.low(0), K.high(0), i, grid);
        worst = std::max(worst, std::abs(p(x) - target(x)));
    }
    return worst;
}

inline ConstructionReport finish(ScalarProgram program, const Activation& target, double eps, const Box& K,
                                 std::size_t stages, std::vector<double> coefficients, const char* who) {
    const double gap = grid_gap(program, target, K);
    if (!(gap <= eps))
        throw ConstructionError(std::string(who) + ": measured gap " + std::to_string(gap) + " exceeds epsilon " +
                                std::to_string(eps));
    NeuralNet net = program.to_net();
    return {std::move(net), std::move(program), target, eps, K, gap, stages, std::move(coefficients)};
}

/// LeakyReLU_{beta^p} from layers of LeakyReLU_beta: p plain layers for
/// p > 0, |p| reflected layers x -> -(1/beta) LeakyReLU_beta(-x) for p < 0.
inline void leaky_power(ScalarProgram& prog, double beta, long p) {
    const Activation act = Activation::leaky_relu(beta);
    for (long i = 0; i < p; ++i) prog.activation(act);
    for (long i = 0; i < -p; ++i) prog.affine(-1.0, 0.0).activation(act).affine(-1.0 / beta, 0.0);
}

/// x -> LeakyReLU_s(x + c) - c with s = beta^p.
inline void shifted_leaky_power(ScalarProgram& prog, double beta, long p, double c) {
    prog.affine(1.0, c);
    leaky_power(prog, beta, p);
    prog.affine(1.0, -c);
}

}  // namespace detail

/// LeakyReLU_{1/alpha} written with a single LeakyReLU_alpha layer:
/// x -> -(1/alpha) LeakyReLU_alpha(-x).
inline NeuralNet leaky_reciprocal(double alpha) {
    detail::require_positive(alpha, "leaky_reciprocal", "alpha");
    ScalarProgram p;
    p.affine(-1.0, 0.0).activation(Activation::leaky_relu(alpha)).affine(-1.0 / alpha, 0.0);
    return p.to_net();
}

/// Offset b placing the first bend between the two bracketing slopes.
inline double leaky_bracket_offset(double alpha, double beta1, double beta2, double eps) {
    return (1.0 / beta1 - 1.0 / alpha) / (1.0 / beta1 - 1.0 / beta2) * eps;
}

/// Stage limit for the layered constructions.
inline constexpr std::size_t max_stages = 100000;

/// LeakyReLU_alpha to accuracy eps on K using only LeakyReLU_beta layers.
///
/// With beta_1 < alpha < beta_2 consecutive powers of beta, the network
/// alternates slopes beta_1/beta_2 and beta_2/beta_1 at bends placed so that
/// Phi_{2k} stays within eps of LeakyReLU_alpha on [-k eps / alpha, inf).
/// alpha > 1 is reduced to 1/alpha by reflection; powers beta^{-n} are
/// realized with the reciprocal identity.
inline ConstructionReport build_leaky_from_leaky(double alpha, double beta, double eps, const Box& K) {
    constexpr const char* who = "build_leaky_from_leaky";
    detail::require_positive(alpha, who, "alpha");
    detail::require_positive(beta, who, "beta");
    detail::require_positive(eps, who, "epsilon");
    detail::require_interval(K, who);
    if (beta == 1.0) throw std::invalid_argument("build_leaky_from_leaky: beta must differ from 1");
    const Activation target = Activation::leaky_relu(alpha);

    if (alpha > 1.0) {
        // LeakyReLU_alpha(x) = -alpha LeakyReLU_{1/alpha}(-x)
        ConstructionReport inner =
            build_leaky_from_leaky(1.0 / alpha, beta, eps / alpha, Box::interval(-K.high(0), -K.low(0)));
        ScalarProgram p;
        p.affine(-1.0, 0.0).append(inner.program).affine(-alpha, 0.0);
        return detail::finish(std::move(p), target, eps, K, inner.stages, inner.coefficients, who);
    }

    // Work with gamma = min(beta, 1/beta) < 1; gamma^j = beta^(sign * j).
    const double gamma = beta < 1.0 ? beta : 1.0 / beta;
    const long sign = beta < 1.0 ? 1 : -1;

    ScalarProgram p;
    if (K.low(0) >= 0.0 || alpha == 1.0) return detail::finish(p, target, eps, K, 0, {}, who);

    const double j = std::log(alpha) / std::log(gamma);
    const long j_round = std::lround(j);
    if (std::abs(std::pow(gamma, static_cast<double>(j_round)) - alpha) <= 1e-12 * alpha) {
        detail::leaky_power(p, beta, sign * j_round);
        return detail::finish(std::move(p), target, eps, K, 1, {}, who);
    }

    const long j0 = static_cast<long>(std::floor(j));
    const double beta2 = std::pow(gamma, static_cast<double>(j0));
    const double beta1 = std::pow(gamma, static_cast<double>(j0 + 1));
    const double b = leaky_bracket_offset(alpha, beta1, beta2, eps);
    const std::size_t k = std::max<std::size_t>(1, detail::ceil_tolerant(alpha * -K.low(0) / eps));
    if (2 * k > max_stages)
        throw ConstructionError(std::string(who) + ": needs " + std::to_string(2 * k) + " stages, limit is " +
                                std::to_string(max_stages));

    detail::leaky_power(p, beta, sign * j0);  // Phi_1 = LeakyReLU_{beta_2}
    for (std::size_t i = 1; i <= k; ++i) {
        const double base = static_cast<double>(i - 1) * eps;
        if (i > 1) detail::shifted_leaky_power(p, beta, -sign, base);  // slope beta_2 / beta_1
        detail::shifted_leaky_power(p, beta, sign, base + b);          // slope beta_1 / beta_2
    }
    return detail::finish(std::move(p), target, eps, K, 2 * k, {b, beta1, beta2}, who);
}

/// LeakyReLU_alpha to accuracy eps on K using ELU layers.
///
/// Stage n is x -> ELU_{k_n}(x + (n-1) eps) - (n-1) eps, with k_n chosen so
/// that Phi_n(-n eps / alpha) = -n eps. Every Phi_n is exact on [0, inf) and
/// interpolates LeakyReLU_alpha at the knots -i eps / alpha, i = 1..n.
inline ConstructionReport build_leaky_from_elu(double alpha, double eps, const Box& K) {
    constexpr const char* who = "build_leaky_from_elu";
    detail::require_positive(alpha, who, "alpha");
    detail::require_positive(eps, who, "epsilon");
    detail::require_interval(K, who);

    const std::size_t N = K.low(0) >= 0.0 ? 0 : detail::ceil_tolerant(alpha * -K.low(0) / eps);
    if (N > max_stages)
        throw ConstructionError(std::string(who) + ": needs " + std::to_string(N) + " stages, limit is " +
                                std::to_string(max_stages));
    ScalarProgram p;
    std::vector<double> scales;
    for (std::size_t n = 1; n <= N; ++n) {
        const double shift = static_cast<double>(n - 1) * eps;
        const double u = p(-static_cast<double>(n) * eps / alpha) + shift;
        const double k_n = -eps / std::expm1(u);
        if (!(k_n > 0.0) || !std::isfinite(k_n))
            throw ConstructionError(std::string(who) + ": stage " + std::to_string(n) +
                                    " has no representable ELU scale (earlier stages saturate below double precision)");
        scales.push_back(k_n);
        p.affine(1.0, shift).activation(Activation::elu(k_n)).affine(1.0, -shift);
    }
    return detail::finish(std::move(p), Activation::leaky_relu(alpha), eps, K, N, std::move(scales), who);
}

/// ReLU from x -> Softplus_beta(n x) / n with n = ceil(2 / (beta eps)).
/// The gap to ReLU is at most 2 / (n beta) everywhere; it is verified on K.
inline ConstructionReport build_relu_from_softplus(double beta, double eps,
                                                   const Box& K = Box::interval(-10.0, 10.0)) {
    constexpr const char* who = "build_relu_from_softplus";
    detail::require_positive(beta, who, "beta");
    detail::require_positive(eps, who, "epsilon");
    detail::require_interval(K, who);
    const auto n = static_cast<double>(std::max<std::size_t>(1, detail::ceil_tolerant(2.0 / (beta * eps))));
    ScalarProgram p;
    p.affine(n, 0.0).activation(Activation::softplus(beta)).affine(1.0 / n, 0.0);
    return detail::finish(std::move(p), Activation::relu(), eps, K, 1, {n}, who);
}

/// Upper limit on the number of iterates tried by build_relu_from_iteration.
inline constexpr std::size_t max_iterates = std::size_t{1} << 17;

/// ReLU as the n-fold iterate of `act`, for the least n whose grid error on
/// the domain is within eps.
inline ConstructionReport build_relu_from_iteration(const Activation& act, double eps, const Box& domain,
                                                    std::size_t grid = default_grid_points) {
    constexpr const char* who = "build_relu_from_iteration";
    detail::require_positive(eps, who, "epsilon");
    detail::require_interval(domain, who);
    const auto hyp = check_iteration_hypotheses(act, -1e-3, default_grid_points, std::min(-100.0, domain.low(0)));
    if (!hyp.holds)
        throw ConstructionError(std::string(who) + ": " + std::string(to_token(act.kind())) +
                                " does not satisfy the iteration hypotheses (max ratio act(x)/x = " +
                                std::to_string(hyp.b) + ")");

    std::vector<double> xs(grid), vals(grid);
    for (std::size_t i = 0; i < grid; ++i) xs[i] = vals[i] = grid_coordinate(domain.low(0), domain.high(0), i, grid);
    std::size_t n = 0;
    double err = std::numeric_limits<double>::infinity();
    while (err > eps) {
        if (++n > max_iterates)
            throw ConstructionError(std::string(who) + ": no iterate count up to " + std::to_string(max_iterates) +
                                    " reaches epsilon");
        err = 0.0;
        for (std::size_t i = 0; i < grid; ++i) {
            vals[i] = act(vals[i]);
            err = std::max(err, std::abs(vals[i] - std::max(xs[i], 0.0)));
        }
    }
    ScalarProgram p;
    for (std::size_t i = 0; i < n; ++i) p.activation(act);
    return detail::finish(std::move(p), Activation::relu(), eps, domain, n, {static_cast<double>(n)}, who);
}

// ---------------------------------------------------------------------------
// Whole-network substitution

enum class SubstitutionKind {
    leaky_relu_beta,  ///< LeakyReLU layers -> stacks of LeakyReLU_beta
    elu,              ///< LeakyReLU layers -> ELU stacks
    softplus,         ///< ReLU layers -> rescaled Softplus_beta
    iterated,         ///< ReLU layers -> iterates of `iterated`
};

struct SubstitutionTarget {
    SubstitutionKind kind = SubstitutionKind::elu;
    double beta = 1.0;
    Activation iterated = Activation::celu(1.0);

    static SubstitutionTarget leaky(double beta) { return {SubstitutionKind::leaky_relu_beta, beta, {}}; }
    static SubstitutionTarget elu() { return {SubstitutionKind::elu, 1.0, {}}; }
    static SubstitutionTarget softplus(double beta) { return {SubstitutionKind::softplus, beta, {}}; }
    static SubstitutionTarget iterate(const Activation& act) { return {SubstitutionKind::iterated, 1.0, act}; }

    ActivationKind source_kind() const {
        return kind == SubstitutionKind::leaky_relu_beta || kind == SubstitutionKind::elu ? ActivationKind::leaky_relu
                                                                                           : ActivationKind::relu;
    }
};

class SubstitutionError : public std::runtime_error {
public:
    SubstitutionError(std::size_t layer, const std::string& what)
        : std::runtime_error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

struct SubstitutionResult {
    NeuralNet net;
    double measured_gap = 0.0;
    std::vector<double> layer_epsilons;
};

namespace detail {

inline ScalarProgram scalar_substitute(const SubstitutionTarget& t, const Activation& source, double eps,
                                       const Box& K) {
    switch (t.kind) {
        case SubstitutionKind::leaky_relu_beta: return build_leaky_from_leaky(source.beta(), t.beta, eps, K).program;
        case SubstitutionKind::elu: return build_leaky_from_elu(source.beta(), eps, K).program;
        case SubstitutionKind::softplus: return build_relu_from_softplus(t.beta, eps, K).program;
        case SubstitutionKind::iterated: return build_relu_from_iteration(t.iterated, eps, K).program;
    }
    return {};
}

inline double row_sum_norm(const Eigen::MatrixXd& W) {
    return W.size() == 0 ? 0.0 : W.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Largest finite-difference slope of `act` over a grid on [lo, hi].
inline double grid_lipschitz(const Activation& act, double lo, double hi, std::size_t grid = 1001) {
    if (hi <= lo) return std::abs(act.derivative(lo));
    double worst = 0.0;
    double prev = act(lo);
    for (std::size_t i = 1; i < grid; ++i) {
        const double x0 = grid_coordinate(lo, hi, i - 1, grid);
        const double x1 = grid_coordinate(lo, hi, i, grid);
        const double v = act(x1);
        worst = std::max(worst, std::abs(v - prev) / (x1 - x0));
        prev = v;
    }
    return worst;
}

}  // namespace detail

/// Replaces every activation layer of `net` by a componentwise scalar
/// construction so that the result stays within eps of `net` on K.
///
/// Per-layer tolerances split eps equally across layers and divide by a
/// grid-estimated Lipschitz bound of everything downstream; the end-to-end
/// gap is then checked on the grid, halving the budget up to four times.
inline SubstitutionResult substitute_activations(const NeuralNet& net, const SubstitutionTarget& target, double eps,
                                                 const Box& K, std::size_t grid_per_axis = 101) {
    detail::require_positive(eps, "substitute_activations", "epsilon");
    if (K.dim() != net.input_dim()) throw std::invalid_argument("substitute_activations: domain dimension mismatch");
    const std::size_t L = net.depth();
    if (L == 0) return {net, 0.0, {}};

    for (std::size_t i = 0; i < L; ++i) {
        const auto kind = net.layers()[i].activation.kind();
        if (kind != target.source_kind())
            throw SubstitutionError(i, "activation " + std::string(to_token(kind)) + " is not in the source family " +
                                           std::string(to_token(target.source_kind())));
    }

    // Pre-activation ranges over the grid.
    const Eigen::MatrixXd X = grid_points(K, grid_per_axis);
    std::vector<double> lo(L), hi(L), lip(L);
    Eigen::MatrixXd h = X;
    for (std::size_t i = 0; i < L; ++i) {
        const auto& layer = net.layers()[i];
        Eigen::MatrixXd z = (layer.affine.W * h).colwise() + layer.affine.b;
        lo[i] = z.minCoeff();
        hi[i] = z.maxCoeff();
        lip[i] = std::max(1.0, detail::grid_lipschitz(layer.activation, lo[i], hi[i]));
        h = z.unaryExpr([&layer](double v) { return layer.activation(v); });
    }

    // Lipschitz bound from the output of layer i to the network output.
    std::vector<double> downstream(L);
    double acc = detail::row_sum_norm(net.final_map().W);
    for (std::size_t i = L; i-- > 0;) {
        downstream[i] = std::max(acc, 1e-12);
        acc *= lip[i] * detail::row_sum_norm(net.layers()[i].affine.W);
    }

    double safety = 1.0;
    std::vector<double> layer_eps(L);
    for (int attempt = 0; attempt < 5; ++attempt, safety *= 0.5) {
        NetBuilder builder(static_cast<Eigen::Index>(net.input_dim()));
        double upstream = 0.0;  // bound on the error entering layer i
        for (std::size_t i = 0; i < L; ++i) {
            const auto& layer = net.layers()[i];
            layer_eps[i] = safety * eps / (static_cast<double>(L) * downstream[i]);
            const double shift = detail::row_sum_norm(layer.affine.W) * upstream;
            const double margin = shift + 1e-6 * std::max(1.0, hi[i] - lo[i]);
            const Box Ki = Box::interval(lo[i] - margin, hi[i] + margin);
            ScalarProgram prog;
            try {
                prog = detail::scalar_substitute(target, layer.activation, layer_eps[i], Ki);
            } catch (const std::exception& e) {
                throw SubstitutionError(i, e.what());
            }
            builder.affine(layer.affine);
            prog.append_to(builder);
            upstream = lip[i] * shift + layer_eps[i];
        }
        builder.affine(net.final_map());
        NeuralNet out = builder.build();
        const double gap = sup_gap(out, net, K, grid_per_axis);
        if (gap <= eps) return {std::move(out), gap, layer_eps};
    }
    std::size_t worst = 0;
    for (std::size_t i = 1; i < L; ++i)
        if (downstream[i] > downstream[worst]) worst = i;
    throw SubstitutionError(worst, "end-to-end gap exceeds epsilon after budget halving");
}

// ---------------------------------------------------------------------------
// Depth witness

/// F(x) = x on [0, 1], 0.2 x on [-1, 0].
inline double depth_witness_target(double x) { return x >= 0.0 ? x : 0.2 * x; }

/// The two shapes of a width-1, depth-1 LeakyReLU_{0.1} network on [-1, 1]:
/// form 1 bends from slope a to 10a at c, form 2 from 10a to a.
inline double depth_witness_form(int form, double a, double b, double c, double x) {
    if (form == 1) return x <= c ? a * x + b : 10.0 * a * x + b - 9.0 * a * c;
    return x <= c ? 10.0 * a * x + b : a * x + b + 9.0 * a * c;
}

/// Sup error of a form on [lo, 1]; the difference to F is piecewise linear
/// with breaks at c and 0, so the endpoints and breaks suffice.
inline double depth_witness_error(int form, double a, double b, double c, double lo = -1.0) {
    std::array<double, 4> pts{lo, 0.0, 1.0, c};
    const std::size_t count = (c >= lo && c <= 1.0) ? 4 : 3;
    double worst = 0.0;
    for (std::size_t i = 0; i < count; ++i)
        worst = std::max(worst, std::abs(depth_witness_form(form, a, b, c, pts[i]) - depth_witness_target(pts[i])));
    return worst;
}

struct DepthWitnessResult {
    double best_error = std::numeric_limits<double>::infinity();
    int form = 1;
    double a = 0.0, b = 0.0, c = 0.0;
    bool infeasible = false;  ///< best_error >= epsilon
};

struct DepthWitnessGrid {
    double a_lo = -5.0, a_hi = 5.0;
    double b_lo = -5.0, b_hi = 5.0;
    double c_lo = -1.0, c_hi = 1.0;
    std::size_t points = 201;
};

namespace detail {

/// Nelder-Mead on a 3-d objective.
template <typename F>
std::array<double, 3> nelder_mead(F&& f, std::array<double, 3> x0, double step, std::size_t iters) {
    using P = std::array<double, 3>;
    std::array<P, 4> s{x0, x0, x0, x0};
    for (std::size_t i = 0; i < 3; ++i) s[i + 1][i] += step;
    std::array<double, 4> fs{};
    for (std::size_t i = 0; i < 4; ++i) fs[i] = f(s[i]);
    auto lerp = [](const P& a, const P& b, double t) {
        return P{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
    };
    for (std::size_t it = 0; it < iters; ++it) {
        std::array<std::size_t, 4> ord{0, 1, 2, 3};
        std::sort(ord.begin(), ord.end(), [&](std::size_t l, std::size_t r) { return fs[l] < fs[r]; });
        const std::size_t best = ord[0], worst = ord[3], second = ord[2];
        P centroid{0, 0, 0};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t d = 0; d < 3; ++d) centroid[d] += s[ord[i]][d] / 3.0;
        const P reflected = lerp(centroid, s[worst], -1.0);
        const double fr = f(reflected);
        if (fr < fs[best]) {
            const P expanded = lerp(centroid, s[worst], -2.0);
            const double fe = f(expanded);
            if (fe < fr) s[worst] = expanded, fs[worst] = fe;
            else s[worst] = reflected, fs[worst] = fr;
        } else if (fr < fs[second]) {
            s[worst] = reflected, fs[worst] = fr;
        } else {
            const P contracted = lerp(centroid, s[worst], 0.5);
            const double fc = f(contracted);
            if (fc < fs[worst]) {
                s[worst] = contracted, fs[worst] = fc;
            } else {
                for (std::size_t i = 1; i < 4; ++i) {
                    s[ord[i]] = lerp(s[best], s[ord[i]], 0.5);
                    fs[ord[i]] = f(s[ord[i]]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i)
        if (fs[i] < fs[best]) best = i;
    return s[best];
}

}  // namespace detail

/// Brute-force search over both forms on an (a, b, c) grid, followed by a
/// Nelder-Mead refinement from the best cell. Ties keep the lowest grid index.
inline DepthWitnessResult depth_witness_check(double eps, const DepthWitnessGrid& grid = {}, double lo = -1.0) {
    detail::require_positive(eps, "depth_witness_check", "epsilon");
    DepthWitnessResult r;
    const std::size_t n = grid.points;
    std::vector<double> as(n), bs(n), cs(n);
    for (std::size_t i = 0; i < n; ++i) {
        as[i] = grid_coordinate(grid.a_lo, grid.a_hi, i, n);
        bs[i] = grid_coordinate(grid.b_lo, grid.b_hi, i, n);
        cs[i] = grid_coordinate(grid.c_lo, grid.c_hi, i, n);
    }
    for (int form = 1; form <= 2; ++form)
        for (double a : as)
            for (double b : bs)
                for (double c : cs) {
                    const double e = depth_witness_error(form, a, b, c, lo);
                    if (e < r.best_error) r = {e, form, a, b, c, false};
                }

    auto objective = [&](const std::array<double, 3>& p) {
        return depth_witness_error(r.form, p[0], p[1], std::clamp(p[2], grid.c_lo, grid.c_hi), lo);
    };
    const double step = (grid.a_hi - grid.a_lo) / static_cast<double>(n - 1);
    const auto refined = detail::nelder_mead(objective, {r.a, r.b, r.c}, step, 2000);
    const double e = objective(refined);
    if (e < r.best_error) {
        r.best_error = e;
        r.a = refined[0];
        r.b = refined[1];
        r.c = std::clamp(refined[2], grid.c_lo, grid.c_hi);
    }
    r.infeasible = r.best_error >= eps;
    return r;
}

}  // namespace narrow
