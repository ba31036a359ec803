#pragma once

// Root certification by opposite-face sign conditions on a box, and
// self-intersection certificates for maps [0,1]^m -> R^{2m}.
//
// All suprema and infima over continuous sets are estimated on uniform
// grids; a certificate is sound up to the recorded grid resolution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "narrownet/box.hpp"
#include "narrownet/format.hpp"
#include "narrownet/network.hpp"

namespace narrow {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// For each coordinate i, two disjoint subintervals [a_i1, a_i2] and
/// [b_i1, b_i2] of [0, 1].
class IntervalPairs {
public:
    IntervalPairs(std::vector<Interval> a, std::vector<Interval> b) : a_(std::move(a)), b_(std::move(b)) {
        if (a_.size() != b_.size() || a_.empty())
            throw std::invalid_argument("IntervalPairs: need the same positive number of a- and b-intervals");
        for (std::size_t i = 0; i < a_.size(); ++i) {
            for (const auto& iv : {a_[i], b_[i]})
                if (!(0.0 <= iv.lo && iv.lo <= iv.hi && iv.hi <= 1.0))
                    throw std::invalid_argument("IntervalPairs: interval outside [0, 1] at coordinate " +
                                                std::to_string(i));
            if (!(a_[i].hi < b_[i].lo || b_[i].hi < a_[i].lo))
                throw std::invalid_argument("IntervalPairs: intervals overlap at coordinate " + std::to_string(i));
        }
    }

    /// [0, 1/5] and [4/5, 1] in every coordinate.
    static IntervalPairs canonical(std::size_t m) {
        return {std::vector<Interval>(m, {0.0, 0.2}), std::vector<Interval>(m, {0.8, 1.0})};
    }

    std::size_t m() const { return a_.size(); }
    const Interval& a(std::size_t i) const { return a_.at(i); }
    const Interval& b(std::size_t i) const { return b_.at(i); }

    Box a_box() const { return box_of(a_); }
    Box b_box() const { return box_of(b_); }

    friend bool operator==(const IntervalPairs&, const IntervalPairs&) = default;

private:
    static Box box_of(const std::vector<Interval>& v) {
        std::vector<double> lo, hi;
        for (const auto& iv : v) lo.push_back(iv.lo), hi.push_back(iv.hi);
        return {lo, hi};
    }
    std::vector<Interval> a_, b_;
};

// ---------------------------------------------------------------------------
// The piecewise-linear maps g and g*

/// Odd component (1-based index 2k-1) as a function of t_k.
inline double g_odd(double t) {
    if (t <= 0.3) return 10.0 * t - 1.0;
    if (t <= 0.5) return 2.0;
    if (t <= 0.7) return 7.0 - 10.0 * t;
    return 0.0;
}

/// Even component (1-based index 2k) as a function of t_k.
inline double g_even(double t) {
    if (t <= 0.3) return 0.0;
    if (t <= 0.5) return 10.0 * t - 3.0;
    if (t <= 0.7) return 2.0;
    return 9.0 - 10.0 * t;
}

/// g : [0,1]^m -> R^{2m}, (g_{2k-1}, g_{2k}) depending on t_k only. The
/// curve t -> (g_odd(t), g_even(t)) passes through the origin at t = 0.1 and
/// again at t = 0.9.
inline VecMap build_g(std::size_t m) {
    if (m == 0) throw std::invalid_argument("build_g: m must be >= 1");
    return {m, 2 * m, [m](const Eigen::VectorXd& t) {
                if (static_cast<std::size_t>(t.size()) != m)
                    throw std::invalid_argument("g: expected input of dimension " + std::to_string(m));
                Eigen::VectorXd y(static_cast<Eigen::Index>(2 * m));
                for (Eigen::Index k = 0; k < t.size(); ++k) {
                    if (!(t[k] >= 0.0 && t[k] <= 1.0)) throw std::domain_error("g: input outside [0,1]^m");
                    y[2 * k] = g_odd(t[k]);
                    y[2 * k + 1] = g_even(t[k]);
                }
                return y;
            }};
}

/// The first n components of g, for m < n <= 2m.
inline VecMap build_gstar(std::size_t m, std::size_t n) {
    if (!(m < n && n <= 2 * m)) throw std::invalid_argument("build_gstar: need m < n <= 2m");
    VecMap g = build_g(m);
    return {m, n, [g, n](const Eigen::VectorXd& t) -> Eigen::VectorXd {
                return g(t).head(static_cast<Eigen::Index>(n));
            }};
}

/// (f_1, ..., f_n, g_{n+1}, ..., g_{2m}): a map into R^n completed with
/// the tail components of g.
inline VecMap pad_with_g_tail(const VecMap& f, std::size_t m) {
    if (f.in_dim != m || f.out_dim > 2 * m) throw std::invalid_argument("pad_with_g_tail: dimension mismatch");
    if (f.out_dim == 2 * m) return f;
    VecMap g = build_g(m);
    return {m, 2 * m, [f, g](const Eigen::VectorXd& t) {
                Eigen::VectorXd y = g(t);
                y.head(static_cast<Eigen::Index>(f.out_dim)) = f(t);
                return y;
            }};
}

// ---------------------------------------------------------------------------
// Poincare-Miranda root certification

struct PmResult {
    bool certified = false;
    std::optional<Eigen::VectorXd> approx_root;
    double residual = std::numeric_limits<double>::infinity();  ///< ||f(approx_root)||_inf
};

namespace detail {

inline Box with_fixed_axis(const Box& box, std::size_t axis, double value) {
    std::vector<double> lo = box.lows(), hi = box.highs();
    lo[axis] = hi[axis] = value;
    return {lo, hi};
}

inline double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Checks s_i f_i >= 0 on the face x_i = low_i and s_i f_i <= 0 on the face
/// x_i = high_i at every grid point. When the conditions hold, returns the
/// grid point with the smallest ||f||_inf, refined by bisection along
/// coordinate lines and a damped Newton polish (kept only when it helps).
inline PmResult pm_root(const VecMap& f, const Box& box, std::span<const int> signs, std::size_t grid) {
    const std::size_t n = box.dim();
    if (f.in_dim != n || f.out_dim != n) throw std::invalid_argument("pm_root: f must map the box dimension to itself");
    if (signs.size() != n) throw std::invalid_argument("pm_root: need one sign per coordinate");
    for (int s : signs)
        if (s != 1 && s != -1) throw std::invalid_argument("pm_root: signs must be +1 or -1");
    if (grid < 2) throw std::invalid_argument("pm_root: grid must be >= 2");

    PmResult r;
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = true;
        const auto ii = static_cast<Eigen::Index>(i);
        for_each_grid_point(detail::with_fixed_axis(box, i, box.low(i)), grid, [&](const Eigen::VectorXd& x) {
            if (ok && signs[i] * f(x)[ii] < 0.0) ok = false;
        });
        for_each_grid_point(detail::with_fixed_axis(box, i, box.high(i)), grid, [&](const Eigen::VectorXd& x) {
            if (ok && signs[i] * f(x)[ii] > 0.0) ok = false;
        });
        if (!ok) return r;
    }
    r.certified = true;

    Eigen::VectorXd best;
    double best_res = std::numeric_limits<double>::infinity();
    for_each_grid_point(box, grid, [&](const Eigen::VectorXd& x) {
        const double res = detail::inf_norm(f(x));
        if (res < best_res) best_res = res, best = x;
    });

    auto consider = [&](const Eigen::VectorXd& x) {
        const double res = detail::inf_norm(f(x));
        if (res < best_res) best_res = res, best = x;
    };

    // Bisection along coordinate lines (nonlinear Gauss-Seidel).
    Eigen::VectorXd x = best;
    for (int sweep = 0; sweep < 20 && best_res > 0.0; ++sweep) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            double lo = box.low(i), hi = box.high(i);
            Eigen::VectorXd y = x;
            y[ii] = lo;
            const double flo = signs[i] * f(y)[ii];
            y[ii] = hi;
            const double fhi = signs[i] * f(y)[ii];
            if (flo < 0.0 || fhi > 0.0) continue;
            for (int it = 0; it < 80; ++it) {
                y[ii] = 0.5 * (lo + hi);
                if (signs[i] * f(y)[ii] >= 0.0) lo = y[ii];
                else hi = y[ii];
            }
            x[ii] = 0.5 * (lo + hi);
        }
        consider(x);
    }

    // Newton polish with a central-difference Jacobian, clamped to the box.
    x = best;
    for (int it = 0; it < 50 && best_res > 0.0; ++it) {
        const Eigen::VectorXd fx = f(x);
        Eigen::MatrixXd J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < n; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double h = 1e-7 * std::max(1.0, box.high(j) - box.low(j));
            Eigen::VectorXd xp = x, xm = x;
            xp[jj] += h;
            xm[jj] -= h;
            J.col(jj) = (f(xp) - f(xm)) / (2.0 * h);
        }
        const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-fx);
        if (!step.allFinite()) break;
        bool improved = false;
        for (double t = 1.0; t > 1e-6; t *= 0.5) {
            Eigen::VectorXd cand = x + t * step;
            for (std::size_t j = 0; j < n; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                cand[jj] = std::clamp(cand[jj], box.low(j), box.high(j));
            }
            if (detail::inf_norm(f(cand)) < detail::inf_norm(fx)) {
                x = cand;
                improved = true;
                break;
            }
        }
        consider(x);
        if (!improved) break;
    }

    r.approx_root = best;
    r.residual = best_res;
    return r;
}

// ---------------------------------------------------------------------------
// Self-intersection certificates

namespace detail {

/// Extremes of one product condition over D = A x B:
/// `max_product` is the sup of the product, `max_abs_sum` the sup of the sum
/// of the absolute values of its two factors.
struct ProductBounds {
    double max_product = -std::numeric_limits<double>::infinity();
    double max_abs_sum = 0.0;
};

inline std::vector<Eigen::VectorXd> evaluate_grid(const VecMap& g, const Box& box, std::size_t grid) {
    std::vector<Eigen::VectorXd> out;
    for_each_grid_point(box, grid, [&](const Eigen::VectorXd& x) { out.push_back(g(x)); });
    return out;
}

/// For k = 1..m, the conditions on the odd components (x_k pinned to the
/// ends of [a_k1, a_k2]) followed by those on the even components (y_k pinned
/// to the ends of [b_k1, b_k2]).
inline std::vector<ProductBounds> product_bounds(const VecMap& g, const IntervalPairs& pairs, std::size_t grid) {
    const std::size_t m = pairs.m();
    if (g.in_dim != m || g.out_dim != 2 * m)
        throw std::invalid_argument("product conditions: g must map [0,1]^m to R^{2m}");
    const Box A = pairs.a_box(), B = pairs.b_box();
    const auto gA = evaluate_grid(g, A, grid);
    const auto gB = evaluate_grid(g, B, grid);

    std::vector<ProductBounds> out(2 * m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto odd = static_cast<Eigen::Index>(2 * k);
        const auto even = odd + 1;

        ProductBounds& po = out[k];
        const auto u1 = evaluate_grid(g, with_fixed_axis(A, k, pairs.a(k).lo), grid);
        const auto u2 = evaluate_grid(g, with_fixed_axis(A, k, pairs.a(k).hi), grid);
        for (std::size_t p = 0; p < u1.size(); ++p)
            for (const auto& gy : gB) {
                const double l = u1[p][odd] - gy[odd], r = u2[p][odd] - gy[odd];
                po.max_product = std::max(po.max_product, l * r);
                po.max_abs_sum = std::max(po.max_abs_sum, std::abs(l) + std::abs(r));
            }

        ProductBounds& pe = out[m + k];
        const auto v1 = evaluate_grid(g, with_fixed_axis(B, k, pairs.b(k).lo), grid);
        const auto v2 = evaluate_grid(g, with_fixed_axis(B, k, pairs.b(k).hi), grid);
        for (const auto& gx : gA)
            for (std::size_t q = 0; q < v1.size(); ++q) {
                const double l = gx[even] - v1[q][even], r = gx[even] - v2[q][even];
                pe.max_product = std::max(pe.max_product, l * r);
                pe.max_abs_sum = std::max(pe.max_abs_sum, std::abs(l) + std::abs(r));
            }
    }
    return out;
}

}  // namespace detail

/// Grid estimate of M, the largest value of any product condition over D.
/// M < 0 means every product condition holds strictly.
inline double compute_M(const VecMap& g, const IntervalPairs& pairs, std::size_t grid) {
    double M = -std::numeric_limits<double>::infinity();
    for (const auto& pb : detail::product_bounds(g, pairs, grid)) M = std::max(M, pb.max_product);
    return M;
}

/// Factor applied to the strict upper bound on epsilon.
inline constexpr double epsilon_safety = 0.9;

/// 0.9 * min(1/2, min_j -M / (2 S_j + 1)), where S_j are the suprema of the
/// absolute factor sums of the product conditions.
inline double certificate_epsilon(double M, std::span<const double> factor_sums) {
    if (!(M < 0.0)) throw std::invalid_argument("certificate epsilon: M must be negative");
    double bound = 0.5;
    for (double s : factor_sums) bound = std::min(bound, -M / (2.0 * s + 1.0));
    return epsilon_safety * bound;
}

inline double compute_epsilon(const VecMap& g, const IntervalPairs& pairs, double M, std::size_t grid) {
    if (!(M < 0.0)) throw std::invalid_argument("compute_epsilon: M must be negative");
    std::vector<double> sums;
    for (const auto& pb : detail::product_bounds(g, pairs, grid)) sums.push_back(pb.max_abs_sum);
    return certificate_epsilon(M, sums);
}

struct Collision {
    Eigen::VectorXd t1;  ///< in prod [a_i1, a_i2]
    Eigen::VectorXd t2;  ///< in prod [b_i1, b_i2]
    double gap = std::numeric_limits<double>::infinity();  ///< ||f(t1) - f(t2)||_inf
};

/// Minimizes ||f(x) - f(y)||_inf over grid pairs (x, y) in A x B, then runs
/// coordinate-wise golden-section descent from the best pair.
inline Collision find_collision(const VecMap& f, const IntervalPairs& pairs, std::size_t grid,
                                std::size_t refine_sweeps = 100) {
    const std::size_t m = pairs.m();
    if (f.in_dim != m) throw std::invalid_argument("find_collision: dimension mismatch");
    const Box A = pairs.a_box(), B = pairs.b_box();
    std::vector<Eigen::VectorXd> xs, ys;
    for_each_grid_point(A, grid, [&](const Eigen::VectorXd& x) { xs.push_back(x); });
    for_each_grid_point(B, grid, [&](const Eigen::VectorXd& y) { ys.push_back(y); });
    const auto n_out = static_cast<Eigen::Index>(f.out_dim);
    Eigen::MatrixXd fx(n_out, static_cast<Eigen::Index>(xs.size()));
    Eigen::MatrixXd fy(n_out, static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) fx.col(static_cast<Eigen::Index>(i)) = f(xs[i]);
    for (std::size_t j = 0; j < ys.size(); ++j) fy.col(static_cast<Eigen::Index>(j)) = f(ys[j]);

    Collision c;
    Eigen::Index bi = 0, bj = 0;
    for (Eigen::Index i = 0; i < fx.cols() && c.gap > 0.0; ++i) {
        const double* u = fx.col(i).data();
        for (Eigen::Index j = 0; j < fy.cols(); ++j) {
            const double* v = fy.col(j).data();
            double d = 0.0;
            for (Eigen::Index r = 0; r < n_out && d < c.gap; ++r) d = std::max(d, std::abs(u[r] - v[r]));
            if (d < c.gap) {
                c.gap = d, bi = i, bj = j;
                if (d == 0.0) break;
            }
        }
    }
    c.t1 = xs[static_cast<std::size_t>(bi)];
    c.t2 = ys[static_cast<std::size_t>(bj)];
    if (c.gap == 0.0) return c;

    // Coordinates 0..m-1 move t1, m..2m-1 move t2.
    const auto span_of = [&](std::size_t j) { return j < m ? pairs.a(j) : pairs.b(j - m); };
    std::vector<double> step(2 * m);
    for (std::size_t j = 0; j < 2 * m; ++j) {
        const Interval iv = span_of(j);
        step[j] = grid > 1 ? (iv.hi - iv.lo) / static_cast<double>(grid - 1) : 0.0;
    }
    auto objective = [&](const Eigen::VectorXd& t1, const Eigen::VectorXd& t2) {
        return detail::inf_norm(f(t1) - f(t2));
    };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (std::size_t sweep = 0; sweep < refine_sweeps && c.gap > 0.0; ++sweep) {
        for (std::size_t j = 0; j < 2 * m; ++j) {
            const Interval iv = span_of(j);
            Eigen::VectorXd& t = j < m ? c.t1 : c.t2;
            const auto jj = static_cast<Eigen::Index>(j < m ? j : j - m);
            const double cur = t[jj];
            double lo = std::max(iv.lo, cur - step[j]), hi = std::min(iv.hi, cur + step[j]);
            auto at = [&](double v) {
                const double saved = t[jj];
                t[jj] = v;
                const double val = objective(c.t1, c.t2);
                t[jj] = saved;
                return val;
            };
            double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
            double f1 = at(x1), f2 = at(x2);
            for (int it = 0; it < 60; ++it) {
                if (f1 < f2) {
                    hi = x2, x2 = x1, f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = at(x1);
                } else {
                    lo = x1, x1 = x2, f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = at(x2);
                }
            }
            const double cand = 0.5 * (lo + hi);
            const double fc = at(cand);
            if (fc < c.gap) {
                t[jj] = cand;
                c.gap = fc;
            }
        }
        // Shrink the bracket as the search settles.
        for (auto& s : step) s *= 0.5;
    }
    return c;
}

struct SelfIntersectionCertificate {
    IntervalPairs pairs;
    double M = 0.0;
    double epsilon = 0.0;
    std::size_t grid_resolution = 0;
    double sup_gap = 0.0;  ///< grid sup ||f - g||_inf on [0,1]^m
    Collision collision;
};

struct Refusal {
    std::string reason;
    double M = 0.0;
    double epsilon = 0.0;  ///< 0 when M >= 0
    double sup_gap = 0.0;
};

using CertifyOutcome = std::variant<SelfIntersectionCertificate, Refusal>;

/// If f is within the certified epsilon of g (on the grid), f cannot be
/// injective; the certificate carries an approximate collision f(t1) ~ f(t2).
inline CertifyOutcome certify_self_intersection(const VecMap& f, const VecMap& g, const IntervalPairs& pairs,
                                                std::size_t grid) {
    const std::size_t m = pairs.m();
    if (f.in_dim != m || g.in_dim != m || f.out_dim != 2 * m || g.out_dim != 2 * m)
        throw std::invalid_argument("certify_self_intersection: f and g must map [0,1]^m to R^{2m}");
    const double M = compute_M(g, pairs, grid);
    if (!(M < 0.0)) return Refusal{"M = " + exact(M) + " is not negative; product conditions fail", M, 0.0, 0.0};
    const double eps = compute_epsilon(g, pairs, M, grid);
    const double gap = sup_gap(f, g, Box::cube(m, 0.0, 1.0), grid);
    if (!(gap < eps))
        return Refusal{"sup gap " + exact(gap) + " is not below epsilon " + exact(eps), M, eps, gap};
    return SelfIntersectionCertificate{pairs, M, eps, grid, gap, find_collision(f, pairs, grid)};
}

}  // namespace narrow
