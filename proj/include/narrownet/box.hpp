#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace narrow {

/// i-th of n uniformly spaced points on [lo, hi]; the endpoints are exact.
inline double grid_coordinate(double lo, double hi, std::size_t i, std::size_t n) {
    if (n < 2) return lo;
    if (i + 1 == n) return hi;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

/// Axis-aligned compact box prod [low_i, high_i].
class Box {
public:
    Box() = default;

    Box(std::vector<double> lows, std::vector<double> highs)
        : lows_(std::move(lows)), highs_(std::move(highs)) {
        if (lows_.size() != highs_.size())
            throw std::invalid_argument("Box: lows and highs differ in length");
        for (std::size_t i = 0; i < lows_.size(); ++i) {
            if (!std::isfinite(lows_[i]) || !std::isfinite(highs_[i]))
                throw std::invalid_argument("Box: bounds must be finite");
            if (lows_[i] > highs_[i]) throw std::invalid_argument("Box: low exceeds high");
        }
    }

    static Box interval(double lo, double hi) { return Box({lo}, {hi}); }

    static Box cube(std::size_t dim, double lo, double hi) {
        return Box(std::vector<double>(dim, lo), std::vector<double>(dim, hi));
    }

    std::size_t dim() const { return lows_.size(); }
    double low(std::size_t i) const { return lows_.at(i); }
    double high(std::size_t i) const { return highs_.at(i); }
    const std::vector<double>& lows() const { return lows_; }
    const std::vector<double>& highs() const { return highs_; }

    bool contains(const Eigen::VectorXd& x, double slack = 0.0) const {
        if (static_cast<std::size_t>(x.size()) != dim()) return false;
        for (std::size_t i = 0; i < dim(); ++i)
            if (x[i] < lows_[i] - slack || x[i] > highs_[i] + slack) return false;
        return true;
    }

    friend bool operator==(const Box&, const Box&) = default;

private:
    std::vector<double> lows_;
    std::vector<double> highs_;
};

/// Visits every point of the tensor grid with `per_axis` points per axis
/// in lexicographic order (last axis fastest). Degenerate axes (low == high)
/// contribute a single point.
template <typename Visitor>
void for_each_grid_point(const Box& box, std::size_t per_axis, Visitor&& visit) {
    const std::size_t d = box.dim();
    std::vector<std::size_t> counts(d);
    for (std::size_t a = 0; a < d; ++a) counts[a] = box.low(a) == box.high(a) ? 1 : per_axis;
    std::vector<std::size_t> idx(d, 0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(d));
    for (;;) {
        for (std::size_t a = 0; a < d; ++a)
            x[static_cast<Eigen::Index>(a)] = grid_coordinate(box.low(a), box.high(a), idx[a], counts[a]);
        visit(static_cast<const Eigen::VectorXd&>(x));
        std::size_t a = d;
        while (a > 0) {
            --a;
            if (++idx[a] < counts[a]) break;
            idx[a] = 0;
            if (a == 0) return;
        }
        if (d == 0) return;
    }
}

/// All grid points as columns of a matrix.
inline Eigen::MatrixXd grid_points(const Box& box, std::size_t per_axis) {
    std::vector<Eigen::VectorXd> pts;
    for_each_grid_point(box, per_axis, [&](const Eigen::VectorXd& x) { pts.push_back(x); });
    Eigen::MatrixXd out(static_cast<Eigen::Index>(box.dim()), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t j = 0; j < pts.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = pts[j];
    return out;
}

}  // namespace narrow
