#include <gtest/gtest.h>

#include <cmath>

#include "narrownet/constructions.hpp"
#include "narrownet/random.hpp"

using namespace narrow;

namespace {

double net1(const NeuralNet& n, double x) { return n.forward(Eigen::VectorXd::Constant(1, x))[0]; }

/// k with k (e^u - 1) = -eps, by bisection.
double elu_scale_by_bisection(double u, double eps) {
    double lo = 1e-9, hi = 1e6;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid * (std::exp(u) - 1.0) > -eps ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double grid_sup(const std::function<double(double)>& f, double lo, double hi, std::size_t n = 10001) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) w = std::max(w, std::abs(f(grid_coordinate(lo, hi, i, n))));
    return w;
}

}  // namespace

TEST(ScalarProgram, NetMatchesProgram) {
    ScalarProgram p;
    p.affine(2.0, 1.0).activation(Activation::elu(0.5)).affine(-1.0, 0.3).activation(Activation::leaky_relu(0.1));
    p.affine(0.5, 0.0);
    const NeuralNet net = p.to_net();
    EXPECT_EQ(net.depth(), 2u);
    EXPECT_EQ(net.width(), 1u);
    EXPECT_EQ(p.activation_count(), 2u);
    for (double x = -3.0; x <= 3.0; x += 0.37) EXPECT_NEAR(net1(net, x), p(x), 1e-14);
}

TEST(LeakyFromElu, FirstScaleAndKnots) {
    const auto rep = build_leaky_from_elu(0.1, 0.3, Box::interval(-9, 10));
    ASSERT_EQ(rep.stages, 3u);
    ASSERT_EQ(rep.coefficients.size(), 3u);
    EXPECT_NEAR(rep.coefficients[0], 0.3157187089473768, 1e-15);
    EXPECT_NEAR(rep.coefficients[0], elu_scale_by_bisection(-3.0, 0.3), 1e-12);

    // Later scales from the stage condition Phi_n(-n eps/alpha) = -n eps.
    ScalarProgram partial;
    for (std::size_t n = 1; n <= 3; ++n) {
        const double shift = (n - 1) * 0.3;
        const double u = partial(-static_cast<double>(n) * 3.0) + shift;
        EXPECT_NEAR(rep.coefficients[n - 1], elu_scale_by_bisection(u, 0.3), 1e-10) << "n=" << n;
        partial.affine(1.0, shift).activation(Activation::elu(rep.coefficients[n - 1])).affine(1.0, -shift);
    }

    const auto lr = Activation::leaky_relu(0.1);
    for (int i = 1; i <= 3; ++i) EXPECT_LT(std::abs(rep.program(-i * 3.0) - lr(-i * 3.0)), 1e-9);
    for (double x : {0.0, 0.5, 3.0, 10.0}) EXPECT_NEAR(rep.program(x), x, 1e-12);
    EXPECT_LE(rep.measured_gap, 0.3);
    EXPECT_NEAR(grid_sup([&](double x) { return net1(rep.net, x) - lr(x); }, -9, 10), rep.measured_gap, 1e-12);
    EXPECT_EQ(rep.net.width(), 1u);
    EXPECT_EQ(rep.net.depth(), 3u);
}

TEST(LeakyFromElu, GapShrinksWithEpsilon) {
    for (double eps : {0.3, 0.1, 0.03}) {
        const auto rep = build_leaky_from_elu(0.2, eps, Box::interval(-5, 5));
        EXPECT_LE(rep.measured_gap, eps);
        EXPECT_EQ(rep.stages, static_cast<std::size_t>(std::ceil(0.2 * 5 / eps - 1e-9)));
    }
    const auto trivial = build_leaky_from_elu(0.2, 0.1, Box::interval(0, 5));
    EXPECT_EQ(trivial.stages, 0u);
    EXPECT_EQ(trivial.measured_gap, 0.0);
    EXPECT_THROW(build_leaky_from_elu(0.2, -0.1, Box::interval(-1, 1)), std::invalid_argument);
}

TEST(LeakyFromLeaky, OffsetAndStages) {
    EXPECT_NEAR(leaky_bracket_offset(0.1, 0.04, 0.2, 0.3), 0.225, 1e-12);
    const double oracle_b = (1.0 / 0.04 - 1.0 / 0.1) / (1.0 / 0.04 - 1.0 / 0.2) * 0.3;
    EXPECT_NEAR(oracle_b, 0.22499999999999998, 1e-17);

    const auto lr = Activation::leaky_relu(0.1);
    std::size_t k = 1;
    for (double lo : {-3.0, -6.0, -9.0}) {
        const auto rep = build_leaky_from_leaky(0.1, 0.2, 0.3, Box::interval(lo, 10));
        EXPECT_EQ(rep.stages, 2 * k);
        EXPECT_NEAR(rep.coefficients.at(0), 0.225, 1e-12);
        EXPECT_DOUBLE_EQ(rep.coefficients.at(1), 0.04);
        EXPECT_DOUBLE_EQ(rep.coefficients.at(2), 0.2);
        EXPECT_LE(rep.measured_gap, 0.3);
        EXPECT_LE(grid_sup([&](double x) { return net1(rep.net, x) - lr(x); }, lo, 10), 0.3 + 1e-12);
        for (const auto& l : rep.net.layers()) EXPECT_EQ(l.activation, Activation::leaky_relu(0.2));
        ++k;
    }
}

TEST(LeakyFromLeaky, SpecialCases) {
    // Identity.
    auto rep = build_leaky_from_leaky(1.0, 0.2, 0.3, Box::interval(-5, 5));
    EXPECT_EQ(rep.stages, 0u);
    EXPECT_EQ(rep.measured_gap, 0.0);
    EXPECT_EQ(rep.net.depth(), 0u);
    // Exact power of beta.
    rep = build_leaky_from_leaky(0.04, 0.2, 0.01, Box::interval(-50, 5));
    EXPECT_EQ(rep.net.depth(), 2u);
    EXPECT_LT(rep.measured_gap, 1e-12);
    // beta > 1 through the reciprocal identity.
    rep = build_leaky_from_leaky(0.1, 5.0, 0.3, Box::interval(-9, 10));
    EXPECT_LE(rep.measured_gap, 0.3);
    // alpha > 1 by reflection.
    rep = build_leaky_from_leaky(3.0, 0.5, 0.2, Box::interval(-4, 4));
    EXPECT_LE(rep.measured_gap, 0.2);
    // Positive-only domain needs no bends.
    rep = build_leaky_from_leaky(0.3, 0.5, 0.01, Box::interval(0.5, 4));
    EXPECT_EQ(rep.measured_gap, 0.0);
    EXPECT_THROW(build_leaky_from_leaky(0.3, 1.0, 0.1, Box::interval(-1, 1)), std::invalid_argument);
    EXPECT_THROW(build_leaky_from_leaky(0.3, 0.5, 0.1, Box::cube(2, -1, 1)), std::invalid_argument);
}

TEST(LeakyFromLeaky, ReciprocalIdentity) {
    for (double a : {0.1, 0.5, 2.0}) {
        const NeuralNet net = leaky_reciprocal(a);
        const auto target = Activation::leaky_relu(1.0 / a);
        for (double x = -4.0; x <= 4.0; x += 0.25) EXPECT_NEAR(net1(net, x), target(x), 1e-12);
    }
}

TEST(LeakyFromLeaky, RandomParametersStayWithinEpsilon) {
    Rng rng(21);
    for (int t = 0; t < 25; ++t) {
        const double alpha = rng.uniform(0.02, 0.95);
        const double beta = rng.uniform(0.1, 0.9);
        const double eps = rng.uniform(0.05, 0.5);
        const double lo = rng.uniform(-10.0, -0.5);
        const auto rep = build_leaky_from_leaky(alpha, beta, eps, Box::interval(lo, 3.0));
        EXPECT_LE(rep.measured_gap, eps) << alpha << " " << beta << " " << eps << " " << lo;
    }
}

TEST(ReluFromSoftplus, Examples) {
    const auto rep = build_relu_from_softplus(1.0, 0.01);
    EXPECT_EQ(rep.coefficients.at(0), 200.0);
    EXPECT_NEAR(rep.program(0.0), 0.0034657359027997266, 1e-17);
    EXPECT_GE(rep.measured_gap, 0.0);
    EXPECT_LE(rep.measured_gap, 0.01);
    EXPECT_NEAR(rep.measured_gap, std::log(2.0) / 200.0, 1e-15);

    Rng rng(8);
    for (int t = 0; t < 10; ++t) {
        const double beta = rng.uniform(0.2, 5.0);
        const double n = std::floor(rng.uniform(1.0, 500.0));
        const auto sp = Activation::softplus(beta);
        for (std::size_t i = 0; i < 10001; ++i) {
            const double x = grid_coordinate(-10, 10, i, 10001);
            const double d = sp(n * x) / n - std::max(x, 0.0);
            EXPECT_GE(d, -1e-12 * std::max(1.0, std::abs(x)));  // rounding in n x / n
            EXPECT_LE(d, 2.0 / (n * beta));
        }
    }
}

TEST(ReluFromIteration, LeastIterateCount) {
    auto rep = build_relu_from_iteration(Activation::leaky_relu(0.5), 1e-3, Box::interval(-1, 1));
    EXPECT_EQ(rep.stages, 10u);  // 0.5^10 < 1e-3 < 0.5^9
    EXPECT_LE(rep.measured_gap, 1e-3);

    rep = build_relu_from_iteration(Activation::celu(1.0), 0.05, Box::interval(-1, 1));
    EXPECT_LE(rep.measured_gap, 0.05);
    EXPECT_GT(iterated_relu_error(Activation::celu(1.0), rep.stages - 1, Box::interval(-1, 1)), 0.05);

    EXPECT_THROW(build_relu_from_iteration(Activation::softplus(1.0), 0.1, Box::interval(-1, 1)), ConstructionError);
    EXPECT_THROW(build_relu_from_iteration(Activation::leaky_relu(1.5), 0.1, Box::interval(-1, 1)),
                 ConstructionError);
}

TEST(Substitute, LeakyNetworkToElu) {
    Rng rng(12);
    std::vector<Layer> layers;
    Eigen::Index dim = 2;
    for (int k = 0; k < 2; ++k) {
        Eigen::MatrixXd W(3, dim);
        for (auto& w : W.reshaped()) w = rng.uniform(-1, 1);
        Eigen::VectorXd b(3);
        for (auto& v : b) v = rng.uniform(-0.5, 0.5);
        layers.push_back({AffineMap(W, b), Activation::leaky_relu(0.1)});
        dim = 3;
    }
    Eigen::MatrixXd Wf(1, 3);
    Wf << 1.0, -0.5, 0.25;
    const NeuralNet net(layers, AffineMap(Wf, Eigen::VectorXd::Zero(1)));
    const Box K = Box::cube(2, -1, 1);

    const auto res = substitute_activations(net, SubstitutionTarget::elu(), 0.05, K);
    EXPECT_LE(res.measured_gap, 0.05);
    EXPECT_EQ(res.net.width(), net.width());
    EXPECT_LE(sup_gap(res.net, net, K, 61), 0.05 + 1e-3);
    for (const auto& l : res.net.layers()) EXPECT_EQ(l.activation.kind(), ActivationKind::elu);

    const auto res2 = substitute_activations(net, SubstitutionTarget::leaky(0.5), 0.05, K);
    EXPECT_LE(res2.measured_gap, 0.05);
    EXPECT_EQ(res2.net.width(), net.width());

    EXPECT_THROW(substitute_activations(net, SubstitutionTarget::softplus(1.0), 0.05, K), SubstitutionError);
}

TEST(Substitute, ReluNetworkToSoftplusAndIterates) {
    Eigen::MatrixXd W0(2, 1);
    W0 << 1, -1;
    Eigen::MatrixXd W1(1, 2);
    W1 << 1, 1;
    const NeuralNet abs_net({{AffineMap(W0, Eigen::VectorXd::Zero(2)), Activation::relu()}},
                            AffineMap(W1, Eigen::VectorXd::Zero(1)));
    const Box K = Box::interval(-2, 2);
    const auto sp = substitute_activations(abs_net, SubstitutionTarget::softplus(1.0), 0.02, K);
    EXPECT_LE(sp.measured_gap, 0.02);
    const auto it = substitute_activations(abs_net, SubstitutionTarget::iterate(Activation::elu(0.5)), 0.02, K);
    EXPECT_LE(it.measured_gap, 0.02);
    EXPECT_EQ(it.net.width(), 2u);
}

TEST(DepthWitness, FormsAndErrors) {
    EXPECT_EQ(depth_witness_target(-1.0), -0.2);
    EXPECT_EQ(depth_witness_target(0.5), 0.5);
    // Both forms are continuous at c.
    for (int form : {1, 2}) {
        const double c = 0.3;
        EXPECT_NEAR(depth_witness_form(form, 0.7, -0.2, c, c - 1e-12), depth_witness_form(form, 0.7, -0.2, c, c + 1e-12),
                    1e-10);
    }
    // On [0, 1] the target itself is realized by form 1 with a = 1, b = 0, c = 1.
    EXPECT_EQ(depth_witness_error(1, 1.0, 0.0, 1.0, 0.0), 0.0);
    const auto exact = depth_witness_check(1e-6, {}, 0.0);
    EXPECT_FALSE(exact.infeasible);
    EXPECT_EQ(exact.best_error, 0.0);
}

TEST(DepthWitness, InfeasibleOnFullInterval) {
    const auto r = depth_witness_check(1.0 / 220.0);
    EXPECT_TRUE(r.infeasible);
    EXPECT_GE(r.best_error, 1.0 / 220.0);
    EXPECT_LT(r.best_error, 0.5);
    EXPECT_FALSE(depth_witness_check(0.5).infeasible);

    // Random probes never beat the reported optimum.
    Rng rng(14);
    for (int t = 0; t < 20000; ++t) {
        const int form = 1 + static_cast<int>(rng.next() % 2);
        const double e = depth_witness_error(form, rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1));
        EXPECT_GE(e, r.best_error - 1e-9);
    }
}
