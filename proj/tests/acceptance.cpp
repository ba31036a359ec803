// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance            run everything
//   acceptance --only 7   run criterion 7
//
// Exit code is 0 iff every selected criterion passed.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "../tools/cli.hpp"
#include "narrownet/certifier.hpp"
#include "narrownet/constructions.hpp"
#include "narrownet/experiments.hpp"
#include "narrownet/format.hpp"
#include "narrownet/netio.hpp"
#include "narrownet/network.hpp"
#include "oracles.hpp"

using namespace narrow;

namespace {

// Tolerances and budgets. Changing any of these changes the contract.
namespace tol {
constexpr double c1_gap = 0.3;
constexpr double c1_knot = 1e-9;
constexpr double c1_seconds = 1.0;
constexpr double c2_b = 0.225;
constexpr double c2_b_tol = 1e-12;
constexpr double c2_gap = 0.3;
constexpr double c2_seconds = 1.0;
constexpr double c3_bound = 0.01;
constexpr double c3_seconds = 1.0;
constexpr double c4_tol = 1e-12;
constexpr double c4_seconds = 1.0;
constexpr std::size_t c5_grid = 101;
constexpr double c5_residual = 1e-9;
constexpr double c5_seconds_m2 = 10.0;
constexpr double c6_residual = 1e-8;
constexpr double c6_seconds = 1.0;
constexpr double c7_tight = 1.0 / 220.0;
constexpr double c7_loose = 0.5;
constexpr double c7_seconds = 30.0;
constexpr double c8_delta = 1e-6;
constexpr std::size_t c8_retries = 3;
constexpr double c8_gap = 1e-4;
constexpr double c10_rel = 1e-5;
constexpr long double c10_step = 1e-6L;
constexpr double c10_kink = 1e-6;  // points with a pre-activation this close to a break point are skipped
constexpr double c11_lo = 1e-5, c11_hi = 1e-2;
constexpr double c11_seconds = 5.0;
constexpr double c12_threshold = 1e-3;
constexpr std::size_t c12_steps = 500'000;
constexpr double c12_minutes = 30.0;
constexpr std::size_t c13_narrow_steps = 50'000;
}  // namespace tol

constexpr std::size_t grid = default_grid_points;  // 10,001

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    std::function<Outcome()> run;
};

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double net1(const NeuralNet& net, double x) { return net.forward(Eigen::VectorXd::Constant(1, x))[0]; }

double leaky(double alpha, double x) { return x >= 0 ? x : alpha * x; }

template <typename F>
double grid_max(F&& f, double lo, double hi, std::size_t n = grid) {
    double worst = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, f(lo + (hi - lo) * double(i) / double(n - 1)));
    return worst;
}

std::string seconds_note(double s) { return brief(s) + " s"; }

// ---------------------------------------------------------------------------

Outcome c1() {
    Timer t;
    const double alpha = 0.1, eps = 0.3;
    const auto rep = build_leaky_from_elu(alpha, eps, Box::interval(-9, 10));
    const double gap = grid_max([&](double x) { return std::abs(net1(rep.net, x) - leaky(alpha, x)); }, -9, 10);
    double knot = 0.0;
    for (int i = 1; i <= 3; ++i) {
        const double x = -i * eps / alpha;
        knot = std::max(knot, std::abs(net1(rep.net, x) - leaky(alpha, x)));
    }
    const double s = t.seconds();
    return {rep.stages == 3 && gap <= tol::c1_gap && knot < tol::c1_knot && s < tol::c1_seconds,
            "Phi_" + std::to_string(rep.stages) + " gap " + brief(gap) + " <= 0.3, knot error " + brief(knot) +
                " < 1e-9, " + seconds_note(s)};
}

Outcome c2() {
    Timer t;
    bool ok = true;
    std::ostringstream d;
    std::size_t expect_stages = 2;
    double b = NAN;
    for (double lo : {-3.0, -6.0, -9.0}) {
        const auto rep = build_leaky_from_leaky(0.1, 0.2, 0.3, Box::interval(lo, 10));
        b = rep.coefficients.at(0);
        const double gap = grid_max([&](double x) { return std::abs(net1(rep.net, x) - leaky(0.1, x)); }, lo, 10);
        ok = ok && rep.stages == expect_stages && gap <= tol::c2_gap && std::abs(b - tol::c2_b) <= tol::c2_b_tol;
        d << "Phi_" << rep.stages << " gap " << brief(gap) << " on [" << lo << ",10]; ";
        expect_stages += 2;
    }
    const double s = t.seconds();
    d << "b = " << exact(b) << ", " << seconds_note(s);
    return {ok && s < tol::c2_seconds, d.str()};
}

Outcome c3() {
    Timer t;
    const auto base = build_relu_from_softplus(1.0, 0.01, Box::interval(-10, 10));
    const double sup = grid_max([&](double x) { return net1(base.net, x) - std::max(x, 0.0); }, -10, 10);
    bool ok = base.coefficients.at(0) == 200.0 && sup >= 0.0 && sup <= tol::c3_bound;
    std::ostringstream d;
    d << "n = " << base.coefficients.at(0) << ", sup " << brief(sup) << " in [0, 0.01]; ";

    Rng rng(2024);
    double worst_ratio = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double beta = rng.uniform(0.2, 5.0);
        const double n = std::floor(rng.uniform(1.0, 500.0));
        const double bound = 2.0 / (n * beta);
        const auto rep = build_relu_from_softplus(beta, bound, Box::interval(-10, 10));
        ok = ok && rep.coefficients.at(0) == n;
        // Every grid point, not just the maximum.
        for (std::size_t k = 0; k < grid; ++k) {
            const double x = -10.0 + 20.0 * double(k) / double(grid - 1);
            const double diff = net1(rep.net, x) - std::max(x, 0.0);
            if (diff > bound) ok = false;
            worst_ratio = std::max(worst_ratio, diff / bound);
        }
    }
    const double s = t.seconds();
    d << "10 random (beta, n): max (f_n - ReLU) / (2/(n beta)) = " << brief(worst_ratio) << ", " << seconds_note(s);
    return {ok && s < tol::c3_seconds, d.str()};
}

Outcome c4() {
    Timer t;
    const double e20 = iterated_relu_error(Activation::leaky_relu(0.5), 20, Box::interval(-1, 1));
    const double want = std::pow(0.5, 20);
    bool ok = std::abs(e20 - want) <= tol::c4_tol;
    std::ostringstream d;
    d << "leaky 0.5, n = 20: " << exact(e20) << " vs 0.5^20; elu 0.5:";
    double prev = INFINITY;
    for (std::size_t n : {1, 2, 4, 8, 16, 32}) {
        const double e = iterated_relu_error(Activation::elu(0.5), n, Box::interval(-2, 2));
        ok = ok && e < prev;
        prev = e;
        d << " " << brief(e);
    }
    const double s = t.seconds();
    d << ", " << seconds_note(s);
    return {ok && s < tol::c4_seconds, d.str()};
}

Outcome c5() {
    bool ok = true;
    std::ostringstream d;
    for (std::size_t m : {1, 2}) {
        Timer t;
        const VecMap g = build_g(m);
        const auto pairs = IntervalPairs::canonical(m);
        const double M = compute_M(g, pairs, tol::c5_grid);
        const double eps = M < 0 ? compute_epsilon(g, pairs, M, tol::c5_grid) : 0.0;
        const auto res = certify_self_intersection(g, g, pairs, tol::c5_grid);
        const auto* cert = std::get_if<SelfIntersectionCertificate>(&res);
        const double s = t.seconds();
        const bool this_ok = M < 0 && eps > 0 && cert && cert->collision.gap < tol::c5_residual &&
                             (m != 2 || s < tol::c5_seconds_m2);
        ok = ok && this_ok;
        d << "m=" << m << ": M " << brief(M) << ", eps " << brief(eps);
        if (cert)
            d << ", collision gap " << brief(cert->collision.gap) << " at t1 "
              << brief(cert->collision.t1[0]) << ", t2 " << brief(cert->collision.t2[0]);
        else
            d << ", refused: " << std::get<Refusal>(res).reason;
        d << ", " << seconds_note(s) << "; ";
    }
    return {ok, d.str()};
}

Outcome c6() {
    Timer t;
    Rng rng(6);
    bool ok = true;
    double worst = 0.0;
    int certified = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 1 + trial % 3;
        Eigen::MatrixXd A(n, n);
        Eigen::VectorXd root(n);
        std::vector<int> signs(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            root[i] = rng.uniform(-0.3, 0.3);
            for (Eigen::Index j = 0; j < n; ++j) A(i, j) = rng.uniform(-0.5, 0.5) / double(n);
            const double sgn = rng.uniform(0, 1) < 0.5 ? -1.0 : 1.0;
            A(i, i) = sgn * rng.uniform(2.0, 3.0);
            signs[static_cast<std::size_t>(i)] = sgn > 0 ? -1 : 1;
        }
        const VecMap f{static_cast<std::size_t>(n), static_cast<std::size_t>(n),
                       [A, root](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * (x - root); }};
        const auto r = pm_root(f, Box::cube(static_cast<std::size_t>(n), -1, 1), signs, 21);
        if (!r.certified || !(r.residual < tol::c6_residual)) ok = false;
        if (r.certified) {
            ++certified;
            worst = std::max(worst, r.residual);
        }
    }
    // No sign change: x^2 + 1, and (x0^2 + 0.5, x1) on the square.
    const std::vector<int> one{-1}, two{-1, -1};
    const bool refused1 = !pm_root(scalar_map([](double x) { return x * x + 1.0; }), Box::interval(-1, 1), one, 21)
                               .certified;
    const VecMap g2{2, 2, [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                        return Eigen::Vector2d(x[0] * x[0] + 0.5, x[1]);
                    }};
    const bool refused2 = !pm_root(g2, Box::cube(2, -1, 1), two, 21).certified;
    const double s = t.seconds();
    return {ok && refused1 && refused2 && s < tol::c6_seconds,
            std::to_string(certified) + "/20 linear systems certified, worst residual " + brief(worst) +
                ", non-sign-changing cases " + (refused1 && refused2 ? "refused" : "NOT refused") + ", " +
                seconds_note(s)};
}

Outcome c7() {
    Timer t;
    const auto tight = depth_witness_check(tol::c7_tight);
    const auto loose = depth_witness_check(tol::c7_loose);
    const double s = t.seconds();
    return {tight.infeasible && tight.best_error >= tol::c7_tight && !loose.infeasible &&
                loose.best_error < tol::c7_loose && s < tol::c7_seconds,
            "best error " + brief(tight.best_error) + " >= 1/220 (infeasible); best " + brief(loose.best_error) +
                " < 0.5 with form " + std::to_string(loose.form) + ", " + seconds_note(s)};
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd M(r, c);
    for (auto& v : M.reshaped()) v = rng.uniform(-1, 1);
    return M;
}

NeuralNet random_net(Rng& rng, Eigen::Index in, const std::vector<Eigen::Index>& widths, Eigen::Index out,
                     const Activation& act) {
    std::vector<Layer> layers;
    Eigen::Index d = in;
    for (auto w : widths) {
        layers.push_back({AffineMap(random_matrix(rng, w, d), random_matrix(rng, w, 1).col(0)), act});
        d = w;
    }
    return NeuralNet(std::move(layers), AffineMap(random_matrix(rng, out, d), random_matrix(rng, out, 1).col(0)));
}

Outcome c8() {
    Timer t;
    bool ok = true;
    std::size_t worst_retries = 0;
    double worst_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const Eigen::Index in = 1 + Eigen::Index(seed % 3);
        const std::size_t depth = 1 + seed % 3;
        std::vector<Eigen::Index> widths;
        for (std::size_t k = 0; k < depth; ++k) widths.push_back(2 + Eigen::Index(rng.next() % 4));
        NeuralNet net = random_net(rng, in, widths, 2, Activation::elu(1.0));
        // Rank at most min(rows, cols) - 1 in one hidden layer.
        std::vector<Layer> layers = net.layers();
        auto& W = layers[seed % depth].affine.W;
        const Eigen::Index r = std::min(W.rows(), W.cols()) - 1;
        W = r > 0 ? Eigen::MatrixXd(random_matrix(rng, W.rows(), r) * random_matrix(rng, r, W.cols()))
                  : Eigen::MatrixXd::Zero(W.rows(), W.cols());
        net = NeuralNet(layers, net.final_map());
        if (all_full_rank(net)) ok = false;
        const auto res = perturb_to_full_rank(net, tol::c8_delta, seed);
        const double gap = sup_gap(res.net, net, Box::cube(std::size_t(in), -1, 1), in == 1 ? 1001 : (in == 2 ? 41 : 11));
        worst_retries = std::max(worst_retries, res.retries);
        worst_gap = std::max(worst_gap, gap);
        ok = ok && all_full_rank(res.net) && res.retries <= tol::c8_retries && gap < tol::c8_gap;
    }
    return {ok, "100 nets full rank after perturbation, max retries " + std::to_string(worst_retries) +
                    ", max output gap " + brief(worst_gap) + ", " + seconds_note(t.seconds())};
}

Outcome c9() {
    Rng rng(9);
    std::size_t mismatches = 0, checked = 0;
    for (int n = 0; n < 10; ++n) {
        const Eigen::Index in = 1 + n % 3;
        const NeuralNet net = random_net(rng, in, {3, 2, 4}, 2, n % 2 ? Activation::softplus(1.3) : Activation::elu(0.7));
        const NeuralNet padded = zero_pad(net, 7);
        for (int i = 0; i < 100; ++i) {
            Eigen::VectorXd x(in);
            for (auto& v : x) v = rng.uniform(-3, 3);
            const Eigen::VectorXd a = net.forward(x), b = padded.forward(x);
            ++checked;
            for (Eigen::Index k = 0; k < a.size(); ++k)
                if (std::bit_cast<std::uint64_t>(a[k]) != std::bit_cast<std::uint64_t>(b[k])) {
                    ++mismatches;
                    break;
                }
        }
    }
    return {mismatches == 0 && checked == 1000,
            std::to_string(checked) + " inputs over 10 nets, " + std::to_string(mismatches) + " bitwise mismatches"};
}

// True when every pre-activation of column c stays away from the activation's break points.
bool away_from_kinks(const NeuralNet& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd h = x;
    for (const auto& l : net.layers()) {
        const Eigen::VectorXd z = l.affine(h);
        for (double bp : l.activation.break_points())
            if ((z.array() - bp).abs().minCoeff() < tol::c10_kink) return false;
        h = eval_vec(l.activation, z);
    }
    return true;
}

Outcome c10() {
    Timer t;
    Rng rng(10);
    const std::vector<Activation> acts{Activation::elu(1.0), Activation::leaky_relu(0.1), Activation::relu(),
                                       Activation::softplus(2.0), Activation::selu(1.0507, 1.6733)};
    double worst = 0.0;
    std::size_t skipped = 0, compared = 0;
    for (std::size_t n = 0; n < 5; ++n) {
        const NeuralNet net = random_net(rng, 2, {4, 3, 4}, 2, acts[n]);
        const Activation act = acts[n];
        const auto act_ld = [act](long double z) {
            return oracle::activation_ld(to_token(act.kind()), act.beta(), act.lambda(), z);
        };
        std::vector<oracle::MatrixLd> Ws;
        std::vector<oracle::VectorLd> bs;
        for (std::size_t k = 0; k <= net.depth(); ++k) {
            const AffineMap& a = k < net.depth() ? net.layers()[k].affine : net.final_map();
            Ws.push_back(a.W.cast<long double>());
            bs.push_back(a.b.cast<long double>());
        }
        for (int b = 0; b < 10; ++b) {
            std::vector<Eigen::VectorXd> xs;
            while (xs.size() < 16) {
                Eigen::VectorXd x(2);
                x << rng.uniform(-1, 1), rng.uniform(-1, 1);
                if (away_from_kinks(net, x))
                    xs.push_back(x);
                else
                    ++skipped;
            }
            Eigen::MatrixXd X(2, 16), Y(2, 16);
            for (Eigen::Index c = 0; c < 16; ++c) {
                X.col(c) = xs[std::size_t(c)];
                Y.col(c) << rng.uniform(-1, 1), rng.uniform(-1, 1);
            }
            const Gradients g = gradients(net, Dataset(X, Y, DatasetRole::train));
            for (std::size_t k = 0; k < Ws.size(); ++k)
                for (Eigen::Index i = 0; i < Ws[k].rows(); ++i)
                    for (Eigen::Index j = 0; j <= Ws[k].cols(); ++j) {
                        const bool bias = j == Ws[k].cols();
                        long double& p = bias ? bs[k][i] : Ws[k](i, j);
                        const long double p0 = p;
                        p = p0 + tol::c10_step;
                        const long double up = oracle::mse_ld(Ws, bs, act_ld, X, Y);
                        p = p0 - tol::c10_step;
                        const long double down = oracle::mse_ld(Ws, bs, act_ld, X, Y);
                        p = p0;
                        const double fd = static_cast<double>((up - down) / (2 * tol::c10_step));
                        const double an = bias ? g.db[k][i] : g.dW[k](i, j);
                        const double denom = std::max(std::abs(fd), std::abs(an));
                        if (denom > 0) worst = std::max(worst, std::abs(an - fd) / denom);
                        ++compared;
                    }
        }
    }
    return {worst < tol::c10_rel, "max relative error " + brief(worst) + " over " + std::to_string(compared) +
                                      " partials (5 nets x 10 batches, central differences, " +
                                      std::to_string(skipped) + " kink-adjacent points skipped), " +
                                      seconds_note(t.seconds())};
}

Outcome c11() {
    Timer t;
    const auto dir = std::filesystem::temp_directory_path() / "narrownet_acceptance_c11";
    std::ostringstream out, err;
    const int code = cli::run({"eval", "--net", "appendix_c.net", "--k", "2", "--out", dir.string()}, out, err);
    if (code != 0) return {false, "eval exited with " + std::to_string(code) + ": " + err.str()};
    std::ifstream in(dir / "appendix_c.eval_k2.json");
    const auto j = json::parse(in);
    const double L = j.at("train_loss").get<double>(), Lv = j.at("val_loss").get<double>();
    const double s = t.seconds();
    const bool ok = L >= tol::c11_lo && L <= tol::c11_hi && Lv >= tol::c11_lo && Lv <= tol::c11_hi &&
                    s < tol::c11_seconds;
    return {ok, "L = " + brief(L) + ", L~ = " + brief(Lv) + " (band [1e-5, 1e-2]), " + seconds_note(s)};
}

TrainConfig c12_config(std::uint64_t seed, std::size_t steps) {
    TrainConfig cfg;
    cfg.max_steps = steps;
    cfg.success_threshold = tol::c12_threshold;
    cfg.seed = seed;
    return cfg;
}

Outcome c12() {
    Timer t;
    const DiskData d = gen_disk(2);
    std::ostringstream det;
    bool wide_ok = false;
    for (std::uint64_t seed = 0; seed < 3 && !wide_ok; ++seed) {
        const auto r = train(4, 4, Activation::elu(1.0), d.train, d.validation, c12_config(seed, tol::c12_steps));
        wide_ok = r.success;
        det << "w4 s" << seed << ": " << (r.success ? "ok" : "no") << " at " << r.steps << " (L " << brief(r.train_loss)
            << ", L~ " << brief(r.val_loss) << "); ";
        std::cerr << "  " << det.str() << "\n";
    }
    bool narrow_all_fail = true;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto r = train(3, 4, Activation::elu(1.0), d.train, d.validation, c12_config(seed, tol::c12_steps));
        narrow_all_fail = narrow_all_fail && !r.success;
        det << "w3 s" << seed << ": " << (r.success ? "ok" : "no") << " at " << r.steps << " (L "
            << brief(r.train_loss) << ", L~ " << brief(r.val_loss) << "); ";
        std::cerr << "  w3 seed " << seed << " done\n";
    }
    const double minutes = t.seconds() / 60.0;
    det << brief(minutes) << " min";
    return {wide_ok && narrow_all_fail && minutes < tol::c12_minutes, det.str()};
}

Outcome c13() {
    Timer t;
    const DiskData d = gen_disk(2);
    bool ok = true;
    std::ostringstream det;
    for (auto [width, steps] : {std::pair<std::size_t, std::size_t>{4, tol::c12_steps}, {3, tol::c13_narrow_steps}}) {
        const auto cfg = c12_config(0, steps);
        const auto a = train(width, 4, Activation::elu(1.0), d.train, d.validation, cfg);
        const auto b = train(width, 4, Activation::elu(1.0), d.train, d.validation, cfg);
        const bool same = std::bit_cast<std::uint64_t>(a.train_loss) == std::bit_cast<std::uint64_t>(b.train_loss) &&
                          std::bit_cast<std::uint64_t>(a.val_loss) == std::bit_cast<std::uint64_t>(b.val_loss) &&
                          a.steps == b.steps && a.net == b.net;
        ok = ok && same;
        det << "w" << width << " s0 (" << a.steps << " steps): L " << exact(a.train_loss) << (same ? " == " : " != ")
            << exact(b.train_loss) << "; ";
    }
    det << seconds_note(t.seconds());
    return {ok, det.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--only", only, "Run a single criterion (1-13)")->check(CLI::Range(1, 13));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "ELU -> LeakyReLU construction", c1},
        {2, "LeakyReLU -> LeakyReLU construction", c2},
        {3, "Softplus rescaling bound", c3},
        {4, "Iterated activation convergence", c4},
        {5, "Self-intersection certificate", c5},
        {6, "Poincare-Miranda roots", c6},
        {7, "Depth witness", c7},
        {8, "Full-rank perturbation", c8},
        {9, "Zero padding", c9},
        {10, "Gradient correctness", c10},
        {11, "Shipped width-4 network on DISK", c11},
        {12, "Desk-scale width 4 vs width 3 training", c12},
        {13, "Training determinism", c13},
    };
    int failed = 0;
    for (const auto& c : all) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " C" << (c.id < 10 ? "0" : "") << c.id << " " << c.title << ": "
                  << o.detail << std::endl;
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
