#pragma once

// Narrow-network training on the DISK dataset: targets rot_k, full-batch
// Adam with reverse-mode gradients, and the dual train/validation success
// criterion.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "narrownet/activation.hpp"
#include "narrownet/format.hpp"
#include "narrownet/network.hpp"
#include "narrownet/random.hpp"

namespace narrow {

/// (r cos t, r sin t) -> (r cos kt, r sin kt).
inline Eigen::Vector2d rot_k(const Eigen::Vector2d& p, int k) {
    const double r = std::hypot(p[0], p[1]);
    if (r == 0.0) return Eigen::Vector2d::Zero();
    const double t = std::atan2(p[1], p[0]) * static_cast<double>(k);
    return {r * std::cos(t), r * std::sin(t)};
}

enum class DatasetRole { train, validation };

/// Input/target pairs stored as matrix columns.
struct Dataset {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;
    DatasetRole role = DatasetRole::train;

    Dataset() = default;
    Dataset(Eigen::MatrixXd x, Eigen::MatrixXd y, DatasetRole r)
        : inputs(std::move(x)), targets(std::move(y)), role(r) {
        if (inputs.cols() != targets.cols()) throw std::invalid_argument("Dataset: inputs and targets differ in count");
    }

    std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(inputs.rows()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(targets.rows()); }
};

struct DiskData {
    Dataset train;
    Dataset validation;
};

/// Training inputs: the 0.02-spaced grid on [-1,1]^2 inside the closed unit
/// disk. Validation inputs: the 0.05-spaced grid inside the disk, without the
/// points already in the training set. Membership is decided in exact
/// integer arithmetic, so points on the circle are included.
inline DiskData gen_disk(int k) {
    if (k < 1) throw std::invalid_argument("gen_disk: k must be >= 1");
    auto build = [k](int half, auto keep, DatasetRole role) {
        std::vector<Eigen::Vector2d> pts;
        for (int i = 0; i <= 2 * half; ++i)
            for (int j = 0; j <= 2 * half; ++j) {
                const int u = i - half, v = j - half;
                if (u * u + v * v > half * half || !keep(u, v)) continue;
                pts.emplace_back(static_cast<double>(u) / half, static_cast<double>(v) / half);
            }
        Eigen::MatrixXd x(2, static_cast<Eigen::Index>(pts.size())), y(2, x.cols());
        for (std::size_t c = 0; c < pts.size(); ++c) {
            x.col(static_cast<Eigen::Index>(c)) = pts[c];
            y.col(static_cast<Eigen::Index>(c)) = rot_k(pts[c], k);
        }
        return Dataset(std::move(x), std::move(y), role);
    };
    // A 0.05-grid point u/20 lies on the 0.02 grid iff 5u/2 is an integer.
    return {build(50, [](int, int) { return true; }, DatasetRole::train),
            build(20, [](int u, int v) { return u % 2 != 0 || v % 2 != 0; }, DatasetRole::validation)};
}

/// sum_i ||y_i - f(x_i)||^2 / (N * n), summed in column order.
inline double mse(const NeuralNet& net, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("mse: empty dataset");
    if (net.input_dim() != data.input_dim() || net.output_dim() != data.output_dim())
        throw std::invalid_argument("mse: network and dataset dimensions differ");
    const Eigen::MatrixXd out = net.forward_batch(data.inputs);
    double s = 0.0;
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const double d = data.targets(r, c) - out(r, c);
            s += d * d;
        }
    return s / (static_cast<double>(data.size()) * static_cast<double>(data.output_dim()));
}

struct Losses {
    double train = 0.0;
    double validation = 0.0;
};

inline Losses mse_losses(const NeuralNet& net, const Dataset& train, const Dataset& val) {
    return {mse(net, train), mse(net, val)};
}

// ---------------------------------------------------------------------------
// Gradients

/// One entry per affine map, the final map last.
struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
};

namespace detail {

/// Features x samples with each feature contiguous; the hidden layers are
/// narrow and the batch is long, so the kernels below work row by row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// out = W in + b.
inline void affine_rows(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const RowMatrix& in, RowMatrix& out) {
    out.resize(W.rows(), in.cols());
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        out.row(i).setConstant(b[i]);
        for (Eigen::Index j = 0; j < W.cols(); ++j) out.row(i) += W(i, j) * in.row(j);
    }
}

/// Z <- sigma(Z) and D <- sigma'(Z), elementwise; left-branch derivative
/// at kinks.
inline void activate_rows(const Activation& act, RowMatrix& Z, RowMatrix& D, Eigen::ArrayXd& scratch) {
    const Eigen::Index n = Z.cols();
    const double beta = act.beta();
    D.resize(Z.rows(), n);
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        double* z = Z.row(i).data();
        double* d = D.row(i).data();
        switch (act.kind()) {
            case ActivationKind::relu:
                for (Eigen::Index c = 0; c < n; ++c) {
                    const bool pos = z[c] > 0.0;
                    d[c] = pos ? 1.0 : 0.0;
                    z[c] = pos ? z[c] : 0.0;
                }
                break;
            case ActivationKind::leaky_relu:
                for (Eigen::Index c = 0; c < n; ++c) {
                    const bool pos = z[c] > 0.0;
                    d[c] = pos ? 1.0 : beta;
                    z[c] = pos ? z[c] : beta * z[c];
                }
                break;
            case ActivationKind::elu: {
                // Vectorized exp; close to, not bitwise equal to, the expm1 in Activation.
                scratch = Eigen::Map<const Eigen::ArrayXd>(z, n).min(0.0).exp();
                const double* e = scratch.data();
                for (Eigen::Index c = 0; c < n; ++c) {
                    const bool pos = z[c] > 0.0;
                    d[c] = pos ? 1.0 : beta * e[c];
                    z[c] = pos ? z[c] : beta * (e[c] - 1.0);
                }
                break;
            }
            default:
                for (Eigen::Index c = 0; c < n; ++c) {
                    d[c] = act.derivative(z[c]);
                    z[c] = act(z[c]);
                }
        }
    }
}

/// Parameters of a network with the final map last.
struct Params {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
    std::vector<Activation> acts;

    explicit Params(const NeuralNet& net) {
        for (const auto& l : net.layers()) {
            W.push_back(l.affine.W);
            b.push_back(l.affine.b);
            acts.push_back(l.activation);
        }
        W.push_back(net.final_map().W);
        b.push_back(net.final_map().b);
    }

    NeuralNet to_net() const {
        std::vector<Layer> layers;
        for (std::size_t k = 0; k < acts.size(); ++k) layers.push_back({AffineMap(W[k], b[k]), acts[k]});
        return NeuralNet(std::move(layers), AffineMap(W.back(), b.back()));
    }
};

struct RowBatch {
    RowMatrix X, T;
    explicit RowBatch(const Dataset& d) : X(d.inputs), T(d.targets) {}
};

/// Buffers reused across training steps.
struct Workspace {
    std::vector<RowMatrix> H, D;
    RowMatrix delta, back;
    Eigen::ArrayXd scratch;
};

inline void backprop(const Params& p, const RowBatch& batch, Workspace& ws, Gradients& g) {
    const std::size_t L = p.acts.size();
    ws.H.resize(L + 1);
    ws.D.resize(L);
    g.dW.resize(L + 1);
    g.db.resize(L + 1);
    const RowMatrix* h = &batch.X;
    for (std::size_t k = 0; k < L; ++k) {
        affine_rows(p.W[k], p.b[k], *h, ws.H[k + 1]);
        activate_rows(p.acts[k], ws.H[k + 1], ws.D[k], ws.scratch);
        h = &ws.H[k + 1];
    }
    affine_rows(p.W[L], p.b[L], *h, ws.delta);
    const double scale = 2.0 / (static_cast<double>(batch.X.cols()) * static_cast<double>(batch.T.rows()));
    ws.delta = scale * (ws.delta - batch.T);
    for (std::size_t k = L + 1; k-- > 0;) {
        const RowMatrix& in = k == 0 ? batch.X : ws.H[k];
        const Eigen::MatrixXd& W = p.W[k];
        g.dW[k].resize(W.rows(), W.cols());
        g.db[k].resize(W.rows());
        for (Eigen::Index i = 0; i < W.rows(); ++i) {
            g.db[k][i] = ws.delta.row(i).sum();
            for (Eigen::Index j = 0; j < W.cols(); ++j) g.dW[k](i, j) = ws.delta.row(i).dot(in.row(j));
        }
        if (k == 0) break;
        ws.back.resize(W.cols(), ws.delta.cols());
        for (Eigen::Index j = 0; j < W.cols(); ++j) {
            ws.back.row(j) = W(0, j) * ws.delta.row(0);
            for (Eigen::Index i = 1; i < W.rows(); ++i) ws.back.row(j) += W(i, j) * ws.delta.row(i);
            ws.back.row(j).array() *= ws.D[k - 1].row(j).array();
        }
        std::swap(ws.back, ws.delta);
    }
}

}  // namespace detail

/// Reverse-mode gradient of mse(net, batch) with respect to every weight
/// and bias. At a kink the left-branch derivative is used.
inline Gradients gradients(const NeuralNet& net, const Dataset& batch) {
    if (batch.size() == 0) throw std::invalid_argument("gradients: empty batch");
    if (net.input_dim() != batch.input_dim() || net.output_dim() != batch.output_dim())
        throw std::invalid_argument("gradients: network and batch dimensions differ");
    detail::Workspace ws;
    Gradients g;
    detail::backprop(detail::Params(net), detail::RowBatch(batch), ws, g);
    return g;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double lr_init = 1e-4;
    double lr_decay = 5e-6;  ///< subtracted once per decay interval
    std::size_t decay_interval_steps = 2'000'000;
    double lr_floor = 1e-5;
    std::size_t max_steps = 500'000;
    double success_threshold = 1e-4;
    std::size_t eval_interval = 1000;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    /// Every violated constraint, in field order.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (!(lr_init > 0.0)) out.emplace_back("lr_init must be positive");
        if (!(lr_decay >= 0.0)) out.emplace_back("lr_decay must be nonnegative");
        if (decay_interval_steps == 0) out.emplace_back("decay_interval_steps must be positive");
        if (!(lr_floor > 0.0)) out.emplace_back("lr_floor must be positive");
        if (max_steps == 0) out.emplace_back("max_steps must be positive");
        if (!(success_threshold > 0.0)) out.emplace_back("success_threshold must be positive");
        if (eval_interval == 0) out.emplace_back("eval_interval must be positive");
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
            out.emplace_back("Adam betas must lie in [0, 1)");
        if (!(adam_eps > 0.0)) out.emplace_back("adam_eps must be positive");
        return out;
    }

    /// Throws one invalid_argument listing all problems.
    void validate() const {
        const auto p = problems();
        if (p.empty()) return;
        std::string msg = "invalid training config: " + p[0];
        for (std::size_t i = 1; i < p.size(); ++i) msg += "; " + p[i];
        throw std::invalid_argument(msg);
    }

    /// Rate used for the update that follows `step` completed updates.
    double learning_rate(std::size_t step) const {
        const double decayed = lr_init - lr_decay * static_cast<double>(step / decay_interval_steps);
        return std::max(lr_floor, decayed);
    }
};

struct CurvePoint {
    std::size_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainReport {
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::size_t steps = 0;
    bool success = false;
    std::vector<CurvePoint> loss_curve;
    NeuralNet net;
};

/// Adam state over the parameters of a fixed architecture.
class Adam {
public:
    Adam(const NeuralNet& net, double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {
        auto zeros = [&](const AffineMap& a) {
            mW_.push_back(Eigen::MatrixXd::Zero(a.W.rows(), a.W.cols()));
            mb_.push_back(Eigen::VectorXd::Zero(a.b.size()));
        };
        for (const auto& l : net.layers()) zeros(l.affine);
        zeros(net.final_map());
        vW_ = mW_;
        vb_ = mb_;
    }

    /// One bias-corrected step on W and b in place.
    void step(std::vector<Eigen::MatrixXd>& W, std::vector<Eigen::VectorXd>& b, const Gradients& g, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < W.size(); ++k) {
            update(W[k].array(), mW_[k].array(), vW_[k].array(), g.dW[k].array(), lr, c1, c2);
            update(b[k].array(), mb_[k].array(), vb_[k].array(), g.db[k].array(), lr, c1, c2);
        }
    }

    std::size_t steps() const { return t_; }

private:
    template <typename P, typename M, typename G>
    void update(P&& p, M&& m, M&& v, const G& g, double lr, double c1, double c2) const {
        m = b1_ * m + (1.0 - b1_) * g;
        v = b2_ * v + (1.0 - b2_) * g.square();
        p -= lr * (m / c1) / ((v / c2).sqrt() + eps_);
    }

    double b1_, b2_, eps_;
    std::size_t t_ = 0;
    std::vector<Eigen::MatrixXd> mW_, vW_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

/// Uniform(-r, r) weights with r = sqrt(6 / (fan_in + fan_out)), zero
/// biases. Entries are drawn map by map, row-major.
inline NeuralNet init_network(std::size_t in_dim, std::size_t width, std::size_t depth, std::size_t out_dim,
                              const Activation& act, std::uint64_t seed) {
    if (in_dim == 0 || out_dim == 0) throw std::invalid_argument("init_network: dimensions must be positive");
    if (depth > 0 && width == 0) throw std::invalid_argument("init_network: width must be positive");
    Rng rng(seed);
    auto draw = [&rng](std::size_t rows, std::size_t cols) {
        const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Eigen::MatrixXd W(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-r, r);
        return AffineMap(std::move(W), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows)));
    };
    std::vector<Layer> layers;
    std::size_t dim = in_dim;
    for (std::size_t k = 0; k < depth; ++k) {
        layers.push_back({draw(width, dim), act});
        dim = width;
    }
    return NeuralNet(std::move(layers), draw(out_dim, dim));
}

/// Full-batch Adam from `initial`. Losses are checked every eval_interval
/// steps and after the last step; training stops as soon as both fall
/// below the threshold.
inline TrainReport train_net(const NeuralNet& initial, const Dataset& train, const Dataset& val,
                             const TrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0 || val.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (initial.input_dim() != train.input_dim() || initial.output_dim() != train.output_dim())
        throw std::invalid_argument("train: network and dataset dimensions differ");
    detail::Params params(initial);
    const detail::RowBatch batch(train);
    detail::Workspace ws;
    Gradients grad;

    TrainReport rep;
    Adam adam(initial, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    auto evaluate = [&](std::size_t step) {
        rep.net = params.to_net();
        const Losses l = mse_losses(rep.net, train, val);
        rep.train_loss = l.train;
        rep.val_loss = l.validation;
        rep.steps = step;
        rep.success = l.train < cfg.success_threshold && l.validation < cfg.success_threshold;
        rep.loss_curve.push_back({step, cfg.learning_rate(step), l.train, l.validation});
    };

    evaluate(0);
    for (std::size_t step = 0; step < cfg.max_steps && !rep.success;) {
        detail::backprop(params, batch, ws, grad);
        adam.step(params.W, params.b, grad, cfg.learning_rate(step));
        ++step;
        if (step % cfg.eval_interval == 0 || step == cfg.max_steps) evaluate(step);
    }
    return rep;
}

/// Width-uniform network of the given depth (0 gives an affine map),
/// initialized from cfg.seed and trained on (train, val).
inline TrainReport train(std::size_t width, std::size_t depth, const Activation& act, const Dataset& train,
                         const Dataset& val, const TrainConfig& cfg) {
    return train_net(init_network(train.input_dim(), width, depth, train.output_dim(), act, cfg.seed), train, val,
                     cfg);
}

struct SweepRow {
    std::size_t depth = 0;
    std::uint64_t seed = 0;
    TrainReport report;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<std::size_t> min_success_depth;
};

/// Trains on DISK(k) at each depth in turn; the run at index i uses seed
/// cfg.seed + i. With stop_at_success the sweep ends at the first success.
inline SweepResult depth_sweep(std::size_t width, const Activation& act, int k, const std::vector<std::size_t>& depths,
                               const TrainConfig& cfg, bool stop_at_success = true) {
    if (depths.empty()) throw std::invalid_argument("depth_sweep: no depths given");
    if (!std::is_sorted(depths.begin(), depths.end()))
        throw std::invalid_argument("depth_sweep: depths must be ascending");
    const DiskData data = gen_disk(k);
    SweepResult out;
    for (std::size_t i = 0; i < depths.size(); ++i) {
        TrainConfig c = cfg;
        c.seed = cfg.seed + i;
        SweepRow row{depths[i], c.seed, train(width, depths[i], act, data.train, data.validation, c)};
        const bool ok = row.report.success;
        out.rows.push_back(std::move(row));
        if (ok && !out.min_success_depth) {
            out.min_success_depth = depths[i];
            if (stop_at_success) break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Delimited text

/// Header "x,y,target_x,target_y" for planar data; x1,..,target_1,.. otherwise.
inline std::string dataset_header(std::size_t in_dim, std::size_t out_dim) {
    if (in_dim == 2 && out_dim == 2) return "x,y,target_x,target_y";
    std::string h;
    for (std::size_t i = 0; i < in_dim; ++i) h += (i ? ",x" : "x") + std::to_string(i + 1);
    for (std::size_t i = 0; i < out_dim; ++i) h += ",target_" + std::to_string(i + 1);
    return h;
}

inline void write_dataset_csv(const Dataset& d, std::ostream& out) {
    out << dataset_header(d.input_dim(), d.output_dim()) << "\n";
    for (Eigen::Index c = 0; c < d.inputs.cols(); ++c) {
        for (Eigen::Index r = 0; r < d.inputs.rows(); ++r) out << (r ? "," : "") << exact(d.inputs(r, c));
        for (Eigen::Index r = 0; r < d.targets.rows(); ++r) out << "," << exact(d.targets(r, c));
        out << "\n";
    }
}

/// Reads a dataset written by write_dataset_csv; the header fixes the
/// dimensions (columns named target_* are targets).
inline Dataset read_dataset_csv(std::istream& in, DatasetRole role) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset: missing header");
    std::size_t in_dim = 0, out_dim = 0;
    {
        std::stringstream hs(line);
        std::string name;
        while (std::getline(hs, name, ',')) (name.rfind("target", 0) == 0 ? out_dim : in_dim)++;
    }
    if (in_dim == 0 || out_dim == 0) throw std::runtime_error("dataset: header needs input and target columns");
    std::vector<double> vals;
    std::size_t rows = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::size_t n = 0;
        while (std::getline(ls, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cell.size())
                throw std::runtime_error("dataset: line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            vals.push_back(v);
            ++n;
        }
        if (n != in_dim + out_dim)
            throw std::runtime_error("dataset: line " + std::to_string(lineno) + " has " + std::to_string(n) +
                                     " fields, expected " + std::to_string(in_dim + out_dim));
        ++rows;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(rows));
    Eigen::MatrixXd y(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = vals.data() + r * (in_dim + out_dim);
        for (std::size_t i = 0; i < in_dim; ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = row[i];
        for (std::size_t i = 0; i < out_dim; ++i)
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = row[in_dim + i];
    }
    return Dataset(std::move(x), std::move(y), role);
}

inline void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out) {
    out << "step,lr,train_loss,val_loss\n";
    for (const auto& p : curve)
        out << p.step << "," << exact(p.lr) << "," << exact(p.train_loss) << "," << exact(p.val_loss) << "\n";
}

inline void write_sweep_csv(const SweepResult& s, std::size_t width, std::ostream& out) {
    out << "width,depth,seed,steps,train_loss,val_loss,success\n";
    for (const auto& r : s.rows)
        out << width << "," << r.depth << "," << r.seed << "," << r.report.steps << "," << exact(r.report.train_loss)
            << "," << exact(r.report.val_loss) << "," << (r.report.success ? "true" : "false") << "\n";
}

}  // namespace narrow
