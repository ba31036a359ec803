#pragma once

// Command-line front end. Kept in a header so the acceptance runner can drive
// the same code path in-process.
//
// Exit codes: 0 success or certificate issued, 1 verified failure (refusal,
// unsuccessful training, gap above epsilon), 2 usage or I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "narrownet/certifier.hpp"
#include "narrownet/constructions.hpp"
#include "narrownet/experiments.hpp"
#include "narrownet/format.hpp"
#include "narrownet/netio.hpp"

namespace narrow::cli {

namespace fs = std::filesystem;

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

inline constexpr const char* out_dir_env = "NARROWNET_OUT_DIR";

#ifndef NARROWNET_ASSET_DIR
#define NARROWNET_ASSET_DIR "assets"
#endif

/// Usage and I/O problems; mapped to exit code 2.
class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// A bare file name that does not exist here is looked up among the shipped assets.
inline fs::path resolve_input(const std::string& name) {
    const fs::path p(name);
    if (fs::exists(p)) return p;
    if (!p.has_parent_path()) {
        const fs::path asset = fs::path(NARROWNET_ASSET_DIR) / p;
        if (fs::exists(asset)) return asset;
    }
    throw UsageError("no such file: '" + name + "'");
}

inline fs::path prepare_out(const std::string& dir) {
    const fs::path p(dir.empty() ? "." : dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw UsageError("cannot create output directory '" + p.string() + "': " + ec.message());
    return p;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw UsageError("failed writing '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("'" + path.string() + "': " + e.what());
    }
}

/// "leaky" is accepted as shorthand for leaky_relu.
inline ActivationKind family(const std::string& token) {
    return kind_from_token(token == "leaky" ? "leaky_relu" : token);
}

inline Activation make_activation(const std::string& token, double beta, double lambda) {
    return Activation(family(token), beta, lambda);
}

inline json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

struct TrainFlags {
    std::string act = "elu";
    double beta = 1.0;
    double lambda = 1.0;
    int k = 2;
    TrainConfig cfg;
};

inline void add_train_flags(CLI::App* sub, TrainFlags& f) {
    sub->add_option("--act", f.act, "Activation family")->capture_default_str();
    sub->add_option("--beta", f.beta, "Activation parameter")->capture_default_str();
    sub->add_option("--lambda", f.lambda, "SELU output scale")->capture_default_str();
    sub->add_option("--k", f.k, "Rotation multiplier of the DISK target")->capture_default_str();
    sub->add_option("--lr", f.cfg.lr_init, "Initial learning rate")->capture_default_str();
    sub->add_option("--lr-decay", f.cfg.lr_decay, "Rate subtracted per decay interval")->capture_default_str();
    sub->add_option("--decay-interval", f.cfg.decay_interval_steps, "Steps per decay")->capture_default_str();
    sub->add_option("--lr-floor", f.cfg.lr_floor, "Lowest learning rate")->capture_default_str();
    sub->add_option("--max-steps", f.cfg.max_steps, "Full-batch step budget")->capture_default_str();
    sub->add_option("--threshold", f.cfg.success_threshold, "Success needs both losses below this")
        ->capture_default_str();
    sub->add_option("--eval-interval", f.cfg.eval_interval, "Steps between loss evaluations")->capture_default_str();
    sub->add_option("--seed", f.cfg.seed, "Initialization seed")->capture_default_str();
}

inline json config_json(const TrainConfig& c) {
    return {{"lr_init", c.lr_init},
            {"lr_decay", c.lr_decay},
            {"decay_interval_steps", c.decay_interval_steps},
            {"lr_floor", c.lr_floor},
            {"max_steps", c.max_steps},
            {"success_threshold", c.success_threshold},
            {"eval_interval", c.eval_interval},
            {"seed", c.seed},
            {"adam", {{"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}, {"eps", c.adam_eps}}}};
}

// ---------------------------------------------------------------------------
// construct / verify

struct ConstructArgs {
    std::string from, to;
    double alpha = 0.1;
    double beta = 1.0;
    double lambda = 1.0;
    double eps = 0.0;
    std::vector<double> domain{-10.0, 10.0};
    std::string name;
};

inline ConstructionReport run_construction(const ConstructArgs& a, const Box& K) {
    const ActivationKind from = family(a.from), to = family(a.to);
    if (from == ActivationKind::elu && to == ActivationKind::leaky_relu) return build_leaky_from_elu(a.alpha, a.eps, K);
    if (from == ActivationKind::leaky_relu && to == ActivationKind::leaky_relu)
        return build_leaky_from_leaky(a.alpha, a.beta, a.eps, K);
    if (from == ActivationKind::softplus && to == ActivationKind::relu)
        return build_relu_from_softplus(a.beta, a.eps, K);
    if (to == ActivationKind::relu)
        return build_relu_from_iteration(make_activation(a.from, a.beta, a.lambda), a.eps, K);
    throw UsageError("no construction from " + a.from + " to " + a.to +
                     " (supported: elu->leaky, leaky->leaky, softplus->relu, iterates->relu)");
}

inline int cmd_construct(const ConstructArgs& a, const fs::path& out_dir, std::ostream& out) {
    if (a.domain.size() != 2 || !(a.domain[0] < a.domain[1])) throw UsageError("--domain needs LO HI with LO < HI");
    const Box K = Box::interval(a.domain[0], a.domain[1]);
    const ConstructionReport rep = run_construction(a, K);

    const std::string name = a.name.empty() ? a.from + "_to_" + a.to : a.name;
    const fs::path net_path = out_dir / (name + ".net"), report_path = out_dir / (name + ".report.json");
    save_net(rep.net, net_path);
    json j{{"command", "construct"},
           {"from", a.from},
           {"to", a.to},
           {"alpha", a.alpha},
           {"beta", a.beta},
           {"target", activation_to_json(rep.target)},
           {"epsilon", rep.epsilon},
           {"domain", a.domain},
           {"grid_points", default_grid_points},
           {"measured_gap", rep.measured_gap},
           {"stages", rep.stages},
           {"coefficients", rep.coefficients},
           {"depth", rep.net.depth()},
           {"width", rep.net.width()},
           {"net", net_path.filename().string()}};
    write_json(report_path, j);
    out << "constructed " << to_token(rep.target.kind()) << " approximation: depth " << rep.net.depth() << ", gap "
        << brief(rep.measured_gap) << " <= eps " << brief(rep.epsilon) << " on [" << brief(a.domain[0]) << ", "
        << brief(a.domain[1]) << "]\n"
        << "wrote " << net_path.string() << " and " << report_path.string() << "\n";
    return exit_ok;
}

inline int cmd_verify(const std::string& net_file, std::string report_file, std::ostream& out) {
    const fs::path net_path = resolve_input(net_file);
    if (report_file.empty()) {
        fs::path r = net_path;
        r.replace_extension(".report.json");
        report_file = r.string();
    }
    const json rep = read_json(resolve_input(report_file));
    const NeuralNet net = load_net(net_path);
    Activation target;
    double eps = 0.0;
    std::vector<double> domain;
    std::size_t grid = 0;
    try {
        target = activation_from_json(rep.at("target"), "/target");
        eps = rep.at("epsilon").get<double>();
        domain = rep.at("domain").get<std::vector<double>>();
        grid = rep.at("grid_points").get<std::size_t>();
    } catch (const json::exception& e) {
        throw UsageError("malformed report '" + report_file + "': " + e.what());
    }
    if (domain.size() != 2 || grid < 2) throw UsageError("malformed report '" + report_file + "': bad domain or grid");
    if (net.input_dim() != 1 || net.output_dim() != 1) throw UsageError("verify expects a scalar network");
    const VecMap t = scalar_map([target](double x) { return target(x); });
    const double gap = sup_gap(as_map(net), t, Box::interval(domain[0], domain[1]), grid);
    const bool ok = gap <= eps;
    out << (ok ? "verified" : "FAILED") << ": gap " << exact(gap) << (ok ? " <= " : " > ") << "eps " << exact(eps)
        << "\n";
    return ok ? exit_ok : exit_failure;
}

// ---------------------------------------------------------------------------
// certify

inline int cmd_certify(std::size_t m, const std::string& candidate, std::size_t grid, const fs::path& out_dir,
                       std::ostream& out) {
    if (m == 0) throw UsageError("--m must be >= 1");
    if (grid < 2) throw UsageError("--grid must be >= 2");
    const VecMap g = build_g(m);
    VecMap f = g;
    if (!candidate.empty()) {
        const NeuralNet net = load_net(resolve_input(candidate));
        if (net.input_dim() != m || net.output_dim() > 2 * m)
            throw UsageError("candidate must map R^" + std::to_string(m) + " into R^n with n <= " +
                             std::to_string(2 * m));
        f = pad_with_g_tail(as_map(net), m);
    }
    const IntervalPairs pairs = IntervalPairs::canonical(m);
    const CertifyOutcome res = certify_self_intersection(f, g, pairs, grid);

    json j{{"command", "certify"}, {"m", m}, {"grid", grid}, {"candidate", candidate.empty() ? "g" : candidate}};
    int code = exit_ok;
    if (const auto* c = std::get_if<SelfIntersectionCertificate>(&res)) {
        j["certified"] = true;
        j["M"] = c->M;
        j["epsilon"] = c->epsilon;
        j["sup_gap"] = c->sup_gap;
        j["collision"] = {{"t1", vector_json(c->collision.t1)},
                          {"t2", vector_json(c->collision.t2)},
                          {"gap", c->collision.gap}};
        out << "certificate issued: M " << brief(c->M) << ", eps " << brief(c->epsilon) << ", sup gap "
            << brief(c->sup_gap) << "\n  collision gap " << brief(c->collision.gap) << " at t1 = ("
            << c->collision.t1.transpose().format(Eigen::IOFormat(4, 0, ", ")) << "), t2 = ("
            << c->collision.t2.transpose().format(Eigen::IOFormat(4, 0, ", ")) << ")\n";
    } else {
        const auto& r = std::get<Refusal>(res);
        j["certified"] = false;
        j["reason"] = r.reason;
        j["M"] = r.M;
        j["epsilon"] = r.epsilon;
        j["sup_gap"] = r.sup_gap;
        out << "refused: " << r.reason << "\n  M " << brief(r.M) << ", eps " << brief(r.epsilon) << "\n";
        code = exit_failure;
    }
    const fs::path path = out_dir / ("certify_m" + std::to_string(m) + ".json");
    write_json(path, j);
    out << "wrote " << path.string() << "\n";
    return code;
}

// ---------------------------------------------------------------------------
// experiments

inline int cmd_gendata(int k, const fs::path& out_dir, std::ostream& out) {
    const DiskData d = gen_disk(k);
    const std::string stem = "disk_k" + std::to_string(k);
    for (const Dataset* ds : {&d.train, &d.validation}) {
        const fs::path p = out_dir / (stem + (ds->role == DatasetRole::train ? "_train.csv" : "_validation.csv"));
        std::ostringstream s;
        write_dataset_csv(*ds, s);
        write_text(p, s.str());
        out << "wrote " << p.string() << " (" << ds->size() << " points)\n";
    }
    return exit_ok;
}

inline json train_report_json(const TrainReport& r) {
    return {{"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"steps", r.steps}, {"success", r.success}};
}

inline int cmd_train(std::size_t width, std::size_t depth, const TrainFlags& f, std::string name,
                     const fs::path& out_dir, std::ostream& out) {
    f.cfg.validate();
    const Activation act = make_activation(f.act, f.beta, f.lambda);
    const DiskData d = gen_disk(f.k);
    const TrainReport r = train(width, depth, act, d.train, d.validation, f.cfg);

    if (name.empty())
        name = "train_w" + std::to_string(width) + "_d" + std::to_string(depth) + "_s" + std::to_string(f.cfg.seed);
    const fs::path net_path = out_dir / (name + ".net");
    save_net(r.net, net_path);
    std::ostringstream curve;
    write_curve_csv(r.loss_curve, curve);
    write_text(out_dir / (name + ".curve.csv"), curve.str());
    json j = train_report_json(r);
    j["command"] = "train";
    j["width"] = width;
    j["depth"] = depth;
    j["k"] = f.k;
    j["activation"] = activation_to_json(act);
    j["config"] = config_json(f.cfg);
    j["net"] = net_path.filename().string();
    write_json(out_dir / (name + ".report.json"), j);

    out << (r.success ? "success" : "no success") << " after " << r.steps << " steps: L " << brief(r.train_loss)
        << ", L~ " << brief(r.val_loss) << " (threshold " << brief(f.cfg.success_threshold) << ")\n"
        << "wrote " << (out_dir / name).string() << ".{net,report.json,curve.csv}\n";
    return r.success ? exit_ok : exit_failure;
}

inline int cmd_eval(const std::string& net_file, int k, const fs::path& out_dir, std::ostream& out) {
    const fs::path path = resolve_input(net_file);
    const NeuralNet net = load_net(path);
    if (net.input_dim() != 2 || net.output_dim() != 2)
        throw UsageError("eval expects a network from R^2 to R^2, got R^" + std::to_string(net.input_dim()) +
                         " -> R^" + std::to_string(net.output_dim()));
    const DiskData d = gen_disk(k);
    const Losses l = mse_losses(net, d.train, d.validation);
    const json j{{"command", "eval"},
                 {"net", path.filename().string()},
                 {"k", k},
                 {"train_loss", l.train},
                 {"val_loss", l.validation},
                 {"train_points", d.train.size()},
                 {"val_points", d.validation.size()}};
    const fs::path rp = out_dir / (path.stem().string() + ".eval_k" + std::to_string(k) + ".json");
    write_json(rp, j);
    out << "L  " << brief(l.train) << "\nL~ " << brief(l.validation) << "\nwrote " << rp.string() << "\n";
    return exit_ok;
}

inline int cmd_sweep(std::size_t width, std::vector<std::size_t> depths, bool all, const TrainFlags& f,
                     const fs::path& out_dir, std::ostream& out) {
    f.cfg.validate();
    const Activation act = make_activation(f.act, f.beta, f.lambda);
    const SweepResult s = depth_sweep(width, act, f.k, depths, f.cfg, !all);
    const std::string stem = "sweep_w" + std::to_string(width) + "_k" + std::to_string(f.k);
    std::ostringstream csv;
    write_sweep_csv(s, width, csv);
    write_text(out_dir / (stem + ".csv"), csv.str());
    json rows = json::array();
    for (const auto& r : s.rows) {
        json row = train_report_json(r.report);
        row["depth"] = r.depth;
        row["seed"] = r.seed;
        rows.push_back(row);
    }
    json j{{"command", "sweep"},
           {"width", width},
           {"k", f.k},
           {"activation", activation_to_json(act)},
           {"config", config_json(f.cfg)},
           {"rows", rows}};
    j["min_success_depth"] = s.min_success_depth ? json(*s.min_success_depth) : json(nullptr);
    write_json(out_dir / (stem + ".json"), j);
    for (const auto& r : s.rows)
        out << "depth " << r.depth << ": " << (r.report.success ? "success" : "no success") << ", L "
            << brief(r.report.train_loss) << ", L~ " << brief(r.report.val_loss) << "\n";
    if (s.min_success_depth)
        out << "minimum successful depth " << *s.min_success_depth << "\n";
    else
        out << "no depth succeeded\n";
    return s.min_success_depth ? exit_ok : exit_failure;
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Narrow-network constructions, certificates and experiments", "narrownet"};
    app.set_config("--config", "", "TOML or INI file with option values; flags win over it");
    app.require_subcommand(1);
    std::string out_dir = ".";
    app.add_option("--out", out_dir, "Output directory")->envname(out_dir_env)->capture_default_str();

    detail::ConstructArgs ca;
    auto* construct = app.add_subcommand("construct", "Build an activation substitute and write net + report");
    construct->add_option("--from", ca.from, "Source activation family")->required();
    construct->add_option("--to", ca.to, "Target activation family")->required();
    construct->add_option("--alpha", ca.alpha, "Target LeakyReLU slope")->capture_default_str();
    construct->add_option("--beta", ca.beta, "Source activation parameter")->capture_default_str();
    construct->add_option("--lambda", ca.lambda, "SELU output scale")->capture_default_str();
    construct->add_option("--eps", ca.eps, "Accuracy")->required();
    construct->add_option("--domain", ca.domain, "Interval LO HI")->expected(2)->capture_default_str();
    construct->add_option("--name", ca.name, "Output basename (default FROM_to_TO)");

    std::string net_file, report_file;
    auto* verify = app.add_subcommand("verify", "Re-check a constructed network against its report");
    verify->add_option("--net", net_file, "Network file")->required();
    verify->add_option("--report", report_file, "Report (default NET.report.json)");

    std::size_t m = 1, grid = 101;
    std::string candidate;
    auto* certify = app.add_subcommand("certify", "Self-intersection certificate near the counterexample map g");
    certify->add_option("--m", m, "Input dimension")->capture_default_str();
    certify->add_option("--candidate", candidate, "Network [0,1]^m -> R^n, completed with the tail of g");
    certify->add_option("--grid", grid, "Grid points per axis")->capture_default_str();

    int gen_k = 2;
    auto* gendata = app.add_subcommand("gendata", "Write DISK training and validation sets");
    gendata->add_option("--k", gen_k, "Rotation multiplier")->capture_default_str();

    std::size_t width = 0, depth = 0;
    std::string name;
    detail::TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train one network on DISK");
    train_cmd->add_option("--width", width, "Hidden width")->required();
    train_cmd->add_option("--depth", depth, "Hidden layers")->required();
    train_cmd->add_option("--name", name, "Output basename");
    detail::add_train_flags(train_cmd, tf);

    int eval_k = 2;
    auto* eval = app.add_subcommand("eval", "Training and validation loss of a network on DISK");
    eval->add_option("--net", net_file, "Network file (bare asset names are found automatically)")->required();
    eval->add_option("--k", eval_k, "Rotation multiplier")->capture_default_str();

    std::vector<std::size_t> depths;
    bool all_depths = false;
    detail::TrainFlags sf;
    auto* sweep = app.add_subcommand("sweep", "Smallest successful depth at a fixed width");
    sweep->add_option("--width", width, "Hidden width")->required();
    sweep->add_option("--depths", depths, "Increasing list of depths")->required();
    sweep->add_flag("--all", all_depths, "Keep going after the first success");
    detail::add_train_flags(sweep, sf);

    // Top-level options such as --out may also follow the subcommand.
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "narrownet: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        const fs::path dir = detail::prepare_out(out_dir);
        if (construct->parsed()) return detail::cmd_construct(ca, dir, out);
        if (verify->parsed()) return detail::cmd_verify(net_file, report_file, out);
        if (certify->parsed()) return detail::cmd_certify(m, candidate, grid, dir, out);
        if (gendata->parsed()) return detail::cmd_gendata(gen_k, dir, out);
        if (train_cmd->parsed()) return detail::cmd_train(width, depth, tf, name, dir, out);
        if (eval->parsed()) return detail::cmd_eval(net_file, eval_k, dir, out);
        if (sweep->parsed()) return detail::cmd_sweep(width, depths, all_depths, sf, dir, out);
    } catch (const ConstructionError& e) {
        err << "narrownet: " << e.what() << "\n";
        return exit_failure;
    } catch (const UsageError& e) {
        err << "narrownet: " << e.what() << "\n";
        return exit_usage;
    } catch (const ParseError& e) {
        err << "narrownet: malformed network: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "narrownet: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace narrow::cli
