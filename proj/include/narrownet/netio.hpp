#pragma once

// Network file format (JSON):
//
//   {
//     "input_dim": 2, "output_dim": 2,
//     "layers": [ {"W": [[...], ...], "b": [...],
//                  "activation": {"kind": "elu", "beta": 1.0}}, ... ],
//     "final":  {"W": [[...], ...], "b": [...]}
//   }
//
// W is row-major (one inner array per output unit). Numbers are written in
// shortest round-trip form, so save followed by load is bitwise exact.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "narrownet/activation.hpp"
#include "narrownet/network.hpp"

namespace narrow {

using json = nlohmann::json;

/// Malformed network document. `location()` is a JSON pointer into the
/// document (e.g. "/layers/1/W/0") or "byte N" for syntax errors.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string location, const std::string& message)
        : std::runtime_error(location + ": " + message), location_(std::move(location)) {}
    const std::string& location() const { return location_; }

private:
    std::string location_;
};

inline json activation_to_json(const Activation& act) {
    json j;
    j["kind"] = std::string(to_token(act.kind()));
    if (is_parametrized(act.kind())) j["beta"] = act.beta();
    if (act.kind() == ActivationKind::selu) j["lambda"] = act.lambda();
    return j;
}

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object()) throw ParseError(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(where, "missing field '" + key + "'");
    return *it;
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where, "expected a number");
    return j.get<double>();
}

inline Eigen::VectorXd vector_from(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where, "expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = number(j[i], where + "/" + std::to_string(i));
    return v;
}

inline Eigen::MatrixXd matrix_from(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ParseError(where, "expected a non-empty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Eigen::MatrixXd W(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        const std::string row_where = where + "/" + std::to_string(r);
        if (!j[r].is_array()) throw ParseError(row_where, "expected a row array");
        if (j[r].size() != cols)
            throw ParseError(row_where, "row has " + std::to_string(j[r].size()) + " entries, expected " +
                                            std::to_string(cols));
        for (std::size_t c = 0; c < cols; ++c)
            W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                number(j[r][c], row_where + "/" + std::to_string(c));
    }
    return W;
}

inline json matrix_to_json(const Eigen::MatrixXd& W) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < W.cols(); ++c) row.push_back(W(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline AffineMap affine_from(const json& j, const std::string& where) {
    Eigen::MatrixXd W = matrix_from(require(j, "W", where), where + "/W");
    Eigen::VectorXd b = vector_from(require(j, "b", where), where + "/b");
    if (b.size() != W.rows())
        throw ParseError(where + "/b", "length " + std::to_string(b.size()) + " does not match " +
                                           std::to_string(W.rows()) + " rows of W");
    try {
        return AffineMap(std::move(W), std::move(b));
    } catch (const std::invalid_argument& e) {
        throw ParseError(where, e.what());
    }
}

}  // namespace detail

inline Activation activation_from_json(const json& j, const std::string& where = "") {
    const json& kind = detail::require(j, "kind", where);
    if (!kind.is_string()) throw ParseError(where + "/kind", "expected a string");
    try {
        const ActivationKind k = kind_from_token(kind.get<std::string>());
        const double beta = j.contains("beta") ? detail::number(j["beta"], where + "/beta") : 1.0;
        const double lambda = j.contains("lambda") ? detail::number(j["lambda"], where + "/lambda") : 1.0;
        if (is_parametrized(k) && !j.contains("beta")) throw ParseError(where, "missing field 'beta'");
        if (k == ActivationKind::selu && !j.contains("lambda")) throw ParseError(where, "missing field 'lambda'");
        return Activation(k, beta, lambda);
    } catch (const std::invalid_argument& e) {
        throw ParseError(where, e.what());
    }
}

inline json to_json(const NeuralNet& net) {
    json j;
    j["input_dim"] = net.input_dim();
    j["output_dim"] = net.output_dim();
    j["layers"] = json::array();
    for (const auto& l : net.layers()) {
        j["layers"].push_back({{"W", detail::matrix_to_json(l.affine.W)},
                               {"b", detail::vector_to_json(l.affine.b)},
                               {"activation", activation_to_json(l.activation)}});
    }
    j["final"] = {{"W", detail::matrix_to_json(net.final_map().W)},
                  {"b", detail::vector_to_json(net.final_map().b)}};
    return j;
}

inline NeuralNet net_from_json(const json& j) {
    const json& in = detail::require(j, "input_dim", "");
    const json& out = detail::require(j, "output_dim", "");
    if (!in.is_number_unsigned() || in.get<std::size_t>() == 0)
        throw ParseError("/input_dim", "expected a positive integer");
    if (!out.is_number_unsigned() || out.get<std::size_t>() == 0)
        throw ParseError("/output_dim", "expected a positive integer");
    const auto input_dim = in.get<Eigen::Index>();
    const auto output_dim = out.get<Eigen::Index>();

    const json& layers_json = detail::require(j, "layers", "");
    if (!layers_json.is_array()) throw ParseError("/layers", "expected an array");
    std::vector<Layer> layers;
    Eigen::Index dim = input_dim;
    for (std::size_t k = 0; k < layers_json.size(); ++k) {
        const std::string where = "/layers/" + std::to_string(k);
        AffineMap a = detail::affine_from(layers_json[k], where);
        if (a.in_dim() != dim)
            throw ParseError(where + "/W", "has " + std::to_string(a.in_dim()) + " columns, expected " +
                                               std::to_string(dim));
        dim = a.out_dim();
        Activation act = activation_from_json(detail::require(layers_json[k], "activation", where),
                                              where + "/activation");
        layers.push_back({std::move(a), act});
    }
    AffineMap final_map = detail::affine_from(detail::require(j, "final", ""), "/final");
    if (final_map.in_dim() != dim)
        throw ParseError("/final/W", "has " + std::to_string(final_map.in_dim()) + " columns, expected " +
                                         std::to_string(dim));
    if (final_map.out_dim() != output_dim)
        throw ParseError("/final/W", "has " + std::to_string(final_map.out_dim()) +
                                         " rows, but output_dim is " + std::to_string(output_dim));
    return NeuralNet(std::move(layers), std::move(final_map));
}

inline std::string dump_net(const NeuralNet& net) { return to_json(net).dump(2) + "\n"; }

inline NeuralNet parse_net(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("byte " + std::to_string(e.byte), e.what());
    }
    return net_from_json(j);
}

inline void save_net(const NeuralNet& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << dump_net(net);
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline NeuralNet load_net(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_net(ss.str());
}

}  // namespace narrow
