#pragma once

// Model definition files.
//
//   {
//     "n_states": 4,
//     "transition": [[0.52, 0.12, 0.18, 0.18], ...],   // or a flat row-major list
//     "p_e": 0.5, "c": 0.5, "r_max": 2,
//     "normalize": false                               // optional
//   }
//
// Rows whose sum is off by more than 1e-9 are rejected unless "normalize" is
// true. Rows within 1e-9 are rescaled to sum to one.

#include "aoii/errors.hpp"
#include "aoii/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace aoii {

inline constexpr double kFileRowSumTolerance = 1e-9;

struct ModelDefinition {
    SourceChain chain;
    DecoderProfile decoder;
};

/// Raw matrix from a model document, without any validation beyond shape.
inline Eigen::MatrixXd read_transition_matrix(const nlohmann::json& doc) {
    if (!doc.contains("n_states") || !doc.contains("transition"))
        throw ModelError("model file needs 'n_states' and 'transition'");
    const int n = doc.at("n_states").get<int>();
    if (n < 1) throw ModelError("n_states must be positive");
    const auto& t = doc.at("transition");
    Eigen::MatrixXd p(n, n);
    if (t.is_array() && t.size() == static_cast<std::size_t>(n) && t[0].is_array()) {
        for (int i = 0; i < n; ++i) {
            if (t[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(n))
                throw ModelError("transition row " + std::to_string(i + 1) + " has wrong length");
            for (int j = 0; j < n; ++j)
                p(i, j) = t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
        }
    } else if (t.is_array() && t.size() == static_cast<std::size_t>(n * n)) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) p(i, j) = t[static_cast<std::size_t>(i * n + j)].get<double>();
    } else {
        throw ModelError("transition must be an n x n nested list or a flat list of n*n values");
    }
    return p;
}

inline ModelDefinition parse_model(const nlohmann::json& doc) {
    try {
        Eigen::MatrixXd p = read_transition_matrix(doc);
        const bool normalize = doc.value("normalize", false);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            for (Eigen::Index j = 0; j < p.cols(); ++j)
                if (!(p(i, j) >= 0.0))
                    throw ModelError("negative or non-numeric entry in row " + std::to_string(i + 1));
            const double sum = p.row(i).sum();
            if (std::abs(sum - 1.0) > kFileRowSumTolerance && !normalize) {
                std::ostringstream msg;
                msg.precision(12);
                msg << "row " << i + 1 << " sums to " << sum
                    << " (tolerance 1e-9); set \"normalize\": true to rescale";
                throw ModelError(msg.str());
            }
            if (!(sum > 0.0)) throw ModelError("row " + std::to_string(i + 1) + " is all zero");
            p.row(i) /= sum;
        }
        DecoderProfile decoder(doc.value("r_max", 2), doc.value("p_e", 0.5), doc.value("c", 0.5));
        return {SourceChain(std::move(p)), decoder};
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    }
}

inline nlohmann::json to_json(const SourceChain& chain, const DecoderProfile& decoder) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < chain.n_states(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < chain.n_states(); ++j) row.push_back(chain.p(i, j));
        rows.push_back(std::move(row));
    }
    return {{"n_states", chain.n_states()},
            {"transition", std::move(rows)},
            {"p_e", decoder.p_e()},
            {"c", decoder.c()},
            {"r_max", decoder.r_max()}};
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError("cannot parse " + path + ": " + e.what());
    }
}

inline ModelDefinition load_model(const std::string& path) { return parse_model(read_json_file(path)); }

inline void save_model(const std::string& path, const SourceChain& chain,
                       const DecoderProfile& decoder) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    out << to_json(chain, decoder).dump(2) << '\n';
}

} // namespace aoii
