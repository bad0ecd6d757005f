#pragma once

// JSON serialization of MDPs and distributions.
//
//   {"n_states", "n_actions", "gamma", "r_max", "rewards": [..],
//    "transitions": [[[s', p], ..] per (s, a) in s*n_actions+a order],
//    "features": [[..] per state]}          <- optional sidecar
//
// Doubles are written in shortest round-trip form, so write -> read -> write
// is bit-stable.

#include "apilab/errors.hpp"
#include "apilab/mdp.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace apilab {

using json = nlohmann::json;

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Vector vector_from_json(const json& j) {
    if (!j.is_array()) throw IoError("expected a numeric array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

inline json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
    return out;
}

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array()) throw IoError("expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols) throw IoError("ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

inline json mdp_to_json(const Mdp& mdp) {
    json transitions = json::array();
    for (const auto& row : mdp.rows()) {
        json jr = json::array();
        for (const auto& t : row) jr.push_back(json::array({t.next, t.prob}));
        transitions.push_back(std::move(jr));
    }
    return json{{"n_states", mdp.n_states()},
                {"n_actions", mdp.n_actions()},
                {"gamma", mdp.gamma()},
                {"r_max", mdp.r_max()},
                {"rewards", vector_to_json(mdp.rewards())},
                {"transitions", std::move(transitions)}};
}

inline Mdp mdp_from_json(const json& j) {
    try {
        const auto n_states = j.at("n_states").get<std::size_t>();
        const auto n_actions = j.at("n_actions").get<std::size_t>();
        const auto& jt = j.at("transitions");
        std::vector<std::vector<Transition>> rows;
        rows.reserve(jt.size());
        for (const auto& jr : jt) {
            std::vector<Transition> row;
            for (const auto& pair : jr) row.push_back({pair.at(0).get<std::size_t>(), pair.at(1).get<double>()});
            rows.push_back(std::move(row));
        }
        return Mdp(n_states, n_actions, std::move(rows), vector_from_json(j.at("rewards")), j.at("gamma").get<double>(),
                   j.at("r_max").get<double>());
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed mdp json: ") + e.what());
    }
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fingerprint(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string mdp_fingerprint(const Mdp& mdp) { return fingerprint(mdp_to_json(mdp).dump()); }

inline std::string distribution_fingerprint(const Distribution& d) {
    return fingerprint(vector_to_json(d.probs()).dump());
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("cannot parse " + path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

struct MdpFile {
    Mdp mdp;
    std::optional<Matrix> features;
};

inline void save_mdp(const std::string& path, const Mdp& mdp, const std::optional<Matrix>& features = std::nullopt) {
    json j = mdp_to_json(mdp);
    if (features) j["features"] = matrix_to_json(*features);
    write_json_file(path, j);
}

inline MdpFile load_mdp(const std::string& path) {
    const json j = read_json_file(path);
    std::optional<Matrix> features;
    if (j.contains("features")) features = matrix_from_json(j.at("features"));
    return {mdp_from_json(j), std::move(features)};
}

}  // namespace apilab
