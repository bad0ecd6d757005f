#pragma once

// ConcentrabilityReport JSON. Infinite values are written as the string "inf".

#include "apilab/bounds.hpp"
#include "apilab/concentrability.hpp"
#include "apilab/mdp_io.hpp"

#include <string>
#include <vector>

namespace apilab {

inline json extended_to_json(const Extended& e) { return e.is_infinite() ? json("inf") : json(e.value()); }

inline Extended extended_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "inf") throw IoError("expected a number or \"inf\"");
        return Extended::infinity();
    }
    return Extended(j.get<double>());
}

inline json interval_to_json(const Interval& i) {
    return json{{"lower", extended_to_json(i.lower)}, {"upper", extended_to_json(i.upper)}};
}

inline Interval interval_from_json(const json& j) {
    return {extended_from_json(j.at("lower")), extended_from_json(j.at("upper"))};
}

/// Facts about the analysed instance that travel with the coefficients.
struct AnalysisContext {
    std::string mdp_fingerprint;
    std::string mu_fingerprint;
    std::string nu_fingerprint;
    double v_max = 0.0;
    double mu_v_star = 0.0;
    double reward_min = 0.0;
    std::vector<std::size_t> pi_star;
};

struct AnalysisReport {
    ConcentrabilityReport coefficients;
    AnalysisContext context;
    std::vector<OrderingResult> ordering;

    LossContext loss_context() const { return {context.mu_v_star, context.reward_min}; }
};

inline json analysis_to_json(const AnalysisReport& a) {
    const auto& r = a.coefficients;
    json c = json::array(), cp = json::array();
    for (const auto& e : r.c) c.push_back(extended_to_json(e));
    for (const auto& e : r.c_pistar) cp.push_back(extended_to_json(e));
    json ord = json::array();
    for (const auto& o : a.ordering) {
        ord.push_back({{"check", o.name},
                       {"lhs", extended_to_json(std::isinf(o.lhs) ? Extended::infinity() : Extended(o.lhs))},
                       {"rhs", extended_to_json(std::isinf(o.rhs) ? Extended::infinity() : Extended(o.rhs))},
                       {"pass", o.pass},
                       {"vacuous", o.vacuous}});
    }
    return json{{"mdp_fingerprint", a.context.mdp_fingerprint},
                {"mu_fingerprint", a.context.mu_fingerprint},
                {"nu_fingerprint", a.context.nu_fingerprint},
                {"gamma", r.gamma},
                {"v_max", a.context.v_max},
                {"mu_v_star", a.context.mu_v_star},
                {"reward_min", a.context.reward_min},
                {"pi_star", a.context.pi_star},
                {"horizon", r.horizon},
                {"tail_cap", std::isinf(r.tail_cap) ? json("inf") : json(r.tail_cap)},
                {"C1", interval_to_json(r.c1)},
                {"C2", interval_to_json(r.c2)},
                {"C1_pistar", interval_to_json(r.c1_pistar)},
                {"C_pistar", extended_to_json(r.c_pistar_exact)},
                {"c", c},
                {"c_pistar", cp},
                {"ordering", ord},
                {"ordering_pass", all_pass(a.ordering)}};
}

inline AnalysisReport analysis_from_json(const json& j) {
    try {
        AnalysisReport a;
        auto& r = a.coefficients;
        r.gamma = j.at("gamma").get<double>();
        r.horizon = j.at("horizon").get<std::size_t>();
        r.tail_cap = extended_from_json(j.at("tail_cap")).value();
        r.c1 = interval_from_json(j.at("C1"));
        r.c2 = interval_from_json(j.at("C2"));
        r.c1_pistar = interval_from_json(j.at("C1_pistar"));
        r.c_pistar_exact = extended_from_json(j.at("C_pistar"));
        for (const auto& e : j.at("c")) r.c.push_back(extended_from_json(e));
        for (const auto& e : j.at("c_pistar")) r.c_pistar.push_back(extended_from_json(e));
        a.context.mdp_fingerprint = j.at("mdp_fingerprint").get<std::string>();
        a.context.mu_fingerprint = j.at("mu_fingerprint").get<std::string>();
        a.context.nu_fingerprint = j.at("nu_fingerprint").get<std::string>();
        a.context.v_max = j.at("v_max").get<double>();
        a.context.mu_v_star = j.at("mu_v_star").get<double>();
        a.context.reward_min = j.at("reward_min").get<double>();
        a.context.pi_star = j.at("pi_star").get<std::vector<std::size_t>>();
        a.ordering = ordering_check(r);
        return a;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed concentrability report: ") + e.what());
    }
}

/// Runs every coefficient computation and the ordering check.
inline AnalysisReport analyze(const Mdp& mdp, const OptimalSolution& opt, const Distribution& mu,
                              const Distribution& nu, std::optional<std::size_t> horizon = {}) {
    AnalysisReport a;
    a.coefficients = concentrability_report(mdp, opt.pi_star, mu, nu, horizon);
    a.ordering = ordering_check(a.coefficients);
    a.context.mdp_fingerprint = mdp_fingerprint(mdp);
    a.context.mu_fingerprint = distribution_fingerprint(mu);
    a.context.nu_fingerprint = distribution_fingerprint(nu);
    a.context.v_max = mdp.v_max();
    a.context.mu_v_star = mu.dot(opt.v_star);
    a.context.reward_min = mdp.rewards().minCoeff();
    a.context.pi_star = opt.pi_star.action;
    return a;
}

}  // namespace apilab
