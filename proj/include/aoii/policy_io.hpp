#pragma once

// Policy files. Every document carries "format": "aoii-policy/1" and a
// "class" tag:
//
//   multi     n_states, r_max, thresholds[s][w][r] (null = never)
//   single    threshold (null = never)
//   tabular   n_states, r_max, delta_cap, actions (0/1 in state-space order)
//   periodic  period, phase
//   mixture   rho, minus, plus (nested stationary policy documents)

#include "aoii/errors.hpp"
#include "aoii/policies.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace aoii {

inline constexpr const char* kPolicyFormat = "aoii-policy/1";

namespace detail {

inline nlohmann::json threshold_json(Threshold t) {
    return t.is_never() ? nlohmann::json(nullptr) : nlohmann::json(t.value());
}

inline Threshold threshold_from(const nlohmann::json& j) {
    return j.is_null() ? Threshold::never() : Threshold::at(j.get<int>());
}

} // namespace detail

inline nlohmann::json policy_to_json(const MultiThresholdPolicy& p) {
    nlohmann::json table = nlohmann::json::array();
    for (int s = 0; s < p.n_states(); ++s) {
        nlohmann::json by_w = nlohmann::json::array();
        for (int w = 0; w < p.n_states(); ++w) {
            nlohmann::json by_r = nlohmann::json::array();
            for (int r = 0; r <= p.r_max(); ++r) by_r.push_back(detail::threshold_json(p.threshold(s, w, r)));
            by_w.push_back(std::move(by_r));
        }
        table.push_back(std::move(by_w));
    }
    return {{"format", kPolicyFormat}, {"class", "multi"}, {"n_states", p.n_states()},
            {"r_max", p.r_max()}, {"thresholds", std::move(table)}};
}

inline nlohmann::json policy_to_json(const SingleThresholdPolicy& p) {
    return {{"format", kPolicyFormat}, {"class", "single"},
            {"threshold", detail::threshold_json(p.threshold())}};
}

inline nlohmann::json policy_to_json(const TabularPolicy& p) {
    nlohmann::json actions = nlohmann::json::array();
    for (Action a : p.actions()) actions.push_back(as_int(a));
    return {{"format", kPolicyFormat}, {"class", "tabular"},
            {"n_states", p.space().n_states()}, {"r_max", p.space().r_max()},
            {"delta_cap", p.space().delta_cap()}, {"actions", std::move(actions)}};
}

inline nlohmann::json policy_to_json(const PeriodicPolicy& p) {
    return {{"format", kPolicyFormat}, {"class", "periodic"}, {"period", p.period()},
            {"phase", p.phase()}};
}

inline nlohmann::json policy_to_json(const StationaryPolicy& p) {
    return std::visit([](const auto& q) { return policy_to_json(q); }, p);
}

inline nlohmann::json policy_to_json(const RandomizedMixturePolicy& p) {
    return {{"format", kPolicyFormat}, {"class", "mixture"}, {"rho", p.rho()},
            {"minus", policy_to_json(p.minus())}, {"plus", policy_to_json(p.plus())}};
}

inline nlohmann::json policy_to_json(const AnyPolicy& p) {
    return std::visit([](const auto& q) { return policy_to_json(q); }, p);
}

inline AnyPolicy policy_from_json(const nlohmann::json& doc);

inline StationaryPolicy stationary_from_json(const nlohmann::json& doc) {
    AnyPolicy any = policy_from_json(doc);
    if (auto* m = std::get_if<MultiThresholdPolicy>(&any)) return *m;
    if (auto* s = std::get_if<SingleThresholdPolicy>(&any)) return *s;
    if (auto* t = std::get_if<TabularPolicy>(&any)) return *t;
    throw ModelError("mixture components must be stationary policies");
}

inline AnyPolicy policy_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("format", std::string()) != kPolicyFormat)
            throw ModelError("unsupported policy format");
        const auto cls = doc.at("class").get<std::string>();
        if (cls == "multi") {
            const int n = doc.at("n_states").get<int>();
            const int r_max = doc.at("r_max").get<int>();
            MultiThresholdPolicy p(n, r_max, 1);
            const auto& t = doc.at("thresholds");
            for (int s = 0; s < n; ++s)
                for (int w = 0; w < n; ++w) {
                    if (s == w) continue;
                    for (int r = 0; r <= r_max; ++r)
                        p.set(s, w, r,
                              detail::threshold_from(t.at(static_cast<std::size_t>(s))
                                                         .at(static_cast<std::size_t>(w))
                                                         .at(static_cast<std::size_t>(r))));
                }
            return p;
        }
        if (cls == "single") return SingleThresholdPolicy(detail::threshold_from(doc.at("threshold")));
        if (cls == "tabular") {
            StateSpace space(doc.at("n_states").get<int>(), doc.at("r_max").get<int>(),
                             doc.at("delta_cap").get<int>());
            std::vector<Action> actions;
            for (const auto& a : doc.at("actions"))
                actions.push_back(a.get<int>() != 0 ? Action::Transmit : Action::Wait);
            return TabularPolicy(std::move(space), std::move(actions));
        }
        if (cls == "periodic") return PeriodicPolicy(doc.at("period").get<int>(), doc.value("phase", 0));
        if (cls == "mixture")
            return RandomizedMixturePolicy(stationary_from_json(doc.at("minus")),
                                           stationary_from_json(doc.at("plus")),
                                           doc.at("rho").get<double>());
        throw ModelError("unknown policy class '" + cls + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed policy document: ") + e.what());
    }
}

inline void save_policy(const std::string& path, const AnyPolicy& policy) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    out << policy_to_json(policy).dump(2) << '\n';
}

inline AnyPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open " + path);
    try {
        return policy_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ModelError("cannot parse " + path + ": " + e.what());
    }
}

} // namespace aoii
