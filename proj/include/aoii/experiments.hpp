#pragma once

// Experiment plumbing: configuration, policy families, rate sweeps, the
// validation suite and CSV/SVG/text writers.

#include "aoii/errors.hpp"
#include "aoii/model.hpp"
#include "aoii/model_io.hpp"
#include "aoii/policies.hpp"
#include "aoii/policy_io.hpp"
#include "aoii/renewal.hpp"
#include "aoii/simulator.hpp"
#include "aoii/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace aoii {

enum class Family { Multi, Single, Periodic, OptimalOracle };

inline std::string family_name(Family f) {
    switch (f) {
    case Family::Multi: return "multi";
    case Family::Single: return "single";
    case Family::Periodic: return "periodic";
    case Family::OptimalOracle: return "optimal-oracle";
    }
    return "?";
}

inline Family parse_family(const std::string& name) {
    if (name == "multi") return Family::Multi;
    if (name == "single") return Family::Single;
    if (name == "periodic") return Family::Periodic;
    if (name == "optimal-oracle") return Family::OptimalOracle;
    throw ModelError("unknown policy family '" + name + "' (multi, single, periodic, optimal-oracle)");
}

/**
 * Model reference: a model file path, "reference" for the built-in 4-state
 * source with the standard decoder, or "random:N:SEED" for a biased-diagonal
 * random source with the standard decoder.
 */
inline ModelDefinition resolve_model(const std::string& ref) {
    if (ref == "reference") return {reference_source(), DecoderProfile::standard()};
    if (ref.rfind("random:", 0) == 0) {
        int n = 0;
        unsigned long long seed = 0;
        char tail = 0;
        if (std::sscanf(ref.c_str() + 7, "%d:%llu%c", &n, &seed, &tail) != 2)
            throw ModelError("random model reference must look like random:N:SEED");
        return {generate_random_source(n, seed), DecoderProfile::standard()};
    }
    return load_model(ref);
}

struct ExperimentSpec {
    std::string model = "reference";
    std::vector<Family> families{Family::Multi, Family::Single, Family::Periodic, Family::OptimalOracle};
    std::vector<double> rates{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    BisectionOptions solver{};
    bool simulate = true;
    SimulationConfig simulation{};
    std::string out = "out";

    void validate() const {
        if (rates.empty()) throw ModelError("rate grid is empty");
        for (double r : rates)
            if (!(r > 0.0 && r <= 1.0)) throw ModelError("rate grid values must lie in (0,1]");
        if (families.empty()) throw ModelError("no policy family selected");
        if (!(solver.rvi.tol > 0.0)) throw ModelError("solver tolerance must be positive");
        if (solver.delta_cap < 0) throw ModelError("delta cap must be >= 0 (0 selects it automatically)");
        if (simulate) simulation.validate();
    }
};

inline nlohmann::json to_json(const ExperimentSpec& spec) {
    nlohmann::json families = nlohmann::json::array();
    for (Family f : spec.families) families.push_back(family_name(f));
    return {{"model", spec.model},
            {"families", families},
            {"rates", spec.rates},
            {"solver",
             {{"delta_cap", spec.solver.delta_cap},
              {"tol", spec.solver.rvi.tol},
              {"max_iter", spec.solver.rvi.max_iter},
              {"tol_lambda", spec.solver.tol_lambda},
              {"cap_epsilon", spec.solver.cap_epsilon}}},
            {"simulation",
             {{"enabled", spec.simulate},
              {"horizon", spec.simulation.horizon},
              {"burn_in", spec.simulation.burn_in},
              {"seed", spec.simulation.seed},
              {"replications", spec.simulation.replications},
              {"batches", spec.simulation.batches}}},
            {"out", spec.out}};
}

/// Overlays a config document onto `spec`; unknown keys are rejected.
inline void apply_config(ExperimentSpec& spec, const nlohmann::json& doc) {
    static const std::vector<std::string> top{"model", "families", "rates", "solver", "simulation", "out"};
    try {
        for (const auto& [key, _] : doc.items())
            if (std::find(top.begin(), top.end(), key) == top.end()) throw ModelError("unknown config key '" + key + "'");
        if (doc.contains("model")) spec.model = doc["model"].get<std::string>();
        if (doc.contains("families")) {
            spec.families.clear();
            for (const auto& f : doc["families"]) spec.families.push_back(parse_family(f.get<std::string>()));
        }
        if (doc.contains("rates")) spec.rates = doc["rates"].get<std::vector<double>>();
        if (doc.contains("out")) spec.out = doc["out"].get<std::string>();
        if (doc.contains("solver")) {
            const auto& s = doc["solver"];
            spec.solver.delta_cap = s.value("delta_cap", spec.solver.delta_cap);
            spec.solver.rvi.tol = s.value("tol", spec.solver.rvi.tol);
            spec.solver.rvi.max_iter = s.value("max_iter", spec.solver.rvi.max_iter);
            spec.solver.tol_lambda = s.value("tol_lambda", spec.solver.tol_lambda);
            spec.solver.cap_epsilon = s.value("cap_epsilon", spec.solver.cap_epsilon);
        }
        if (doc.contains("simulation")) {
            const auto& s = doc["simulation"];
            spec.simulate = s.value("enabled", spec.simulate);
            spec.simulation.horizon = s.value("horizon", spec.simulation.horizon);
            spec.simulation.burn_in = s.value("burn_in", spec.simulation.burn_in);
            spec.simulation.seed = s.value("seed", spec.simulation.seed);
            spec.simulation.replications = s.value("replications", spec.simulation.replications);
            spec.simulation.batches = s.value("batches", spec.simulation.batches);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed config: ") + e.what());
    }
}

/// Policy of one family synthesized for one rate constraint.
struct FamilyPolicy {
    Family family;
    double rate_target;
    AnyPolicy policy;
    double avg_aoii;
    double avg_rate;
    std::optional<BisectionTrace> trace;
};

inline FamilyPolicy synthesize(Family family, const SourceChain& chain, const DecoderProfile& decoder,
                               double rate_target, const BisectionOptions& opts = {}) {
    switch (family) {
    case Family::Periodic: {
        const PeriodicPolicy p = PeriodicPolicy::for_rate(rate_target);
        const auto ev = evaluate_periodic(chain, decoder, p.period());
        return {family, rate_target, p, ev.avg_aoii, ev.avg_rate, std::nullopt};
    }
    case Family::Single: {
        auto res = n_bisection(chain, decoder, rate_target);
        return {family, rate_target, res.mixture, res.evaluation.avg_aoii, res.evaluation.avg_rate,
                std::move(res.trace)};
    }
    case Family::Multi:
    case Family::OptimalOracle: {
        BisectionOptions o = opts;
        o.solver = family == Family::Multi ? SolverKind::Threshold : SolverKind::Plain;
        auto res = lambda_bisection(chain, decoder, rate_target, o);
        return {family, rate_target, res.mixture, res.evaluation.avg_aoii, res.evaluation.avg_rate,
                std::move(res.trace)};
    }
    }
    throw ContractError("unhandled family");
}

struct CurvePoint {
    Family family;
    double rate_target;
    double aoii_closed_form;
    double rate_closed_form;
    std::optional<Estimate> aoii_simulated;
    std::optional<Estimate> rate_simulated;
};

/**
 * Synthesizes every family at every grid rate and reports the closed-form
 * AoII, plus Monte-Carlo estimates when `sim` is given. Rows are sorted by
 * rate, then by family in the order given.
 */
inline std::vector<CurvePoint> estimate_curve(const std::vector<Family>& families, const SourceChain& chain,
                                              const DecoderProfile& decoder, std::vector<double> grid,
                                              const BisectionOptions& opts,
                                              const std::optional<SimulationConfig>& sim) {
    std::sort(grid.begin(), grid.end());
    std::vector<CurvePoint> out;
    for (double r : grid) {
        if (!(r > 0.0 && r <= 1.0)) throw ModelError("rate grid values must lie in (0,1]");
        for (Family f : families) {
            const FamilyPolicy fp = synthesize(f, chain, decoder, r, opts);
            CurvePoint pt{f, r, fp.avg_aoii, fp.avg_rate, std::nullopt, std::nullopt};
            if (sim) {
                const auto res = run(fp.policy, chain, decoder, *sim);
                pt.aoii_simulated = res.aoii;
                pt.rate_simulated = res.rate;
            }
            out.push_back(pt);
        }
    }
    return out;
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& rows) {
    out << "# schema: aoii-curve/1 (family,R,aoii_closed_form,aoii_simulated,aoii_se,rate_closed_form)\n"
        << "family,R,aoii_closed_form,aoii_simulated,aoii_se,rate_closed_form\n";
    for (const auto& p : rows) {
        out << family_name(p.family) << ',' << format_number(p.rate_target) << ','
            << format_number(p.aoii_closed_form) << ','
            << (p.aoii_simulated ? format_number(p.aoii_simulated->mean) : std::string()) << ','
            << (p.aoii_simulated ? format_number(p.aoii_simulated->se) : std::string()) << ','
            << format_number(p.rate_closed_form) << '\n';
    }
}

/// Line plot of closed-form AoII against the rate constraint, one polyline per family.
inline void write_curve_svg(std::ostream& out, const std::vector<CurvePoint>& rows, const std::string& title) {
    const double width = 640.0;
    const double height = 420.0;
    const double left = 70.0;
    const double right = 150.0;
    const double top = 40.0;
    const double bottom = 60.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double x_min = 1.0;
    double x_max = 0.0;
    double y_max = 0.0;
    std::vector<Family> order;
    for (const auto& p : rows) {
        x_min = std::min(x_min, p.rate_target);
        x_max = std::max(x_max, p.rate_target);
        y_max = std::max(y_max, p.aoii_closed_form);
        if (std::find(order.begin(), order.end(), p.family) == order.end()) order.push_back(p.family);
    }
    if (x_max <= x_min) x_max = x_min + 1.0;
    if (!(y_max > 0.0)) y_max = 1.0;
    y_max *= 1.05;
    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return top + plot_h - y / y_max * plot_h; };
    auto fmt = [](double v, const char* f) {
        char buf[64];
        std::snprintf(buf, sizeof buf, f, v);
        return std::string(buf);
    };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<title>" << title << "</title>\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title
        << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = x_min + (x_max - x_min) * i / 5.0;
        const double yv = y_max * i / 5.0;
        out << "<line x1=\"" << fmt(px(xv), "%.2f") << "\" y1=\"" << top + plot_h << "\" x2=\"" << fmt(px(xv), "%.2f")
            << "\" y2=\"" << top + plot_h + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt(px(xv), "%.2f") << "\" y=\"" << top + plot_h + 20
            << "\" text-anchor=\"middle\">" << fmt(xv, "%.3g") << "</text>\n";
        out << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt(py(yv), "%.2f") << "\" x2=\"" << left << "\" y2=\""
            << fmt(py(yv), "%.2f") << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << fmt(py(yv) + 4, "%.2f") << "\" text-anchor=\"end\">"
            << fmt(yv, "%.3g") << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15
        << "\" text-anchor=\"middle\">transmission rate R</text>\n";
    out << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << top + plot_h / 2 << ")\">average AoII</text>\n";

    for (std::size_t k = 0; k < order.size(); ++k) {
        const char* color = colors[k % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& p : rows) {
            if (p.family != order[k]) continue;
            out << (first ? "" : " ") << fmt(px(p.rate_target), "%.2f") << ',' << fmt(py(p.aoii_closed_form), "%.2f");
            first = false;
        }
        out << "\"><title>" << family_name(order[k]) << "</title></polyline>\n";
        const double ly = top + 10 + 20.0 * static_cast<double>(k);
        out << "<line x1=\"" << left + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 40
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << left + plot_w + 45 << "\" y=\"" << ly + 4 << "\">" << family_name(order[k])
            << "</text>\n";
    }
    out << "</svg>\n";
}

/// Threshold table per packet count; rows are s, columns w, both 1-based.
inline std::string threshold_table(const MultiThresholdPolicy& p) {
    std::ostringstream out;
    for (int r = 0; r <= p.r_max(); ++r) {
        out << "r = " << r << " (earlier packets of the current sample at the receiver)\n";
        out << "s\\w";
        for (int w = 0; w < p.n_states(); ++w) out << '\t' << w + 1;
        out << '\n';
        for (int s = 0; s < p.n_states(); ++s) {
            out << s + 1;
            for (int w = 0; w < p.n_states(); ++w) {
                out << '\t';
                if (s == w)
                    out << "\u2014";
                else if (p.threshold(s, w, r).is_never())
                    out << "never";
                else
                    out << p.threshold(s, w, r).value();
            }
            out << '\n';
        }
        out << '\n';
    }
    return out.str();
}

inline std::string threshold_table(const SingleThresholdPolicy& p) {
    return p.threshold().is_never() ? "n = never\n" : "n = " + std::to_string(p.threshold().value()) + "\n";
}

inline std::string threshold_table(const StationaryPolicy& p) {
    return std::visit(
        [](const auto& q) -> std::string {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, TabularPolicy>) {
                if (auto t = threshold_form(q)) return threshold_table(*t);
                return "tabular policy (not monotone in AoII)\n";
            } else {
                return threshold_table(q);
            }
        },
        p);
}

inline void write_trace_csv(std::ostream& out, const BisectionTrace& trace) {
    out << "# schema: aoii-trace/1 (iteration,phase,lambda_or_n,gain,rate,lower,upper)\n"
        << "iteration,phase,lambda_or_n,gain,rate,lower,upper\n";
    for (const auto& s : trace.steps)
        out << s.iteration << ',' << s.phase << ',' << format_number(s.lambda) << ',' << format_number(s.gain) << ','
            << format_number(s.rate) << ',' << format_number(s.lower) << ',' << format_number(s.upper) << '\n';
}

struct PolicyReport {
    double avg_aoii = 0.0;
    double avg_rate = 0.0;
    std::optional<double> rho;                  ///< mixtures only
    std::optional<CycleStatistics> cycle_stats; ///< absent for the periodic baseline
};

/// Closed-form performance of any supported policy.
inline PolicyReport evaluate_any(const AnyPolicy& policy, const SourceChain& chain, const DecoderProfile& decoder) {
    return std::visit(
        [&](const auto& p) -> PolicyReport {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PeriodicPolicy>) {
                if (p.phase() != 0) throw ModelError("closed-form periodic evaluation starts at phase 0");
                const auto ev = evaluate_periodic(chain, decoder, p.period());
                return {ev.avg_aoii, ev.avg_rate, std::nullopt, std::nullopt};
            } else if constexpr (std::is_same_v<T, RandomizedMixturePolicy>) {
                auto ev = evaluate_mixture(chain, decoder, p);
                return {ev.avg_aoii, ev.avg_rate, p.rho(), std::move(ev.cycle_stats)};
            } else {
                auto ev = evaluate_policy(chain, decoder, p);
                return {ev.avg_aoii, ev.avg_rate, std::nullopt, std::move(ev.cycle_stats)};
            }
        },
        policy);
}

/**
 * One row per regeneration state z (1-based) with its cycle expectations;
 * the policy-level columns repeat. The periodic baseline has no cycle
 * decomposition and gets a single row with empty z columns.
 */
inline void write_evaluation_csv(std::ostream& out, const std::string& label, const PolicyReport& r,
                                 std::optional<double> rate_target = std::nullopt) {
    out << "# schema: aoii-evaluation/1 (policy,R,rho,avg_aoii,avg_rate,z,E_L,E_J,E_C)\n"
        << "policy,R,rho,avg_aoii,avg_rate,z,E_L,E_J,E_C\n";
    const std::string head = label + ',' + (rate_target ? format_number(*rate_target) : std::string()) + ',' +
                             (r.rho ? format_number(*r.rho) : std::string()) + ',' + format_number(r.avg_aoii) +
                             ',' + format_number(r.avg_rate) + ',';
    if (!r.cycle_stats) {
        out << head << ",,,\n";
        return;
    }
    const auto& c = *r.cycle_stats;
    for (Eigen::Index z = 0; z < c.expected_length.size(); ++z)
        out << head << z + 1 << ',' << format_number(c.expected_length(z)) << ','
            << format_number(c.expected_cum_aoii(z)) << ',' << format_number(c.expected_transmissions(z)) << '\n';
}

// ---------------------------------------------------------------------------
// Validation suite

struct Check {
    std::string name;
    bool passed;
    std::string detail;
    bool finding = false; ///< reported, never counted as a failure
};

struct ValidationReport {
    std::vector<Check> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed || c.finding; });
    }
    void add(std::string name, bool ok, std::string detail, bool finding = false) {
        checks.push_back({std::move(name), ok, std::move(detail), finding});
    }
};

inline nlohmann::json to_json(const ValidationReport& report) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : report.checks)
        checks.push_back({{"name", c.name},
                          {"status", c.passed ? "pass" : (c.finding ? "finding" : "fail")},
                          {"detail", c.detail}});
    return {{"format", "aoii-validation/1"}, {"passed", report.passed()}, {"checks", checks}};
}

struct ValidationOptions {
    double rate_target = 0.2;
    std::vector<double> lambdas{1.0, 8.0, 32.0};
    int delta_cap = 50;
    RviOptions rvi{};
    SimulationConfig simulation{2'000'000, -1, 1, 1, 100, {0, 0, 0, 0}, false};
};

/// Stochasticity and irreducibility of a raw model document.
inline bool validate_model_document(const nlohmann::json& doc, ValidationReport& report) {
    Eigen::MatrixXd p;
    try {
        p = read_transition_matrix(doc);
    } catch (const std::exception& e) {
        report.add("model-shape", false, e.what());
        return false;
    } catch (...) {
        report.add("model-shape", false, "unreadable transition matrix");
        return false;
    }
    report.add("model-shape", true, std::to_string(p.rows()) + " states");
    bool ok = true;
    std::string detail = "all rows sum to 1 within 1e-9 and are non-negative";
    const bool normalize = doc.value("normalize", false);
    for (Eigen::Index i = 0; i < p.rows() && ok; ++i) {
        const double sum = p.row(i).sum();
        if ((p.row(i).array() < 0.0).any()) {
            ok = false;
            detail = "row " + std::to_string(i + 1) + " has a negative entry";
        } else if (std::abs(sum - 1.0) > kFileRowSumTolerance && !normalize) {
            ok = false;
            detail = "row " + std::to_string(i + 1) + " sums to " + format_number(sum);
        }
    }
    report.add("stochastic", ok, detail);
    if (!ok) return false;
    try {
        parse_model(doc);
        report.add("irreducible", true, "single communicating class");
    } catch (const std::exception& e) {
        report.add("irreducible", false, e.what());
        return false;
    }
    return true;
}

/**
 * Cross-checks every invariant of the toolkit on one model: kernel
 * stochasticity, threshold vs plain RVI, zero-AoII waiting, bisection
 * brackets and exact mixture rates, truncation padding, and
 * analyzer vs simulator agreement. Deterministic for a fixed seed.
 */
inline ValidationReport run_validation(const SourceChain& chain, const DecoderProfile& decoder,
                                       const ValidationOptions& opts = {}) {
    ValidationReport rep;
    auto num = [](double v) { return format_number(v); };

    {
        const StateSpace sp(chain, decoder, opts.delta_cap);
        double worst = 0.0;
        bool same_law = true;
        for (std::size_t k = 0; k < sp.size(); ++k) {
            const SystemState x = sp.state_at(k);
            for (Action a : {Action::Wait, Action::Transmit}) {
                double sum = 0.0;
                for (const auto& t : transition_distribution(x, a, chain, decoder)) sum += t.probability;
                worst = std::max(worst, std::abs(sum - 1.0));
            }
            if (x.s == x.w) {
                const auto w = transition_distribution(x, Action::Wait, chain, decoder);
                const auto t = transition_distribution(x, Action::Transmit, chain, decoder);
                if (w.size() != t.size()) same_law = false;
                for (std::size_t i = 0; i < w.size() && same_law; ++i)
                    same_law = w[i].next == t[i].next && std::abs(w[i].probability - t[i].probability) < 1e-15;
            }
        }
        rep.add("kernel-stochastic", worst < 1e-12, "max row defect " + num(worst));
        rep.add("kernel-matching-transmit-is-wait", same_law, "transmitting at s = w has the wait law");
    }

    bool prop2 = true;
    bool positive = true;
    auto note_policy = [&](const MultiThresholdPolicy& p) {
        for (int s = 0; s < p.n_states(); ++s)
            for (int r = 0; r <= p.r_max(); ++r) {
                if (p.action({s, s, 0, r}) == Action::Transmit) prop2 = false;
                for (int w = 0; w < p.n_states(); ++w)
                    if (s != w && !p.threshold(s, w, r).is_never() && p.threshold(s, w, r).value() < 1)
                        positive = false;
            }
    };

    const TruncatedMDP mdp(chain, decoder, opts.delta_cap);
    for (double lambda : opts.lambdas) {
        const auto th = rvi_threshold(mdp, lambda, opts.rvi);
        const auto pl = rvi_plain(mdp, lambda, opts.rvi);
        note_policy(th.thresholds);
        std::size_t mismatched = 0;
        for (std::size_t k = 0; k < mdp.space().size(); ++k) {
            const SystemState x = mdp.space().state_at(k);
            if (th.thresholds.action(x) != pl.greedy.actions()[k]) ++mismatched;
            if (x.delta == 0 && pl.greedy.actions()[k] == Action::Transmit) prop2 = false;
        }
        const std::string at = " at lambda " + num(lambda);
        rep.add("rvi-converged" + at, th.converged && pl.converged,
                std::to_string(th.iterations) + " / " + std::to_string(pl.iterations) + " sweeps");
        rep.add("threshold-vs-plain" + at, mismatched == 0,
                std::to_string(mismatched) + " differing states" + (th.saturated ? " (thresholds saturated)" : ""));
        rep.add("gain-agreement" + at, std::abs(th.gain - pl.gain) <= 10.0 * opts.rvi.tol,
                "threshold " + num(th.gain) + ", plain " + num(pl.gain));
        const int bad = monotonicity_violations(pl.greedy);
        rep.add("plain-monotone-in-aoii" + at, bad == 0, std::to_string(bad) + " non-monotone slices", bad != 0);
    }

    {
        bool monotone = true;
        double prev = 2.0;
        for (int n = 1; n <= 30; ++n) {
            const double r = evaluate_policy(chain, decoder, SingleThresholdPolicy(n)).avg_rate;
            if (r > prev + 1e-12) monotone = false;
            prev = r;
        }
        rep.add("single-rate-monotone-in-n", monotone, "n = 1..30");
    }

    {
        const SingleThresholdPolicy p(3);
        const auto base = evaluate_policy(chain, decoder, p);
        double worst = 0.0;
        for (int pad : {1, 5, 20}) {
            const auto e = evaluate_policy(chain, decoder, p, p.aoii_cap() + pad);
            worst = std::max({worst, std::abs(e.avg_aoii - base.avg_aoii), std::abs(e.avg_rate - base.avg_rate)});
        }
        rep.add("truncation-padding", worst < 1e-10, "max change " + num(worst));
        rep.add("embedded-stationary-normalized",
                std::abs(base.cycle_stats.embedded_stationary.sum() - 1.0) < 1e-12 &&
                    base.cycle_stats.embedded_stationary.minCoeff() >= -1e-14,
                "sum " + num(base.cycle_stats.embedded_stationary.sum()));
    }

    const double R = opts.rate_target;
    BisectionOptions bo;
    bo.rvi = opts.rvi;
    const auto multi = lambda_bisection(chain, decoder, R, bo);
    const auto single = n_bisection(chain, decoder, R);
    for (const auto* res : {&multi, &single}) {
        const std::string which = res == &multi ? "multi" : "single";
        const auto& tr = res->trace;
        rep.add("bisection-bracket-" + which, tr.rate_plus <= R + 1e-12 && (tr.rate_minus >= R - 1e-12 || tr.rho == 1.0),
                "rates " + num(tr.rate_plus) + " <= " + num(R) + " <= " + num(tr.rate_minus));
        rep.add("bisection-rate-monotone-" + which, tr.rate_monotone, std::to_string(tr.steps.size()) + " probes");
        const bool interior = tr.rho > 0.0 && tr.rho < 1.0;
        rep.add("mixture-rate-exact-" + which, !interior || std::abs(res->evaluation.avg_rate - R) <= 1e-9,
                "rate " + num(res->evaluation.avg_rate) + ", rho " + num(tr.rho));
    }
    for (const auto* comp : {&multi.mixture.minus(), &multi.mixture.plus()})
        if (auto* m = std::get_if<MultiThresholdPolicy>(comp)) note_policy(*m);
    rep.add("zero-aoii-wait", prop2, "no solver output transmits at a zero-AoII state");
    rep.add("thresholds-positive", positive, "all thresholds >= 1");

    {
        const auto sim = simulate_replication(multi.mixture, chain, decoder, opts.simulation, 0);
        const auto& ev = multi.evaluation;
        const double za = std::abs(sim.aoii.mean - ev.avg_aoii) / sim.aoii.se;
        const double zr = std::abs(sim.rate.mean - ev.avg_rate) / sim.rate.se;
        rep.add("analyzer-vs-simulator-aoii", za <= 3.0,
                "closed form " + num(ev.avg_aoii) + ", simulated " + num(sim.aoii.mean) + " +- " + num(sim.aoii.se));
        rep.add("analyzer-vs-simulator-rate", zr <= 3.0,
                "closed form " + num(ev.avg_rate) + ", simulated " + num(sim.rate.mean) + " +- " + num(sim.rate.se));
        rep.add("cycle-identity", sim.cycle_identity_violations == 0,
                std::to_string(sim.n_cycles) + " cycles, " + std::to_string(sim.cycle_identity_violations) + " violations");
        rep.add("aoii-recursion", sim.recursion_violations == 0,
                std::to_string(sim.recursion_violations) + " violations");
        const double rho = multi.mixture.rho();
        const auto frac = sim.minus_fraction(rho);
        const bool ok = rho <= 0.0 || rho >= 1.0 || std::abs(frac.mean - rho) <= 3.0 * frac.se;
        rep.add("mixture-cycle-fraction", ok, "fraction " + num(frac.mean) + ", rho " + num(rho));
        rep.add("enough-cycles", !sim.few_cycles, std::to_string(sim.n_cycles) + " cycles");
    }
    return rep;
}

} // namespace aoii
