#pragma once

// Policy synthesis on the AoII-capped Lagrangian MDP: threshold-structured
// and plain relative value iteration, bisection over the transmission
// penalty, bisection over the single threshold, and selection of the cap.

#include "aoii/errors.hpp"
#include "aoii/model.hpp"
#include "aoii/policies.hpp"
#include "aoii/renewal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace aoii {

/**
 * The Lagrangian MDP with AoII limited to delta_cap: transitions that would
 * reach delta_cap + 1 land on delta_cap with the rest of the state
 * unchanged.
 */
class TruncatedMDP {
public:
    TruncatedMDP(SourceChain chain, DecoderProfile decoder, int delta_cap)
        : chain_(std::move(chain)), decoder_(decoder), space_(chain_, decoder_, delta_cap) {}

    const SourceChain& chain() const { return chain_; }
    const DecoderProfile& decoder() const { return decoder_; }
    const StateSpace& space() const { return space_; }
    int delta_cap() const { return space_.delta_cap(); }

private:
    SourceChain chain_;
    DecoderProfile decoder_;
    StateSpace space_;
};

struct RviOptions {
    double tol = 1e-9;
    int max_iter = 100000;
};

struct RviSolution {
    std::vector<double> value; ///< relative values in state-space order
    double gain = 0.0;
    MultiThresholdPolicy thresholds{1, 0, 1};
    int iterations = 0;
    bool converged = false;
    bool saturated = false; ///< some slice never switched within the cap; it is reported as "never"
};

struct PlainRviSolution {
    std::vector<double> value;
    double gain = 0.0;
    TabularPolicy greedy{StateSpace(1, 0, 1), {Action::Wait}};
    int iterations = 0;
    bool converged = false;
};

namespace detail {

/**
 * Value function storage and Bellman backups for the capped MDP.
 *
 * Mismatch values are stored as V[d][s][w][r] for d in [1, cap]; the
 * diagonal slots are unused. The wait backup of (s, w, d, r) only needs
 * G_d'(s, w) = sum_{s' != w} p(s, s') V(d', s', w, 0) with d' = min(d+1, cap),
 * and the transmit backup is expressed through G as well, so one N x N
 * product per AoII level gives every backup in O(1).
 */
class BellmanKernel {
public:
    explicit BellmanKernel(const TruncatedMDP& mdp)
        : p_(mdp.chain().matrix()), n_(mdp.chain().n_states()), r1_(mdp.decoder().r_max() + 1),
          cap_(mdp.delta_cap()), r_max_(mdp.decoder().r_max()), space_(&mdp.space()) {
        ok_.resize(static_cast<std::size_t>(r1_));
        for (int r = 0; r < r1_; ++r) ok_[static_cast<std::size_t>(r)] = mdp.decoder().success(r);
        g_.assign(static_cast<std::size_t>(cap_), Eigen::MatrixXd::Zero(n_, n_));
    }

    std::size_t mismatch_size() const {
        return static_cast<std::size_t>(cap_) * static_cast<std::size_t>(n_ * n_ * r1_);
    }
    std::size_t at(int d, int s, int w, int r) const {
        return static_cast<std::size_t>((((d - 1) * n_ + s) * n_ + w) * r1_ + r);
    }

    /// Refreshes G from the current values.
    void prepare(const std::vector<double>& v) {
        Eigen::MatrixXd level(n_, n_);
        for (int d = 1; d <= cap_; ++d) {
            for (int s = 0; s < n_; ++s)
                for (int w = 0; w < n_; ++w) level(s, w) = s == w ? 0.0 : v[at(d, s, w, 0)];
            g_[static_cast<std::size_t>(d - 1)].noalias() = p_ * level;
        }
    }

    double g(int d, int s, int w) const { return g_[static_cast<std::size_t>(d - 1)](s, w); }

    double wait_value(const std::vector<double>& v, const std::vector<double>& reg, int s, int w, int d) const {
        (void)v;
        const int next = std::min(d + 1, cap_);
        return d + g(next, s, w) + p_(s, w) * reg[static_cast<std::size_t>(w)];
    }

    double transmit_value(const std::vector<double>& v, const std::vector<double>& reg, int s, int w, int d,
                          int r, double lambda) const {
        const int next = std::min(d + 1, cap_);
        const double ok = ok_[static_cast<std::size_t>(r)];
        const double pss = p_(s, s);
        const int more = std::min(r + 1, r_max_);
        const double failed = g(next, s, w) - pss * v[at(next, s, w, 0)] + p_(s, w) * reg[static_cast<std::size_t>(w)] +
                              pss * v[at(next, s, w, more)];
        const double decoded = g(next, s, s) + pss * reg[static_cast<std::size_t>(s)];
        return d + lambda + (1.0 - ok) * failed + ok * decoded;
    }

    double regeneration_wait(const std::vector<double>& reg, int z) const {
        return g(1, z, z) + p_(z, z) * reg[static_cast<std::size_t>(z)];
    }

    int n() const { return n_; }
    int r1() const { return r1_; }
    int cap() const { return cap_; }

    /// Copies between the internal layout and state-space order.
    std::vector<double> to_space(const std::vector<double>& v, const std::vector<double>& reg) const {
        std::vector<double> out(space_->size());
        for (std::size_t k = 0; k < out.size(); ++k) {
            const SystemState x = space_->state_at(k);
            out[k] = x.s == x.w ? reg[static_cast<std::size_t>(x.s)] : v[at(x.delta, x.s, x.w, x.r)];
        }
        return out;
    }
    void from_space(const std::vector<double>& in, std::vector<double>& v, std::vector<double>& reg) const {
        if (in.size() != space_->size()) throw ContractError("initial value has the wrong size");
        for (std::size_t k = 0; k < in.size(); ++k) {
            const SystemState x = space_->state_at(k);
            if (x.s == x.w)
                reg[static_cast<std::size_t>(x.s)] = in[k];
            else
                v[at(x.delta, x.s, x.w, x.r)] = in[k];
        }
    }

private:
    Eigen::MatrixXd p_;
    int n_;
    int r1_;
    int cap_;
    int r_max_;
    const StateSpace* space_;
    std::vector<double> ok_;
    std::vector<Eigen::MatrixXd> g_;
};

/// Span of the value change, accumulated while the new values are stored relative to `ref`.
struct SpanTracker {
    double ref;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void store(double& slot, double previous, double fresh) {
        const double d = fresh - previous;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        slot = fresh - ref;
    }
    double span() const { return hi - lo; }
};

} // namespace detail

/**
 * Wait/transmit action values of every state for the value vector `value`
 * (state-space order): entry k holds {V0, V1} of state k.
 */
inline std::vector<std::array<double, 2>> action_values(const TruncatedMDP& mdp, const std::vector<double>& value,
                                                        double lambda) {
    detail::BellmanKernel kern(mdp);
    std::vector<double> v(kern.mismatch_size(), 0.0);
    std::vector<double> reg(static_cast<std::size_t>(kern.n()), 0.0);
    kern.from_space(value, v, reg);
    kern.prepare(v);
    std::vector<std::array<double, 2>> out(mdp.space().size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const SystemState x = mdp.space().state_at(k);
        if (x.s == x.w) {
            const double wait = kern.regeneration_wait(reg, x.s);
            out[k] = {wait, wait + lambda};
        } else {
            out[k] = {kern.wait_value(v, reg, x.s, x.w, x.delta),
                      kern.transmit_value(v, reg, x.s, x.w, x.delta, x.r, lambda)};
        }
    }
    return out;
}

/**
 * Relative value iteration that exploits the threshold structure.
 *
 * For each (s, w, r) the AoII is scanned upward; at the first level where
 * the transmit value does not exceed the wait value the threshold is
 * recorded and every higher level takes the transmit backup without
 * comparing. Backups use the previous sweep's values. The reference state
 * is (1, 1, 0, 0), convergence is declared when the span of the value
 * change drops below tol, and the gain is the reference state's backup.
 * Matching states always wait. A slice that never switches within the cap
 * waits at every level, so its threshold is "never" and `saturated` is set.
 */
inline RviSolution rvi_threshold(const TruncatedMDP& mdp, double lambda, const RviOptions& opts = {},
                                 const std::vector<double>* initial = nullptr) {
    if (!(opts.tol > 0.0)) throw ContractError("tolerance must be positive");
    if (!(lambda >= 0.0)) throw ModelError("lambda must be non-negative");
    detail::BellmanKernel kern(mdp);
    const int n = kern.n();
    const int r1 = kern.r1();
    const int cap = kern.cap();

    std::vector<double> v(kern.mismatch_size(), 0.0);
    std::vector<double> reg(static_cast<std::size_t>(n), 0.0);
    if (initial) kern.from_space(*initial, v, reg);
    std::vector<double> v_new = v;
    std::vector<double> reg_new = reg;
    std::vector<int> thresholds(static_cast<std::size_t>(n * n * r1), cap);
    std::vector<char> switched(thresholds.size(), 0);

    RviSolution out;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        kern.prepare(v);
        detail::SpanTracker track{kern.regeneration_wait(reg, 0)};
        for (int z = 0; z < n; ++z) {
            const auto i = static_cast<std::size_t>(z);
            track.store(reg_new[i], reg[i], kern.regeneration_wait(reg, z));
        }
        std::fill(thresholds.begin(), thresholds.end(), cap);
        std::fill(switched.begin(), switched.end(), 0);
        // AoII outermost to follow the storage order; a slice that has
        // switched takes the transmit backup without comparing
        for (int d = 1; d <= cap; ++d)
            for (int s = 0; s < n; ++s)
                for (int w = 0; w < n; ++w) {
                    if (s == w) continue;
                    const double wait = kern.wait_value(v, reg, s, w, d);
                    for (int r = 0; r < r1; ++r) {
                        const auto slice = static_cast<std::size_t>((s * n + w) * r1 + r);
                        const double send = kern.transmit_value(v, reg, s, w, d, r, lambda);
                        if (!switched[slice] && send <= wait) {
                            thresholds[slice] = d;
                            switched[slice] = 1;
                        }
                        const auto i = kern.at(d, s, w, r);
                        track.store(v_new[i], v[i], switched[slice] ? send : wait);
                    }
                }
        std::swap(v, v_new);
        std::swap(reg, reg_new);
        out.iterations = iter;
        out.gain = track.ref;
        if (track.span() < opts.tol) {
            out.converged = true;
            break;
        }
    }

    MultiThresholdPolicy policy(n, r1 - 1, 1);
    for (int s = 0; s < n; ++s)
        for (int w = 0; w < n; ++w) {
            if (s == w) continue;
            for (int r = 0; r < r1; ++r) {
                const auto slice = static_cast<std::size_t>((s * n + w) * r1 + r);
                if (switched[slice]) {
                    policy.set(s, w, r, Threshold::at(thresholds[slice]));
                } else {
                    policy.set(s, w, r, Threshold::never());
                    out.saturated = true;
                }
            }
        }
    out.thresholds = std::move(policy);
    out.value = kern.to_space(v, reg);
    return out;
}

/**
 * Relative value iteration with a full minimization over both actions at
 * every state. Ties at mismatch states go to transmit; matching states
 * transmit only if strictly better. Same convergence rule as
 * rvi_threshold.
 */
inline PlainRviSolution rvi_plain(const TruncatedMDP& mdp, double lambda, const RviOptions& opts = {},
                                  const std::vector<double>* initial = nullptr) {
    if (!(opts.tol > 0.0)) throw ContractError("tolerance must be positive");
    if (!(lambda >= 0.0)) throw ModelError("lambda must be non-negative");
    detail::BellmanKernel kern(mdp);
    const int n = kern.n();
    const int r1 = kern.r1();
    const int cap = kern.cap();

    std::vector<double> v(kern.mismatch_size(), 0.0);
    std::vector<double> reg(static_cast<std::size_t>(n), 0.0);
    if (initial) kern.from_space(*initial, v, reg);
    std::vector<double> v_new = v;
    std::vector<double> reg_new = reg;

    PlainRviSolution out;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        kern.prepare(v);
        // transmitting at a matching state only adds lambda
        detail::SpanTracker track{kern.regeneration_wait(reg, 0)};
        for (int z = 0; z < n; ++z) {
            const auto i = static_cast<std::size_t>(z);
            track.store(reg_new[i], reg[i], kern.regeneration_wait(reg, z));
        }
        for (int d = 1; d <= cap; ++d)
            for (int s = 0; s < n; ++s)
                for (int w = 0; w < n; ++w) {
                    if (s == w) continue;
                    const double wait = kern.wait_value(v, reg, s, w, d);
                    for (int r = 0; r < r1; ++r) {
                        const auto i = kern.at(d, s, w, r);
                        track.store(v_new[i], v[i], std::min(wait, kern.transmit_value(v, reg, s, w, d, r, lambda)));
                    }
                }
        std::swap(v, v_new);
        std::swap(reg, reg_new);
        out.iterations = iter;
        out.gain = track.ref;
        if (track.span() < opts.tol) {
            out.converged = true;
            break;
        }
    }

    out.value = kern.to_space(v, reg);
    const auto q = action_values(mdp, out.value, lambda);
    std::vector<Action> greedy(q.size(), Action::Wait);
    for (std::size_t k = 0; k < q.size(); ++k) {
        const SystemState x = mdp.space().state_at(k);
        const bool send = x.s == x.w ? q[k][1] < q[k][0] : q[k][1] <= q[k][0];
        greedy[k] = send ? Action::Transmit : Action::Wait;
    }
    out.greedy = TabularPolicy(mdp.space(), std::move(greedy));
    return out;
}

/// Slices (s, w, r) whose action is not wait-then-transmit in delta.
inline int monotonicity_violations(const TabularPolicy& policy) {
    const StateSpace& sp = policy.space();
    int bad = 0;
    for (int s = 0; s < sp.n_states(); ++s)
        for (int w = 0; w < sp.n_states(); ++w) {
            if (s == w) continue;
            for (int r = 0; r <= sp.r_max(); ++r) {
                bool sending = false;
                for (int d = 1; d <= sp.delta_cap(); ++d) {
                    const bool t = policy.action({s, w, d, r}) == Action::Transmit;
                    if (sending && !t) {
                        ++bad;
                        break;
                    }
                    sending = sending || t;
                }
            }
        }
    return bad;
}

/// Threshold form of a monotone tabular policy; nullopt if some slice is not monotone.
inline std::optional<MultiThresholdPolicy> threshold_form(const TabularPolicy& policy) {
    if (monotonicity_violations(policy) > 0) return std::nullopt;
    const StateSpace& sp = policy.space();
    MultiThresholdPolicy out(sp.n_states(), sp.r_max(), 1);
    for (int s = 0; s < sp.n_states(); ++s)
        for (int w = 0; w < sp.n_states(); ++w) {
            if (s == w) continue;
            for (int r = 0; r <= sp.r_max(); ++r) {
                Threshold t = Threshold::never();
                for (int d = 1; d <= sp.delta_cap(); ++d)
                    if (policy.action({s, w, d, r}) == Action::Transmit) {
                        t = Threshold::at(d);
                        break;
                    }
                out.set(s, w, r, t);
            }
        }
    return out;
}

/**
 * Carries a value vector to a larger cap; levels above the old cap
 * continue linearly from the last two levels.
 */
inline std::vector<double> extend_values(const StateSpace& from, const std::vector<double>& value,
                                         const StateSpace& to) {
    if (value.size() != from.size()) throw ContractError("value vector does not match its state space");
    const int cap = from.delta_cap();
    std::vector<double> out(to.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        SystemState x = to.state_at(k);
        if (x.delta <= cap) {
            out[k] = value[from.index_of(x)];
            continue;
        }
        const int extra = x.delta - cap;
        x.delta = cap;
        const double top = value[from.index_of(x)];
        double slope = 0.0;
        if (cap > 1) {
            x.delta = cap - 1;
            slope = top - value[from.index_of(x)];
        }
        out[k] = top + slope * extra;
    }
    return out;
}

struct DeltaCapSelection {
    int delta_cap = 0;
    std::vector<std::pair<int, double>> gains; ///< (cap, gain) for every cap solved
    RviSolution solution;                      ///< solution at the returned cap
};

inline constexpr int kInitialDeltaCap = 32;
inline constexpr int kMaxDeltaCap = 1 << 14;

/**
 * Doubles the AoII cap from 32 until the gain moves by less than
 * epsilon * max(1, g) between cap and 2 * cap, the largest threshold lies
 * strictly below the cap, and doubling leaves every threshold unchanged.
 */
inline DeltaCapSelection delta_cap_selection(const SourceChain& chain, const DecoderProfile& decoder, double lambda,
                                             double epsilon, const RviOptions& opts = {}) {
    if (!(epsilon > 0.0)) throw ContractError("epsilon must be positive");
    DeltaCapSelection out;
    int cap = kInitialDeltaCap;
    RviSolution here = rvi_threshold(TruncatedMDP(chain, decoder, cap), lambda, opts);
    out.gains.emplace_back(cap, here.gain);
    while (true) {
        if (2 * cap > kMaxDeltaCap)
            throw NumericalError("AoII cap exceeded 2^14 without converging; review lambda and the source model");
        const TruncatedMDP wider(chain, decoder, 2 * cap);
        const auto init = extend_values(StateSpace(chain, decoder, cap), here.value, wider.space());
        RviSolution doubled = rvi_threshold(wider, lambda, opts, &init);
        out.gains.emplace_back(2 * cap, doubled.gain);
        const bool gain_ok = std::abs(doubled.gain - here.gain) < epsilon * std::max(1.0, here.gain);
        const bool below_cap = here.thresholds.n_max().value_or(0) < cap;
        if (gain_ok && below_cap && doubled.thresholds == here.thresholds) {
            out.delta_cap = cap;
            out.solution = std::move(here);
            return out;
        }
        cap *= 2;
        here = std::move(doubled);
    }
}

enum class SolverKind { Threshold, Plain };

struct BisectionOptions {
    int delta_cap = 0; ///< 0 selects the cap automatically
    double tol_lambda = 1e-6; ///< relative, times max(1, lambda_plus)
    RviOptions rvi{};
    double cap_epsilon = 1e-6;
    SolverKind solver = SolverKind::Threshold;
};

struct BisectionStep {
    int iteration = 0;
    std::string phase; ///< "bracket" or "bisect"
    double lambda = 0.0; ///< lambda, or the threshold n for the single-threshold search
    double gain = 0.0;
    double rate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    int sweeps = 0; ///< RVI sweeps spent on this probe
};

struct BisectionTrace {
    double lambda_minus = 0.0;
    double lambda_plus = 0.0;
    double rate_minus = 0.0;
    double rate_plus = 0.0;
    double rho = 1.0;
    double rho_interpolated = 1.0; ///< linear interpolation of the component rates
    int delta_cap = 0;
    std::vector<BisectionStep> steps;
    bool rate_monotone = true;
    std::vector<std::string> warnings;
};

struct BisectionResult {
    RandomizedMixturePolicy mixture;
    BisectionTrace trace;
    PolicyEvaluation evaluation; ///< exact mixture performance
};

namespace detail {

struct Probe {
    StationaryPolicy policy;
    PolicyEvaluation eval;
    double gain = 0.0;
    std::vector<double> value;
    int sweeps = 0;
};

inline bool rates_monotone(std::vector<std::pair<double, double>> points) {
    std::sort(points.begin(), points.end());
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].second > points[i - 1].second + 1e-12) return false;
    return true;
}

inline BisectionResult assemble(Probe lo, Probe hi, double rate_target, BisectionTrace trace) {
    trace.rate_minus = lo.eval.avg_rate;
    trace.rate_plus = hi.eval.avg_rate;
    if (lo.eval.avg_rate <= rate_target) {
        // already feasible at the lower end: no randomization needed
        trace.rho = trace.rho_interpolated = 1.0;
        RandomizedMixturePolicy mix(lo.policy, lo.policy, 1.0);
        auto eval = lo.eval;
        return {std::move(mix), std::move(trace), std::move(eval)};
    }
    trace.rho_interpolated = mixing_probability(lo.eval.avg_rate, hi.eval.avg_rate, rate_target);
    trace.rho = calibrate_mixing(lo.eval.cycle_stats, hi.eval.cycle_stats, lo.eval.avg_rate, hi.eval.avg_rate,
                                 rate_target);
    auto eval = evaluate_mixture(lo.eval.cycle_stats, hi.eval.cycle_stats, trace.rho);
    RandomizedMixturePolicy mix(std::move(lo.policy), std::move(hi.policy), trace.rho);
    return {std::move(mix), std::move(trace), std::move(eval)};
}

} // namespace detail

/**
 * Randomized policy for the rate constraint R by bisection on lambda.
 *
 * The bracket starts at [0, 1] and its upper end doubles while the rate
 * exceeds R; bisection then halves it until its width is below
 * tol_lambda * max(1, lambda_plus). Rates come from the renewal analyzer.
 * The minus component has rate >= R, the plus component rate <= R, and
 * rho is set so that the mixture's exact rate equals R.
 */
inline BisectionResult lambda_bisection(const SourceChain& chain, const DecoderProfile& decoder, double rate_target,
                                        const BisectionOptions& opts = {}) {
    if (!(rate_target >= 0.0 && rate_target <= 1.0)) throw ModelError("rate constraint must lie in [0,1]");
    BisectionTrace trace;

    if (rate_target == 0.0) {
        const int n = chain.n_states();
        MultiThresholdPolicy never(n, decoder.r_max(), 1);
        for (int s = 0; s < n; ++s)
            for (int w = 0; w < n; ++w)
                if (s != w)
                    for (int r = 0; r <= decoder.r_max(); ++r) never.set(s, w, r, Threshold::never());
        trace.warnings.push_back("R = 0: returning the never-transmit policy");
        auto eval = evaluate_policy(chain, decoder, never);
        return {RandomizedMixturePolicy(never, never, 1.0), std::move(trace), std::move(eval)};
    }

    int cap = opts.delta_cap > 0 ? opts.delta_cap : kInitialDeltaCap;
    std::vector<double> warm;
    std::vector<std::pair<double, double>> seen;
    int iteration = 0;

    auto probe = [&](double lambda) {
        TruncatedMDP mdp(chain, decoder, cap);
        detail::Probe p{MultiThresholdPolicy(1, 0, 1), {}, 0.0, {}};
        const std::vector<double>* init = warm.size() == mdp.space().size() ? &warm : nullptr;
        if (opts.solver == SolverKind::Threshold) {
            RviSolution sol = rvi_threshold(mdp, lambda, opts.rvi, init);
            if (!sol.converged) trace.warnings.push_back("RVI did not converge at lambda " + std::to_string(lambda));
            p.policy = sol.thresholds;
            p.gain = sol.gain;
            p.sweeps = sol.iterations;
            p.value = std::move(sol.value);
        } else {
            PlainRviSolution sol = rvi_plain(mdp, lambda, opts.rvi, init);
            if (!sol.converged) trace.warnings.push_back("RVI did not converge at lambda " + std::to_string(lambda));
            p.policy = sol.greedy;
            p.gain = sol.gain;
            p.sweeps = sol.iterations;
            p.value = std::move(sol.value);
        }
        p.eval = evaluate_policy(chain, decoder, p.policy);
        warm = p.value;
        seen.emplace_back(lambda, p.eval.avg_rate);
        return p;
    };
    auto log = [&](const char* phase, double lambda, const detail::Probe& p, double lo, double hi) {
        trace.steps.push_back({++iteration, phase, lambda, p.gain, p.eval.avg_rate, lo, hi, p.sweeps});
    };

    // grows the upper end until its rate is at most R
    auto bracket = [&](double& lo, double& hi, detail::Probe& p_hi) {
        p_hi = probe(hi);
        log("bracket", hi, p_hi, lo, hi);
        while (p_hi.eval.avg_rate > rate_target) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e18) throw InfeasibleError("no transmission penalty meets the rate constraint");
            p_hi = probe(hi);
            log("bracket", hi, p_hi, lo, hi);
        }
    };

    double lo = 0.0;
    double hi = 1.0;
    detail::Probe p_hi{MultiThresholdPolicy(1, 0, 1), {}, 0.0, {}};
    bracket(lo, hi, p_hi);

    if (opts.delta_cap <= 0) {
        auto sel = delta_cap_selection(chain, decoder, hi, opts.cap_epsilon, opts.rvi);
        if (sel.delta_cap != cap) {
            // re-check the bracket found at the initial cap
            cap = sel.delta_cap;
            warm = std::move(sel.solution.value);
            seen.clear();
            bracket(lo, hi, p_hi);
        }
    }
    trace.delta_cap = cap;

    detail::Probe p_lo = probe(lo);
    log("bracket", lo, p_lo, lo, hi);
    while (lo > 0.0 && p_lo.eval.avg_rate < rate_target) {
        hi = lo;
        p_hi = std::move(p_lo);
        lo = lo > 1.0 ? lo / 2.0 : 0.0;
        p_lo = probe(lo);
        log("bracket", lo, p_lo, lo, hi);
    }
    while (hi - lo >= opts.tol_lambda * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        detail::Probe p = probe(mid);
        if (p.eval.avg_rate >= rate_target) {
            lo = mid;
            p_lo = std::move(p);
            log("bisect", mid, p_lo, lo, hi);
        } else {
            hi = mid;
            p_hi = std::move(p);
            log("bisect", mid, p_hi, lo, hi);
        }
    }
    trace.lambda_minus = lo;
    trace.lambda_plus = hi;
    trace.rate_monotone = detail::rates_monotone(seen);
    if (!trace.rate_monotone) trace.warnings.push_back("rate was not monotone in lambda over the probes");
    return detail::assemble(std::move(p_lo), std::move(p_hi), rate_target, std::move(trace));
}

/**
 * Randomized single-threshold policy for the rate constraint R: the upper
 * threshold doubles from 2 while its rate exceeds R, then integer bisection
 * narrows [n_minus, n_plus] to adjacent thresholds.
 */
inline BisectionResult n_bisection(const SourceChain& chain, const DecoderProfile& decoder, double rate_target) {
    if (!(rate_target > 0.0 && rate_target <= 1.0)) throw ModelError("rate constraint must lie in (0,1]");
    BisectionTrace trace;
    int iteration = 0;
    std::vector<std::pair<double, double>> seen;

    auto probe = [&](int n) {
        const SingleThresholdPolicy policy(n);
        detail::Probe p{policy, evaluate_policy(chain, decoder, policy), 0.0, {}};
        seen.emplace_back(n, p.eval.avg_rate);
        return p;
    };
    auto log = [&](const char* phase, int n, const detail::Probe& p, int lo, int hi) {
        trace.steps.push_back({++iteration, phase, static_cast<double>(n), 0.0, p.eval.avg_rate,
                               static_cast<double>(lo), static_cast<double>(hi)});
    };

    int lo = 1;
    int hi = 2;
    detail::Probe p_lo = probe(lo);
    log("bracket", lo, p_lo, lo, hi);
    detail::Probe p_hi = probe(hi);
    log("bracket", hi, p_hi, lo, hi);
    while (p_hi.eval.avg_rate > rate_target) {
        if (hi > (1 << 20)) throw InfeasibleError("no single threshold meets the rate constraint");
        lo = hi;
        p_lo = std::move(p_hi);
        hi *= 2;
        p_hi = probe(hi);
        log("bracket", hi, p_hi, lo, hi);
    }
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        detail::Probe p = probe(mid);
        if (p.eval.avg_rate >= rate_target) {
            lo = mid;
            p_lo = std::move(p);
            log("bisect", mid, p_lo, lo, hi);
        } else {
            hi = mid;
            p_hi = std::move(p);
            log("bisect", mid, p_hi, lo, hi);
        }
    }
    trace.lambda_minus = lo;
    trace.lambda_plus = hi;
    trace.rate_monotone = detail::rates_monotone(seen);
    if (!trace.rate_monotone) trace.warnings.push_back("rate was not monotone in n over the probes");
    return detail::assemble(std::move(p_lo), std::move(p_hi), rate_target, std::move(trace));
}

} // namespace aoii
