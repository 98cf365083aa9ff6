#pragma once

// Source chain, HARQ decoder, system state and the action-dependent kernel
// of the slotted monitoring system.

#include "aoii/errors.hpp"
#include "aoii/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace aoii {

inline constexpr double kRowSumTolerance = 1e-12;

/// Row-stochastic, irreducible transition matrix of the monitored source.
class SourceChain {
public:
    explicit SourceChain(Eigen::MatrixXd transition) : p_(std::move(transition)) {
        validate();
    }

    int n_states() const { return static_cast<int>(p_.rows()); }
    double p(int from, int to) const { return p_(from, to); }
    const Eigen::MatrixXd& matrix() const { return p_; }

    /// Largest |row sum - 1| over all rows.
    static double max_row_defect(const Eigen::MatrixXd& m) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            worst = std::max(worst, std::abs(m.row(i).sum() - 1.0));
        return worst;
    }

    /// Reachability closure over positive entries.
    static bool is_irreducible(const Eigen::MatrixXd& m) {
        const auto n = m.rows();
        for (Eigen::Index start = 0; start < n; ++start) {
            std::vector<char> seen(static_cast<std::size_t>(n), 0);
            std::vector<Eigen::Index> stack{start};
            seen[static_cast<std::size_t>(start)] = 1;
            Eigen::Index count = 1;
            while (!stack.empty()) {
                auto i = stack.back();
                stack.pop_back();
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (m(i, j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                        seen[static_cast<std::size_t>(j)] = 1;
                        ++count;
                        stack.push_back(j);
                    }
                }
            }
            if (count != n) return false;
        }
        return true;
    }

private:
    void validate() const {
        if (p_.rows() < 1 || p_.rows() != p_.cols())
            throw ModelError("source transition matrix must be square and non-empty");
        for (Eigen::Index i = 0; i < p_.rows(); ++i) {
            for (Eigen::Index j = 0; j < p_.cols(); ++j) {
                const double v = p_(i, j);
                if (!(v >= 0.0 && v <= 1.0))
                    throw ModelError("transition probability p(" + std::to_string(i + 1) + "," +
                                     std::to_string(j + 1) + ") outside [0,1]");
            }
            const double sum = p_.row(i).sum();
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw ModelError("row " + std::to_string(i + 1) + " sums to " +
                                 std::to_string(sum) + ", expected 1");
        }
        if (!is_irreducible(p_)) throw ModelError("source chain is not irreducible");
    }

    Eigen::MatrixXd p_;
};

/**
 * HARQ decoding profile.
 *
 * success(r) is the probability of decoding when r packets of the current
 * sample are already held, 1 - p_e * c^r. The argument saturates at
 * r_max - 1, so a state holding r_max packets decodes with the best
 * available probability.
 */
class DecoderProfile {
public:
    DecoderProfile(int r_max, double p_e, double c) : r_max_(r_max), p_e_(p_e), c_(c) {
        if (r_max < 1) throw ModelError("r_max must be >= 1");
        if (!(p_e > 0.0 && p_e < 1.0)) throw ModelError("p_e must lie in (0,1)");
        if (!(c > 0.0 && c <= 1.0)) throw ModelError("c must lie in (0,1]");
    }

    /// The setting used throughout the numerical study: r_max=2, p_e=c=0.5.
    static DecoderProfile standard() { return DecoderProfile(2, 0.5, 0.5); }

    int r_max() const { return r_max_; }
    double p_e() const { return p_e_; }
    double c() const { return c_; }

    double success(int r) const {
        const int held = std::clamp(r, 0, r_max_ - 1);
        return 1.0 - p_e_ * std::pow(c_, held);
    }

private:
    int r_max_;
    double p_e_;
    double c_;
};

enum class Action : int { Wait = 0, Transmit = 1 };

inline int as_int(Action a) { return static_cast<int>(a); }

/// (s, w, delta, r). Source and receiver values are 0-based.
struct SystemState {
    int s = 0;
    int w = 0;
    int delta = 0;
    int r = 0;

    bool in_regeneration_set() const { return s == w && delta == 0 && r == 0; }

    friend auto operator<=>(const SystemState&, const SystemState&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const SystemState& x) {
    return os << '(' << x.s + 1 << ',' << x.w + 1 << ',' << x.delta << ',' << x.r << ')';
}

inline void check_state(const SystemState& x, int n_states, int r_max) {
    if (x.s < 0 || x.s >= n_states || x.w < 0 || x.w >= n_states)
        throw ModelError("state source/receiver index out of range");
    if (x.delta < 0) throw ModelError("negative AoII");
    if (x.s == x.w && x.delta > 0) throw ModelError("matching state with positive AoII");
    if (x.r < 0 || x.r > r_max) throw ModelError("packet count outside [0, r_max]");
}

struct LagrangianCostParams {
    double lambda = 0.0;

    explicit LagrangianCostParams(double l) : lambda(l) {
        if (!(l >= 0.0)) throw ModelError("lambda must be non-negative");
    }
};

inline double lagrangian_cost(const SystemState& x, Action a, const LagrangianCostParams& params) {
    return static_cast<double>(x.delta) + params.lambda * as_int(a);
}

/**
 * Visits every successor of (x, a) together with its probability.
 *
 * No successor is emitted twice and zero-probability successors are
 * skipped. Transmitting from a matching state has the same law as waiting,
 * so that case is routed through the wait rows.
 */
template <typename Visitor>
void for_each_successor(const SourceChain& chain, const DecoderProfile& decoder,
                        const SystemState& x, Action a, Visitor&& visit) {
    const int n = chain.n_states();
    const int s = x.s;
    const int w = x.w;
    const int aged = x.delta + 1;

    if (a == Action::Wait || s == w) {
        for (int next = 0; next < n; ++next) {
            const double p = chain.p(s, next);
            if (p <= 0.0) continue;
            if (next == w)
                visit(SystemState{w, w, 0, 0}, p);
            else
                visit(SystemState{next, w, aged, 0}, p);
        }
        return;
    }

    const double ok = decoder.success(x.r);
    const double fail = 1.0 - ok;
    const int more = std::min(x.r + 1, decoder.r_max());

    // decoding failed: receiver keeps w
    for (int next = 0; next < n; ++next) {
        const double p = chain.p(s, next) * fail;
        if (p <= 0.0) continue;
        if (next == w)
            visit(SystemState{w, w, 0, 0}, p);
        else if (next == s)
            visit(SystemState{s, w, aged, more}, p);
        else
            visit(SystemState{next, w, aged, 0}, p);
    }
    // decoding succeeded: receiver learns s
    for (int next = 0; next < n; ++next) {
        const double p = chain.p(s, next) * ok;
        if (p <= 0.0) continue;
        if (next == s)
            visit(SystemState{s, s, 0, 0}, p);
        else
            visit(SystemState{next, s, aged, 0}, p);
    }
}

struct Transition {
    SystemState next;
    double probability = 0.0;
};

inline std::vector<Transition> transition_distribution(const SystemState& x, Action a,
                                                       const SourceChain& chain,
                                                       const DecoderProfile& decoder) {
    check_state(x, chain.n_states(), decoder.r_max());
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(2 * chain.n_states() + 1));
    for_each_successor(chain, decoder, x, a, [&](const SystemState& next, double p) {
        out.push_back({next, p});
    });
    return out;
}

/// Random source with every row's largest entry moved onto the diagonal.
inline SourceChain generate_random_source(int n_states, std::uint64_t seed) {
    if (n_states < 2) throw ModelError("random source needs at least 2 states");
    RandomStream rng(seed);
    Eigen::MatrixXd p(n_states, n_states);
    for (int i = 0; i < n_states; ++i) {
        for (int j = 0; j < n_states; ++j) p(i, j) = rng.uniform_open();
        p.row(i) /= p.row(i).sum();
        Eigen::Index arg = 0;
        p.row(i).maxCoeff(&arg);
        std::swap(p(i, i), p(i, arg));
    }
    return SourceChain(std::move(p));
}

/// The 4-state source used for the illustrative policies.
inline SourceChain reference_source() {
    Eigen::MatrixXd p(4, 4);
    p << 0.52, 0.12, 0.18, 0.18,
         0.17, 0.57, 0.17, 0.09,
         0.03, 0.06, 0.72, 0.19,
         0.16, 0.10, 0.18, 0.56;
    return SourceChain(std::move(p));
}

/**
 * Flat indexing of the AoII-capped state space.
 *
 * States are ordered lexicographically in (s, w, delta, r). A matching pair
 * contributes the single state (s, s, 0, 0); a mismatching pair contributes
 * delta in [1, delta_cap] times r in [0, r_max].
 */
class StateSpace {
public:
    StateSpace(int n_states, int r_max, int delta_cap)
        : n_(n_states), r_max_(r_max), cap_(delta_cap) {
        if (n_states < 1 || r_max < 0) throw ModelError("invalid state-space dimensions");
        if (delta_cap < 1) throw ModelError("delta_cap must be >= 1");
        offsets_.reserve(static_cast<std::size_t>(n_ * n_ + 1));
        std::size_t at = 0;
        for (int s = 0; s < n_; ++s)
            for (int w = 0; w < n_; ++w) {
                offsets_.push_back(at);
                at += (s == w) ? 1 : pair_block();
            }
        offsets_.push_back(at);
    }

    StateSpace(const SourceChain& chain, const DecoderProfile& decoder, int delta_cap)
        : StateSpace(chain.n_states(), decoder.r_max(), delta_cap) {}

    int n_states() const { return n_; }
    int r_max() const { return r_max_; }
    int delta_cap() const { return cap_; }
    std::size_t size() const { return offsets_.back(); }

    bool contains(const SystemState& x) const {
        if (x.s < 0 || x.s >= n_ || x.w < 0 || x.w >= n_) return false;
        if (x.s == x.w) return x.delta == 0 && x.r == 0;
        return x.delta >= 1 && x.delta <= cap_ && x.r >= 0 && x.r <= r_max_;
    }

    std::size_t index_of(const SystemState& x) const {
        if (!contains(x)) throw ModelError("state not in the capped state space");
        const std::size_t base = offsets_[static_cast<std::size_t>(x.s * n_ + x.w)];
        if (x.s == x.w) return base;
        return base + static_cast<std::size_t>(x.delta - 1) * static_cast<std::size_t>(r_max_ + 1) +
               static_cast<std::size_t>(x.r);
    }

    SystemState state_at(std::size_t k) const {
        if (k >= size()) throw ModelError("state index out of range");
        const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), k);
        const auto pair = static_cast<int>(std::distance(offsets_.begin(), it) - 1);
        const int s = pair / n_;
        const int w = pair % n_;
        if (s == w) return {s, s, 0, 0};
        const auto local = k - offsets_[static_cast<std::size_t>(pair)];
        const auto width = static_cast<std::size_t>(r_max_ + 1);
        return {s, w, static_cast<int>(local / width) + 1, static_cast<int>(local % width)};
    }

private:
    std::size_t pair_block() const {
        return static_cast<std::size_t>(cap_) * static_cast<std::size_t>(r_max_ + 1);
    }

    int n_;
    int r_max_;
    int cap_;
    std::vector<std::size_t> offsets_;
};

inline StateSpace enumerate_states(const SourceChain& chain, const DecoderProfile& decoder,
                                   int delta_cap) {
    return StateSpace(chain, decoder, delta_cap);
}

} // namespace aoii
