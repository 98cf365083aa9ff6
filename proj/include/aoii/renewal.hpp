#pragma once

// Exact long-run AoII and transmission rate of AoII-capped stationary
// policies through the absorbing-chain view of regeneration cycles.
//
// A cycle starts in a regeneration state (z, z, 0, 0) and ends at the next
// slot in which source and receiver agree. Under a policy whose action stops
// depending on the AoII above some level K, the AoII can be truncated to
// min(delta, K) without changing any cycle statistic. Transient states then
// fall into layers by truncated AoII: layer 0 holds the regeneration states,
// layer k in [1, K] the mismatch states (s, w, r) with truncated AoII k.
// Every transient transition moves from layer k to k + 1, except in layer K
// which loops onto itself, so (I - Q) is block bidiagonal with a single
// dense block (I - Q_KK) to factorize.

#include "aoii/errors.hpp"
#include "aoii/model.hpp"
#include "aoii/policies.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace aoii {

class AbsorbingModel;

template <typename Policy>
AbsorbingModel build_absorbing_model(const SourceChain& chain, const DecoderProfile& decoder,
                                     const Policy& policy, int cap = 0);

class AbsorbingModel {
public:
    using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    AbsorbingModel(int n_states, int r_max, int cap) : n_(n_states), r_max_(r_max), cap_(cap) {
        if (cap < 1) throw ModelError("AoII truncation cap must be >= 1");
        steps_.resize(static_cast<std::size_t>(cap_));
        exits_.resize(static_cast<std::size_t>(cap_ + 1));
        transmit_.resize(static_cast<std::size_t>(cap_ + 1));
    }

    int n_states() const { return n_; }
    int r_max() const { return r_max_; }
    int cap() const { return cap_; }

    Eigen::Index layer_size(int k) const {
        return k == 0 ? n_ : static_cast<Eigen::Index>(n_) * (n_ - 1) * (r_max_ + 1);
    }
    Eigen::Index offset(int k) const { return k == 0 ? 0 : n_ + (k - 1) * layer_size(1); }
    Eigen::Index size() const { return offset(cap_) + layer_size(cap_); }

    /// Index of (s, w, r) inside a mismatch layer.
    Eigen::Index local_index(int s, int w, int r) const {
        const int w_rank = w < s ? w : w - 1;
        return (static_cast<Eigen::Index>(s) * (n_ - 1) + w_rank) * (r_max_ + 1) + r;
    }

    SystemState local_state(int k, Eigen::Index i) const {
        if (k == 0) return {static_cast<int>(i), static_cast<int>(i), 0, 0};
        const int r = static_cast<int>(i % (r_max_ + 1));
        const auto pair = i / (r_max_ + 1);
        const int s = static_cast<int>(pair / (n_ - 1));
        int w = static_cast<int>(pair % (n_ - 1));
        if (w >= s) ++w;
        return {s, w, k, r};
    }

    /// Global transient index of a state; delta is truncated to the cap.
    Eigen::Index index_of(const SystemState& x) const {
        if (x.s == x.w) return x.s;
        const int k = std::min(x.delta, cap_);
        return offset(k) + local_index(x.s, x.w, x.r);
    }

    SystemState state_at(Eigen::Index h) const {
        if (h < n_) return local_state(0, h);
        const auto k = static_cast<int>((h - n_) / layer_size(1)) + 1;
        return local_state(k, h - offset(k));
    }

    /// Transient transitions from layer k to layer k + 1 (k < cap).
    const SparseRows& step(int k) const { return steps_[static_cast<std::size_t>(k)]; }
    /// Transient transitions inside the cap layer.
    const SparseRows& loop() const { return loop_; }
    /// Absorption of layer k into regeneration value z.
    const SparseRows& exit(int k) const { return exits_[static_cast<std::size_t>(k)]; }
    /// 1.0 where the policy transmits, per state of layer k.
    const Eigen::VectorXd& transmits(int k) const { return transmit_[static_cast<std::size_t>(k)]; }

    /// Solves (I - Q) x = b.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        Eigen::VectorXd x(size());
        x.segment(offset(cap_), layer_size(cap_)) = cap_lu_.solve(b.segment(offset(cap_), layer_size(cap_)));
        for (int k = cap_ - 1; k >= 0; --k) {
            x.segment(offset(k), layer_size(k)) =
                b.segment(offset(k), layer_size(k)) +
                step(k) * x.segment(offset(k + 1), layer_size(k + 1));
        }
        return x;
    }

    /// Q x.
    Eigen::VectorXd apply_q(const Eigen::VectorXd& x) const {
        Eigen::VectorXd y(size());
        for (int k = 0; k < cap_; ++k)
            y.segment(offset(k), layer_size(k)) = step(k) * x.segment(offset(k + 1), layer_size(k + 1));
        y.segment(offset(cap_), layer_size(cap_)) = loop_ * x.segment(offset(cap_), layer_size(cap_));
        return y;
    }

    /**
     * Rows of the fundamental matrix (I - Q)^-1 for the given weights on the
     * regeneration layer, delivered layer by layer as visit(k, rows_k).
     */
    template <typename Visitor>
    void propagate_rows(const Eigen::MatrixXd& start, Visitor&& visit) const {
        Eigen::MatrixXd rows = start;
        visit(0, static_cast<const Eigen::MatrixXd&>(rows));
        for (int k = 1; k <= cap_; ++k) {
            Eigen::MatrixXd next = rows * step(k - 1);
            if (k == cap_) next = cap_lu_t_.solve(next.transpose()).transpose();
            rows = std::move(next);
            visit(k, static_cast<const Eigen::MatrixXd&>(rows));
        }
    }

    /// Full Q and U, for inspection and tests.
    SparseRows assemble_q() const {
        std::vector<Eigen::Triplet<double>> t;
        for (int k = 0; k <= cap_; ++k) {
            const SparseRows& block = k < cap_ ? step(k) : loop_;
            const auto to = k < cap_ ? offset(k + 1) : offset(cap_);
            for (Eigen::Index i = 0; i < block.outerSize(); ++i)
                for (SparseRows::InnerIterator it(block, i); it; ++it)
                    t.emplace_back(offset(k) + i, to + it.col(), it.value());
        }
        SparseRows q(size(), size());
        q.setFromTriplets(t.begin(), t.end());
        return q;
    }

    SparseRows assemble_u() const {
        std::vector<Eigen::Triplet<double>> t;
        for (int k = 0; k <= cap_; ++k)
            for (Eigen::Index i = 0; i < exit(k).outerSize(); ++i)
                for (SparseRows::InnerIterator it(exit(k), i); it; ++it)
                    t.emplace_back(offset(k) + i, it.col(), it.value());
        SparseRows u(size(), n_);
        u.setFromTriplets(t.begin(), t.end());
        return u;
    }

    template <typename Policy>
    friend AbsorbingModel build_absorbing_model(const SourceChain&, const DecoderProfile&,
                                                const Policy&, int);

private:
    void factorize() {
        Eigen::MatrixXd a = -Eigen::MatrixXd(loop_);
        a.diagonal().array() += 1.0;
        cap_lu_.compute(a);
        cap_lu_t_.compute(a.transpose());
        const double rcond = cap_lu_.rcond();
        if (!(rcond > 1e-13)) {
            std::ostringstream msg;
            msg << "I - Q is numerically singular on the AoII cap layer (cap " << cap_
                << ", reciprocal condition " << rcond << ")";
            throw NumericalError(msg.str());
        }
    }

    int n_;
    int r_max_;
    int cap_;
    std::vector<SparseRows> steps_;
    SparseRows loop_;
    std::vector<SparseRows> exits_;
    std::vector<Eigen::VectorXd> transmit_;
    Eigen::PartialPivLU<Eigen::MatrixXd> cap_lu_;
    Eigen::PartialPivLU<Eigen::MatrixXd> cap_lu_t_;
};

/**
 * Absorbing chain of the policy's regeneration cycles. `cap` defaults to
 * the policy's own AoII cap (n_max for threshold policies); larger values
 * pad the truncation.
 */
template <typename Policy>
AbsorbingModel build_absorbing_model(const SourceChain& chain, const DecoderProfile& decoder,
                                     const Policy& policy, int cap) {
    const int own_cap = aoii_cap_of(policy);
    if (cap == 0) cap = own_cap;
    if (cap < own_cap) throw ContractError("truncation below the policy's AoII cap is lossy");

    const int n = chain.n_states();
    AbsorbingModel model(n, decoder.r_max(), cap);
    std::vector<Eigen::Triplet<double>> moves;
    std::vector<Eigen::Triplet<double>> exits;

    for (int k = 0; k <= cap; ++k) {
        const auto rows = model.layer_size(k);
        const auto cols = model.layer_size(k < cap ? k + 1 : cap);
        Eigen::VectorXd transmit = Eigen::VectorXd::Zero(rows);
        moves.clear();
        exits.clear();
        for (Eigen::Index i = 0; i < rows; ++i) {
            const SystemState x = model.local_state(k, i);
            const Action a = policy_action(policy, x);
            if (a == Action::Transmit) transmit(i) = 1.0;
            for_each_successor(chain, decoder, x, a, [&](const SystemState& next, double p) {
                if (next.delta == 0)
                    exits.emplace_back(i, next.s, p);
                else
                    moves.emplace_back(i, model.local_index(next.s, next.w, next.r), p);
            });
        }
        AbsorbingModel::SparseRows move(rows, cols);
        move.setFromTriplets(moves.begin(), moves.end());
        AbsorbingModel::SparseRows exit(rows, n);
        exit.setFromTriplets(exits.begin(), exits.end());
        if (k < cap)
            model.steps_[static_cast<std::size_t>(k)] = std::move(move);
        else
            model.loop_ = std::move(move);
        model.exits_[static_cast<std::size_t>(k)] = std::move(exit);
        model.transmit_[static_cast<std::size_t>(k)] = std::move(transmit);
    }
    model.factorize();
    return model;
}

struct CycleMoments {
    Eigen::VectorXd m; ///< expected absorption time per transient state
    Eigen::VectorXd u; ///< expected squared absorption time
};

/// m = (I-Q)^-1 1 and u = (I-Q)^-1 (1 + 2 Q m), as two solves.
inline CycleMoments cycle_moments(const AbsorbingModel& model) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.size());
    CycleMoments out;
    out.m = model.solve(ones);
    out.u = model.solve(ones + 2.0 * model.apply_q(out.m));
    if (!out.m.allFinite() || !out.u.allFinite()) throw NumericalError("non-finite cycle moments");
    return out;
}

struct CycleStatistics {
    Eigen::VectorXd expected_length;        ///< E_z[L]
    Eigen::VectorXd expected_cum_aoii;      ///< E_z[J]
    Eigen::VectorXd expected_transmissions; ///< E_z[C]
    Eigen::MatrixXd embedded_transition;    ///< P^Z
    Eigen::VectorXd embedded_stationary;    ///< pi
};

/**
 * Stationary law of a finite chain.
 *
 * With a single closed class the law is unique and is found by a direct
 * solve with one balance equation replaced by normalization. With several
 * closed classes the long-run law depends on the start; it is the mixture
 * of the class laws weighted by absorption probabilities from `start`.
 */
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p, int start = 0) {
    const auto n = p.rows();
    std::vector<std::vector<char>> reach(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
        for (Eigen::Index j = 0; j < n; ++j)
            if (p(i, j) > 0.0) reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
    }
    for (Eigen::Index m = 0; m < n; ++m)
        for (Eigen::Index i = 0; i < n; ++i)
            if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)])
                for (Eigen::Index j = 0; j < n; ++j)
                    if (reach[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)])
                        reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;

    // class label per closed state, -1 for transient states
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    std::vector<std::vector<Eigen::Index>> classes;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (label[static_cast<std::size_t>(i)] >= 0) continue;
        bool closed = true;
        for (Eigen::Index j = 0; j < n && closed; ++j)
            if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
                !reach[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
                closed = false;
        if (!closed) continue;
        std::vector<Eigen::Index> members;
        for (Eigen::Index j = 0; j < n; ++j)
            if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
                members.push_back(j);
                label[static_cast<std::size_t>(j)] = static_cast<int>(classes.size());
            }
        classes.push_back(std::move(members));
    }

    auto class_law = [&](const std::vector<Eigen::Index>& members) {
        const auto m = static_cast<Eigen::Index>(members.size());
        Eigen::MatrixXd a(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                a(j, i) = p(members[static_cast<std::size_t>(i)], members[static_cast<std::size_t>(j)]) - (i == j ? 1.0 : 0.0);
        a.row(m - 1).setOnes();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        b(m - 1) = 1.0;
        Eigen::VectorXd local = a.fullPivLu().solve(b);
        Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < m; ++i) pi(members[static_cast<std::size_t>(i)]) = local(i);
        return pi;
    };

    if (classes.size() == 1) return class_law(classes.front());
    if (label[static_cast<std::size_t>(start)] >= 0)
        return class_law(classes[static_cast<std::size_t>(label[static_cast<std::size_t>(start)])]);

    // absorption probabilities from the transient states into each class
    std::vector<Eigen::Index> transient;
    for (Eigen::Index i = 0; i < n; ++i)
        if (label[static_cast<std::size_t>(i)] < 0) transient.push_back(i);
    const auto t = static_cast<Eigen::Index>(transient.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(t, t);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(t, static_cast<Eigen::Index>(classes.size()));
    Eigen::Index start_row = 0;
    for (Eigen::Index i = 0; i < t; ++i) {
        const auto from = transient[static_cast<std::size_t>(i)];
        if (from == start) start_row = i;
        for (Eigen::Index j = 0; j < t; ++j) a(i, j) -= p(from, transient[static_cast<std::size_t>(j)]);
        for (Eigen::Index j = 0; j < n; ++j)
            if (label[static_cast<std::size_t>(j)] >= 0) b(i, label[static_cast<std::size_t>(j)]) += p(from, j);
    }
    const Eigen::MatrixXd absorb = a.fullPivLu().solve(b);
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < classes.size(); ++c)
        pi += absorb(start_row, static_cast<Eigen::Index>(c)) * class_law(classes[c]);
    return pi;
}

/// Per-regeneration-state cycle expectations and the embedded chain.
inline CycleStatistics cycle_statistics(const AbsorbingModel& model, int start_z = 0) {
    const int n = model.n_states();
    const CycleMoments mom = cycle_moments(model);

    CycleStatistics out;
    out.expected_length = mom.m.head(n);
    out.expected_cum_aoii = (mom.u.head(n) - mom.m.head(n)) / 2.0;
    out.expected_transmissions = Eigen::VectorXd::Zero(n);
    out.embedded_transition = Eigen::MatrixXd::Zero(n, n);

    model.propagate_rows(Eigen::MatrixXd::Identity(n, n), [&](int k, const Eigen::MatrixXd& visits) {
        out.expected_transmissions += visits * model.transmits(k);
        out.embedded_transition += visits * model.exit(k);
    });
    out.embedded_stationary = stationary_distribution(out.embedded_transition, start_z);
    return out;
}

struct PolicyEvaluation {
    double avg_aoii = 0.0;
    double avg_rate = 0.0;
    CycleStatistics cycle_stats;
};

namespace detail {

inline PolicyEvaluation renewal_ratios(CycleStatistics stats) {
    PolicyEvaluation out;
    const double denom = stats.embedded_stationary.dot(stats.expected_length);
    if (!(denom > 0.0)) throw NumericalError("non-positive mean cycle length");
    out.avg_aoii = stats.embedded_stationary.dot(stats.expected_cum_aoii) / denom;
    out.avg_rate = stats.embedded_stationary.dot(stats.expected_transmissions) / denom;
    out.cycle_stats = std::move(stats);
    return out;
}

} // namespace detail

/// Long-run average AoII and transmission rate of a stationary policy.
template <typename Policy>
PolicyEvaluation evaluate_policy(const SourceChain& chain, const DecoderProfile& decoder,
                                 const Policy& policy, int cap = 0) {
    return detail::renewal_ratios(cycle_statistics(build_absorbing_model(chain, decoder, policy, cap)));
}

/**
 * Mixture of two stationary policies resampled at every regeneration.
 * Cycle types follow the rho-mixed embedded chain; its stationary law
 * weights the per-state cycle expectations of both components.
 */
inline PolicyEvaluation evaluate_mixture(const CycleStatistics& minus, const CycleStatistics& plus,
                                         double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ModelError("rho must lie in [0,1]");
    const double q = 1.0 - rho;
    CycleStatistics mixed;
    mixed.expected_length = rho * minus.expected_length + q * plus.expected_length;
    mixed.expected_cum_aoii = rho * minus.expected_cum_aoii + q * plus.expected_cum_aoii;
    mixed.expected_transmissions = rho * minus.expected_transmissions + q * plus.expected_transmissions;
    mixed.embedded_transition = rho * minus.embedded_transition + q * plus.embedded_transition;
    mixed.embedded_stationary = stationary_distribution(mixed.embedded_transition);
    return detail::renewal_ratios(std::move(mixed));
}

inline PolicyEvaluation evaluate_mixture(const SourceChain& chain, const DecoderProfile& decoder,
                                         const RandomizedMixturePolicy& mixture) {
    const auto minus = evaluate_policy(chain, decoder, mixture.minus());
    const auto plus = evaluate_policy(chain, decoder, mixture.plus());
    return evaluate_mixture(minus.cycle_stats, plus.cycle_stats, mixture.rho());
}

/**
 * Mixing weight for which the exact mixture rate equals `target`.
 *
 * The renewal rate of the mixture is a ratio of rho-weighted cycle
 * expectations, so the linear interpolation of component rates is only a
 * first guess. Bisection on rho brings the exact rate to the target.
 */
inline double calibrate_mixing(const CycleStatistics& minus, const CycleStatistics& plus,
                               double rate_minus, double rate_plus, double target) {
    double rho = mixing_probability(rate_minus, rate_plus, target);
    if (rate_minus == rate_plus) return rho;
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (evaluate_mixture(minus, plus, mid).avg_rate < target)
            lo = mid;
        else
            hi = mid;
    }
    const double err_lo = std::abs(evaluate_mixture(minus, plus, lo).avg_rate - target);
    const double err_hi = std::abs(evaluate_mixture(minus, plus, hi).avg_rate - target);
    rho = err_lo <= err_hi ? lo : hi;
    return rho;
}

/// Exact average AoII of the periodic baseline over the phase-augmented chain.
struct PeriodicEvaluation {
    double avg_aoii = 0.0;
    double avg_rate = 0.0;
};

/**
 * The periodic schedule does not look at the AoII, so (s, w, r, phase) is a
 * finite Markov chain. With pi its stationary law and P_M the transition
 * matrix restricted to mismatch arrivals, x = E[delta; state] solves
 * x (I - P_M) = pi P_M, and the average AoII is sum(x).
 */
inline PeriodicEvaluation evaluate_periodic(const SourceChain& chain, const DecoderProfile& decoder,
                                            int period) {
    if (period < 1) throw ModelError("period must be >= 1");
    const StateSpace base(chain, decoder, 1);
    const auto per_phase = static_cast<Eigen::Index>(base.size());
    const Eigen::Index total = per_phase * period;
    auto index = [&](const SystemState& x, int phase) {
        SystemState c = x;
        c.delta = std::min(c.delta, 1);
        return phase * per_phase + static_cast<Eigen::Index>(base.index_of(c));
    };

    struct Edge {
        Eigen::Index to;
        double p;
        bool mismatch;
    };
    std::vector<std::vector<Edge>> edges(static_cast<std::size_t>(total));
    std::vector<char> seen(static_cast<std::size_t>(total), 0);
    std::vector<Eigen::Index> order;
    std::vector<Eigen::Index> stack{index(SystemState{0, 0, 0, 0}, 0)};
    seen[static_cast<std::size_t>(stack.back())] = 1;
    while (!stack.empty()) {
        const auto h = stack.back();
        stack.pop_back();
        order.push_back(h);
        const int phase = static_cast<int>(h / per_phase);
        const SystemState x = base.state_at(static_cast<std::size_t>(h % per_phase));
        const Action a = phase == 0 ? Action::Transmit : Action::Wait;
        for_each_successor(chain, decoder, x, a, [&](const SystemState& next, double p) {
            const auto to = index(next, (phase + 1) % period);
            edges[static_cast<std::size_t>(h)].push_back({to, p, next.delta > 0});
            if (!seen[static_cast<std::size_t>(to)]) {
                seen[static_cast<std::size_t>(to)] = 1;
                stack.push_back(to);
            }
        });
    }

    std::sort(order.begin(), order.end());
    const auto m = static_cast<Eigen::Index>(order.size());
    std::vector<Eigen::Index> local(static_cast<std::size_t>(total), -1);
    for (Eigen::Index i = 0; i < m; ++i) local[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;

    // pi (P - I) = 0 with the last balance equation replaced by sum(pi) = 1
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto h = order[static_cast<std::size_t>(i)];
        if (i != m - 1) t.emplace_back(i, i, -1.0);
        for (const Edge& e : edges[static_cast<std::size_t>(h)]) {
            const auto j = local[static_cast<std::size_t>(e.to)];
            if (j != m - 1) t.emplace_back(j, i, e.p);
        }
        t.emplace_back(m - 1, i, 1.0);
    }
    Eigen::SparseMatrix<double> balance(m, m);
    balance.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(balance);
    if (lu.info() != Eigen::Success) throw NumericalError("periodic stationary system is singular");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs(m - 1) = 1.0;
    const Eigen::VectorXd pi = lu.solve(rhs);

    // (I - P_M^T) x = P_M^T pi
    t.clear();
    Eigen::VectorXd flow = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        t.emplace_back(i, i, 1.0);
        for (const Edge& e : edges[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]) {
            if (!e.mismatch) continue;
            const auto j = local[static_cast<std::size_t>(e.to)];
            t.emplace_back(j, i, -e.p);
            flow(j) += e.p * pi(i);
        }
    }
    Eigen::SparseMatrix<double> accumulate(m, m);
    accumulate.setFromTriplets(t.begin(), t.end());
    lu.compute(accumulate);
    if (lu.info() != Eigen::Success) throw NumericalError("periodic AoII system is singular");
    const Eigen::VectorXd x = lu.solve(flow);

    PeriodicEvaluation out;
    out.avg_aoii = x.sum();
    for (Eigen::Index i = 0; i < m; ++i)
        if (order[static_cast<std::size_t>(i)] < per_phase) out.avg_rate += pi(i);
    return out;
}

} // namespace aoii
