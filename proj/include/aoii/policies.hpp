#pragma once

// Transmission policies: threshold classes F(S,W,r) and F(1), capped
// tabular policies, the periodic baseline and two-component mixtures.

#include "aoii/errors.hpp"
#include "aoii/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace aoii {

/// AoII threshold; either a positive slot count or "never".
class Threshold {
public:
    Threshold() = default;

    static Threshold never() { return Threshold(); }
    static Threshold at(int n) {
        if (n < 1) throw ModelError("thresholds must be >= 1");
        Threshold t;
        t.n_ = n;
        return t;
    }

    bool is_never() const { return !n_.has_value(); }
    int value() const {
        if (!n_) throw ContractError("threshold is 'never'");
        return *n_;
    }
    bool triggers(int delta) const { return n_ && delta >= *n_; }

    friend bool operator==(const Threshold&, const Threshold&) = default;

private:
    std::optional<int> n_;
};

/// F(S,W,r): transmit iff delta >= n(s, w, r). Diagonal entries are "never".
class MultiThresholdPolicy {
public:
    MultiThresholdPolicy(int n_states, int r_max, int fill)
        : n_(n_states), r_max_(r_max),
          table_(static_cast<std::size_t>(n_states * n_states * (r_max + 1)), Threshold::at(fill)) {
        for (int s = 0; s < n_; ++s)
            for (int r = 0; r <= r_max_; ++r) table_[slot(s, s, r)] = Threshold::never();
    }

    int n_states() const { return n_; }
    int r_max() const { return r_max_; }

    Threshold threshold(int s, int w, int r) const {
        check_bounds(s, w, r);
        return table_[slot(s, w, r)];
    }

    void set(int s, int w, int r, Threshold t) {
        check_bounds(s, w, r);
        if (s == w) throw ContractError("diagonal thresholds are fixed to 'never'");
        table_[slot(s, w, r)] = t;
    }

    /// Largest finite threshold, if any.
    std::optional<int> n_max() const {
        std::optional<int> best;
        for (const auto& t : table_)
            if (!t.is_never()) best = std::max(best.value_or(0), t.value());
        return best;
    }

    /// AoII level above which the action no longer depends on delta.
    int aoii_cap() const { return std::max(1, n_max().value_or(1)); }

    Action action(const SystemState& x) const {
        check_bounds(x.s, x.w, x.r);
        return table_[slot(x.s, x.w, x.r)].triggers(x.delta) ? Action::Transmit : Action::Wait;
    }

    friend bool operator==(const MultiThresholdPolicy&, const MultiThresholdPolicy&) = default;

private:
    std::size_t slot(int s, int w, int r) const {
        return static_cast<std::size_t>((s * n_ + w) * (r_max_ + 1) + r);
    }
    void check_bounds(int s, int w, int r) const {
        if (s < 0 || s >= n_ || w < 0 || w >= n_ || r < 0 || r > r_max_)
            throw std::out_of_range("state outside the threshold table");
    }

    int n_;
    int r_max_;
    std::vector<Threshold> table_;
};

/// F(1): transmit iff delta >= n.
class SingleThresholdPolicy {
public:
    explicit SingleThresholdPolicy(Threshold n) : n_(n) {}
    explicit SingleThresholdPolicy(int n) : n_(Threshold::at(n)) {}

    static SingleThresholdPolicy never_transmit() { return SingleThresholdPolicy(Threshold::never()); }

    Threshold threshold() const { return n_; }
    int aoii_cap() const { return n_.is_never() ? 1 : n_.value(); }

    Action action(const SystemState& x) const {
        return n_.triggers(x.delta) ? Action::Transmit : Action::Wait;
    }

    friend bool operator==(const SingleThresholdPolicy&, const SingleThresholdPolicy&) = default;

private:
    Threshold n_;
};

/**
 * Arbitrary deterministic policy over the AoII-capped state space; states
 * with delta above the cap use the action stored at the cap. Produced by the
 * structure-free value iteration.
 */
class TabularPolicy {
public:
    TabularPolicy(StateSpace space, std::vector<Action> actions)
        : space_(std::move(space)), actions_(std::move(actions)) {
        if (actions_.size() != space_.size())
            throw ModelError("tabular policy size does not match its state space");
    }

    const StateSpace& space() const { return space_; }
    const std::vector<Action>& actions() const { return actions_; }
    int aoii_cap() const { return space_.delta_cap(); }

    Action action(const SystemState& x) const {
        SystemState capped = x;
        capped.delta = std::min(x.delta, space_.delta_cap());
        if (!space_.contains(capped)) throw std::out_of_range("state outside the tabular policy");
        return actions_[space_.index_of(capped)];
    }

    friend bool operator==(const TabularPolicy& a, const TabularPolicy& b) {
        return a.space_.n_states() == b.space_.n_states() && a.space_.r_max() == b.space_.r_max() &&
               a.space_.delta_cap() == b.space_.delta_cap() && a.actions_ == b.actions_;
    }

private:
    StateSpace space_;
    std::vector<Action> actions_;
};

using StationaryPolicy = std::variant<MultiThresholdPolicy, SingleThresholdPolicy, TabularPolicy>;

inline Action action(const StationaryPolicy& policy, const SystemState& x) {
    return std::visit([&](const auto& p) { return p.action(x); }, policy);
}

inline int aoii_cap(const StationaryPolicy& policy) {
    return std::visit([](const auto& p) { return p.aoii_cap(); }, policy);
}

template <typename Policy>
int aoii_cap_of(const Policy& p) {
    return p.aoii_cap();
}
inline int aoii_cap_of(const StationaryPolicy& p) { return aoii_cap(p); }

template <typename Policy>
Action policy_action(const Policy& p, const SystemState& x) {
    return p.action(x);
}
inline Action policy_action(const StationaryPolicy& p, const SystemState& x) { return action(p, x); }

/// Transmits every `period` slots, starting at the first slot.
class PeriodicPolicy {
public:
    explicit PeriodicPolicy(int period, int phase = 0) : period_(period), phase_(phase) {
        if (period < 1) throw ModelError("period must be >= 1");
        if (phase < 0 || phase >= period) throw ModelError("phase must lie in [0, period)");
    }

    /// Period ceil(1/R).
    static PeriodicPolicy for_rate(double rate) {
        if (!(rate > 0.0 && rate <= 1.0)) throw ModelError("rate must lie in (0,1]");
        return PeriodicPolicy(static_cast<int>(std::ceil(1.0 / rate - 1e-9)));
    }

    int period() const { return period_; }
    int phase() const { return phase_; }

    /// Action for the current slot; advances the phase.
    Action action(const SystemState&) {
        const Action a = phase_ == 0 ? Action::Transmit : Action::Wait;
        phase_ = (phase_ + 1) % period_;
        return a;
    }

    friend bool operator==(const PeriodicPolicy&, const PeriodicPolicy&) = default;

private:
    int period_;
    int phase_;
};

enum class MixtureComponent { Minus, Plus };

/**
 * Randomizes between two stationary policies at every visit to the
 * regeneration set: the minus component with probability rho.
 */
class RandomizedMixturePolicy {
public:
    RandomizedMixturePolicy(StationaryPolicy minus, StationaryPolicy plus, double rho)
        : minus_(std::move(minus)), plus_(std::move(plus)), rho_(rho) {
        if (!(rho >= 0.0 && rho <= 1.0)) throw ModelError("rho must lie in [0,1]");
    }

    const StationaryPolicy& minus() const { return minus_; }
    const StationaryPolicy& plus() const { return plus_; }
    double rho() const { return rho_; }
    MixtureComponent active() const { return active_; }

    MixtureComponent resample(const SystemState& x, double uniform_draw) {
        if (!x.in_regeneration_set())
            throw ContractError("mixture resampled outside the regeneration set");
        if (!(uniform_draw >= 0.0 && uniform_draw < 1.0))
            throw ContractError("uniform draw must lie in [0,1)");
        active_ = uniform_draw < rho_ ? MixtureComponent::Minus : MixtureComponent::Plus;
        return active_;
    }

    Action action(const SystemState& x) const {
        return aoii::action(active_ == MixtureComponent::Minus ? minus_ : plus_, x);
    }

    friend bool operator==(const RandomizedMixturePolicy& a, const RandomizedMixturePolicy& b) {
        return a.minus_ == b.minus_ && a.plus_ == b.plus_ && a.rho_ == b.rho_;
    }

private:
    StationaryPolicy minus_;
    StationaryPolicy plus_;
    double rho_;
    MixtureComponent active_ = MixtureComponent::Minus;
};

/**
 * Mixing weight of the minus component that interpolates the two rates to
 * the target, (R - rate_plus) / (rate_minus - rate_plus), clamped to [0,1].
 * Equal rates return 1.
 */
inline double mixing_probability(double rate_minus, double rate_plus, double target) {
    if (rate_plus > target || rate_minus < target)
        throw InfeasibleError("target rate is not bracketed by the component rates");
    if (rate_minus == rate_plus) return 1.0;
    return std::clamp((target - rate_plus) / (rate_minus - rate_plus), 0.0, 1.0);
}

using AnyPolicy =
    std::variant<MultiThresholdPolicy, SingleThresholdPolicy, TabularPolicy, PeriodicPolicy,
                 RandomizedMixturePolicy>;

} // namespace aoii
