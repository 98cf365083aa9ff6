#pragma once

// Monte-Carlo simulation of the slotted source / HARQ / feedback system.

#include "aoii/errors.hpp"
#include "aoii/model.hpp"
#include "aoii/policies.hpp"
#include "aoii/random.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace aoii {

/// Samples one successor by inverse CDF over the enumerated kernel.
inline SystemState step(const SystemState& x, Action a, const SourceChain& chain, const DecoderProfile& decoder,
                        RandomStream& rng) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::optional<SystemState> chosen;
    SystemState last = x;
    for_each_successor(chain, decoder, x, a, [&](const SystemState& next, double p) {
        cumulative += p;
        last = next;
        if (!chosen && u < cumulative) chosen = next;
    });
    // u can exceed a cumulative sum that rounds just below 1
    return chosen.value_or(last);
}

struct SimulationConfig {
    std::int64_t horizon = 1'000'000;
    std::int64_t burn_in = -1; ///< negative: 1% of the horizon
    std::uint64_t seed = 1;
    int replications = 1;
    int batches = 100;
    SystemState initial{0, 0, 0, 0};
    bool record_cycles = true;

    std::int64_t effective_burn_in() const { return burn_in < 0 ? horizon / 100 : burn_in; }

    void validate() const {
        if (replications < 1) throw ModelError("replications must be >= 1");
        if (batches < 30) throw ModelError("at least 30 batches are needed for batch-means errors");
        if (effective_burn_in() < 0 || horizon <= effective_burn_in())
            throw ModelError("horizon must exceed the burn-in");
        if (horizon - effective_burn_in() < batches) throw ModelError("horizon too short for the batch count");
    }
};

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

struct CycleRecord {
    std::int64_t length = 0;
    std::int64_t cum_aoii = 0;
    std::int64_t transmissions = 0;
    int start = 0; ///< source value at the cycle's regeneration state
    MixtureComponent component = MixtureComponent::Minus;
};

struct TrajectoryStats {
    Estimate aoii;
    Estimate rate;
    std::int64_t slots = 0; ///< slots after burn-in
    std::int64_t n_cycles = 0;
    std::vector<CycleRecord> cycles;
    bool few_cycles = false; ///< fewer than 30 complete cycles
    std::int64_t cycle_identity_violations = 0;
    std::int64_t recursion_violations = 0;
    std::int64_t minus_cycles = 0; ///< cycles run under the minus component of a mixture
    bool mixture = false;

    /// Fraction of cycles under the minus component, with its binomial standard error at rho.
    Estimate minus_fraction(double rho) const {
        if (n_cycles == 0) return {};
        const double n = static_cast<double>(n_cycles);
        return {static_cast<double>(minus_cycles) / n, std::sqrt(rho * (1.0 - rho) / n)};
    }
};

struct TrajectoryRow {
    std::int64_t t;
    SystemState state;
    Action action;
    std::int64_t cycle_id;
};

namespace detail {

inline Estimate batch_means(const std::vector<double>& sums, const std::vector<std::int64_t>& counts) {
    double total = 0.0;
    std::int64_t n = 0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
        total += sums[b];
        n += counts[b];
    }
    const double mean = total / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
        const double m = sums[b] / static_cast<double>(counts[b]) - mean;
        ss += m * m;
    }
    const double k = static_cast<double>(sums.size());
    return {mean, std::sqrt(ss / (k - 1.0) / k)};
}

} // namespace detail

/**
 * One replication. Mixtures resample their component at every slot spent
 * in the regeneration set, i.e. at every cycle start. `on_slot`, if set,
 * sees every slot including the burn-in.
 */
inline TrajectoryStats simulate_replication(AnyPolicy policy, const SourceChain& chain, const DecoderProfile& decoder,
                                            const SimulationConfig& cfg, std::uint64_t index,
                                            const std::function<void(const TrajectoryRow&)>& on_slot = {}) {
    cfg.validate();
    check_state(cfg.initial, chain.n_states(), decoder.r_max());
    RandomStream rng = RandomStream::for_replication(cfg.seed, index);
    const std::int64_t burn = cfg.effective_burn_in();
    const std::int64_t n = cfg.horizon - burn;
    const int n_batches = cfg.batches;

    std::vector<double> aoii_sum(static_cast<std::size_t>(n_batches), 0.0);
    std::vector<double> rate_sum(static_cast<std::size_t>(n_batches), 0.0);
    std::vector<std::int64_t> count(static_cast<std::size_t>(n_batches), 0);

    TrajectoryStats out;
    out.mixture = std::holds_alternative<RandomizedMixturePolicy>(policy);
    auto* mix = std::get_if<RandomizedMixturePolicy>(&policy);

    SystemState x = cfg.initial;
    int shadow_delta = x.delta; // AoII recomputed from the (s, w) trace alone
    bool in_cycle = false;
    CycleRecord current;
    std::int64_t cycle_id = 0;

    for (std::int64_t t = 0; t < cfg.horizon; ++t) {
        const bool counted = t >= burn;
        if (x.in_regeneration_set()) {
            if (mix) mix->resample(x, rng.uniform());
            if (in_cycle) {
                ++out.n_cycles;
                if (current.cum_aoii * 2 != current.length * current.length - current.length)
                    ++out.cycle_identity_violations;
                if (current.component == MixtureComponent::Minus && mix) ++out.minus_cycles;
                if (cfg.record_cycles) out.cycles.push_back(current);
            }
            ++cycle_id;
            in_cycle = counted;
            current = CycleRecord{0, 0, 0, x.s, mix ? mix->active() : MixtureComponent::Minus};
        }

        const Action a = std::visit([&](auto& p) { return p.action(x); }, policy);
        if (on_slot) on_slot({t, x, a, cycle_id});

        if (counted) {
            const auto b = static_cast<std::size_t>((t - burn) * n_batches / n);
            aoii_sum[b] += x.delta;
            rate_sum[b] += as_int(a);
            ++count[b];
        }
        if (in_cycle) {
            ++current.length;
            current.cum_aoii += x.delta;
            current.transmissions += as_int(a);
        }

        x = step(x, a, chain, decoder, rng);
        shadow_delta = x.s == x.w ? 0 : shadow_delta + 1;
        if (shadow_delta != x.delta) ++out.recursion_violations;
    }

    out.slots = n;
    out.aoii = detail::batch_means(aoii_sum, count);
    out.rate = detail::batch_means(rate_sum, count);
    out.few_cycles = out.n_cycles < 30;
    return out;
}

struct SimulationResult {
    std::vector<TrajectoryStats> replications;
    Estimate aoii; ///< mean of replication means
    Estimate rate;
    bool few_cycles = false;
};

/**
 * Runs cfg.replications independent replications, each on its own stream
 * (seed XOR replication index), and combines their estimates.
 */
inline SimulationResult run(const AnyPolicy& policy, const SourceChain& chain, const DecoderProfile& decoder,
                            const SimulationConfig& cfg) {
    cfg.validate();
    SimulationResult out;
    for (int i = 0; i < cfg.replications; ++i)
        out.replications.push_back(simulate_replication(policy, chain, decoder, cfg, static_cast<std::uint64_t>(i)));
    const double k = static_cast<double>(cfg.replications);
    double aoii_var = 0.0;
    double rate_var = 0.0;
    for (const auto& r : out.replications) {
        out.aoii.mean += r.aoii.mean / k;
        out.rate.mean += r.rate.mean / k;
        aoii_var += r.aoii.se * r.aoii.se;
        rate_var += r.rate.se * r.rate.se;
        out.few_cycles = out.few_cycles || r.few_cycles;
    }
    out.aoii.se = std::sqrt(aoii_var) / k;
    out.rate.se = std::sqrt(rate_var) / k;
    return out;
}

/// Trajectory CSV header; s and w are written 1-based.
inline void write_trajectory_header(std::ostream& out) {
    out << "# schema: aoii-trajectory/1 (t,s,w,delta,r,action,cycle_id)\n"
        << "t,s,w,delta,r,action,cycle_id\n";
}

inline void write_trajectory_row(std::ostream& out, const TrajectoryRow& row) {
    out << row.t << ',' << row.state.s + 1 << ',' << row.state.w + 1 << ',' << row.state.delta << ','
        << row.state.r << ',' << as_int(row.action) << ',' << row.cycle_id << '\n';
}

/// One row per replication followed by an aggregate row.
inline void write_stats_csv(std::ostream& out, const SimulationResult& result) {
    out << "# schema: aoii-simstats/1 "
           "(replication,slots,cycles,mean_aoii,se_aoii,mean_rate,se_rate,few_cycles)\n"
        << "replication,slots,cycles,mean_aoii,se_aoii,mean_rate,se_rate,few_cycles\n";
    char buf[256];
    std::int64_t slots = 0;
    std::int64_t cycles = 0;
    for (std::size_t i = 0; i < result.replications.size(); ++i) {
        const auto& r = result.replications[i];
        std::snprintf(buf, sizeof buf, "%zu,%lld,%lld,%.12g,%.12g,%.12g,%.12g,%d\n", i,
                      static_cast<long long>(r.slots), static_cast<long long>(r.n_cycles), r.aoii.mean, r.aoii.se,
                      r.rate.mean, r.rate.se, r.few_cycles ? 1 : 0);
        out << buf;
        slots += r.slots;
        cycles += r.n_cycles;
    }
    std::snprintf(buf, sizeof buf, "all,%lld,%lld,%.12g,%.12g,%.12g,%.12g,%d\n", static_cast<long long>(slots),
                  static_cast<long long>(cycles), result.aoii.mean, result.aoii.se, result.rate.mean, result.rate.se,
                  result.few_cycles ? 1 : 0);
    out << buf;
}

} // namespace aoii
