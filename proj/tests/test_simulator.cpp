#include "aoii/renewal.hpp"
#include "aoii/simulator.hpp"
#include "aoii/solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace aoii;

namespace {

const DecoderProfile kDec = DecoderProfile::standard();

SimulationConfig config(std::int64_t horizon, std::uint64_t seed = 1) {
    SimulationConfig c;
    c.horizon = horizon;
    c.seed = seed;
    return c;
}

void expect_within_3se(const Estimate& e, double truth, const char* what) {
    EXPECT_LE(std::abs(e.mean - truth), 3.0 * e.se) << what << ": " << e.mean << " +- " << e.se << " vs " << truth;
}

} // namespace

TEST(Step, FrequenciesMatchKernel) {
    const auto chain = reference_source();
    const SystemState x{0, 1, 3, 0};
    RandomStream rng(17);
    const int samples = 1'000'000;
    std::map<SystemState, int> counts;
    for (int i = 0; i < samples; ++i) ++counts[step(x, Action::Transmit, chain, kDec, rng)];
    const auto dist = transition_distribution(x, Action::Transmit, chain, kDec);
    EXPECT_EQ(counts.size(), dist.size());
    for (const auto& t : dist) {
        const double expected = samples * t.probability;
        const double sd = std::sqrt(samples * t.probability * (1.0 - t.probability));
        EXPECT_LE(std::abs(counts[t.next] - expected), 4.0 * sd) << t.next;
    }
}

TEST(Step, WaitFromMatchingStateKeepsReceiver) {
    const auto chain = generate_random_source(5, 2);
    RandomStream rng(3);
    for (int i = 0; i < 10000; ++i) {
        const int s = i % 5;
        const SystemState y = step({s, s, 0, 0}, Action::Wait, chain, kDec, rng);
        EXPECT_EQ(y.w, s);
        EXPECT_EQ(y.r, 0);
    }
}

TEST(Run, DeterministicReplay) {
    auto trace = [](std::uint64_t seed) {
        std::ostringstream out;
        auto cfg = config(5000, seed);
        simulate_replication(SingleThresholdPolicy(3), reference_source(), kDec, cfg, 0,
                             [&](const TrajectoryRow& row) { write_trajectory_row(out, row); });
        return out.str();
    };
    EXPECT_EQ(trace(9), trace(9));
    EXPECT_NE(trace(9), trace(10));
}

TEST(Run, ReplicationStreamsDiffer) {
    auto cfg = config(20000);
    cfg.replications = 3;
    const auto res = run(SingleThresholdPolicy(2), reference_source(), kDec, cfg);
    ASSERT_EQ(res.replications.size(), 3u);
    EXPECT_NE(res.replications[0].aoii.mean, res.replications[1].aoii.mean);
}

TEST(Run, TwoStateNeverTransmitClosedForm) {
    const auto res = run(SingleThresholdPolicy::never_transmit(), oracle::two_state(0.25), DecoderProfile(1, 0.5, 0.5),
                         config(10'000'000, 5));
    expect_within_3se(res.aoii, oracle::two_state_never(0.25).avg_aoii, "aoii");
    EXPECT_EQ(res.rate.mean, 0.0);
}

TEST(Run, PeriodicRateExact) {
    for (int p : {3, 7, 10}) {
        const auto cfg = config(100'000);
        const auto res = run(PeriodicPolicy(p), reference_source(), kDec, cfg);
        const double slots = static_cast<double>(cfg.horizon - cfg.effective_burn_in());
        EXPECT_LE(std::abs(res.rate.mean - 1.0 / p), p / slots) << "period " << p;
    }
}

TEST(Run, PeriodicAoiiMatchesPhaseChainEvaluation) {
    const auto res = run(PeriodicPolicy(5), reference_source(), kDec, config(2'000'000, 4));
    expect_within_3se(res.aoii, evaluate_periodic(reference_source(), kDec, 5).avg_aoii, "aoii");
}

TEST(Run, ThresholdPoliciesMatchAnalyzer) {
    const auto chain = reference_source();
    const auto multi = rvi_threshold(TruncatedMDP(chain, kDec, 50), 8.0).thresholds;
    const std::vector<StationaryPolicy> policies{multi, SingleThresholdPolicy(1), SingleThresholdPolicy(4)};
    std::uint64_t seed = 100;
    for (const auto& p : policies) {
        const auto ev = std::visit([&](const auto& q) { return evaluate_policy(chain, kDec, q); }, p);
        const AnyPolicy any = std::visit([](const auto& q) -> AnyPolicy { return q; }, p);
        const auto res = run(any, chain, kDec, config(2'000'000, ++seed));
        expect_within_3se(res.aoii, ev.avg_aoii, "aoii");
        expect_within_3se(res.rate, ev.avg_rate, "rate");
        const auto& rep = res.replications.front();
        EXPECT_EQ(rep.cycle_identity_violations, 0);
        EXPECT_EQ(rep.recursion_violations, 0);
        EXPECT_FALSE(rep.few_cycles);
    }
}

TEST(Run, CycleRecordsSatisfyIdentity) {
    const auto res = run(SingleThresholdPolicy(3), generate_random_source(4, 6), kDec, config(200'000));
    const auto& rep = res.replications.front();
    ASSERT_GT(rep.cycles.size(), 1000u);
    EXPECT_EQ(static_cast<std::int64_t>(rep.cycles.size()), rep.n_cycles);
    for (const auto& c : rep.cycles) {
        EXPECT_EQ(2 * c.cum_aoii, c.length * c.length - c.length);
        EXPECT_LE(c.transmissions, c.length);
    }
    EXPECT_GE(res.rate.mean, 0.0);
    EXPECT_LE(res.rate.mean, 1.0);
}

TEST(Run, MixtureCycleFractionConvergesToRho) {
    const double rho = 0.3;
    const RandomizedMixturePolicy mix(SingleThresholdPolicy(2), SingleThresholdPolicy(6), rho);
    const auto res = run(mix, reference_source(), kDec, config(2'000'000, 8));
    const auto& rep = res.replications.front();
    ASSERT_TRUE(rep.mixture);
    const auto frac = rep.minus_fraction(rho);
    EXPECT_LE(std::abs(frac.mean - rho), 3.0 * frac.se);
    for (const auto& c : rep.cycles) EXPECT_EQ(2 * c.cum_aoii, c.length * c.length - c.length);
    const auto ev = evaluate_mixture(reference_source(), kDec, mix);
    expect_within_3se(res.aoii, ev.avg_aoii, "aoii");
    expect_within_3se(res.rate, ev.avg_rate, "rate");
}

TEST(Run, AllOnesThresholdRateIsMismatchFraction) {
    const auto chain = generate_random_source(5, 12);
    const auto ev = evaluate_policy(chain, kDec, SingleThresholdPolicy(1));
    std::int64_t mismatched = 0;
    std::int64_t total = 0;
    auto cfg = config(1'000'000, 77);
    simulate_replication(SingleThresholdPolicy(1), chain, kDec, cfg, 0, [&](const TrajectoryRow& row) {
        if (row.t < cfg.effective_burn_in()) return;
        ++total;
        mismatched += row.state.delta > 0;
    });
    const double p = static_cast<double>(mismatched) / static_cast<double>(total);
    const auto res = run(SingleThresholdPolicy(1), chain, kDec, cfg);
    EXPECT_DOUBLE_EQ(res.rate.mean, p);
    expect_within_3se(res.rate, ev.avg_rate, "rate");
}

TEST(Run, FewCyclesFlagged) {
    auto cfg = config(200);
    cfg.burn_in = 0;
    cfg.batches = 30;
    // from (1,1,0,0) the source leaves at once and returns only w.p. 0.01 per slot
    Eigen::MatrixXd p(2, 2);
    p << 0.01, 0.99, 0.01, 0.99;
    const auto res = run(SingleThresholdPolicy::never_transmit(), SourceChain(p), DecoderProfile(1, 0.5, 0.5), cfg);
    EXPECT_TRUE(res.few_cycles);
}

TEST(SimulationConfig, Validation) {
    auto cfg = config(1000);
    cfg.replications = 0;
    EXPECT_THROW(cfg.validate(), ModelError);
    cfg = config(1000);
    cfg.burn_in = 1000;
    EXPECT_THROW(cfg.validate(), ModelError);
    cfg = config(1000);
    cfg.batches = 10;
    EXPECT_THROW(cfg.validate(), ModelError);
    cfg = config(1000);
    cfg.initial = {0, 0, 3, 0};
    EXPECT_THROW(run(SingleThresholdPolicy(2), reference_source(), kDec, cfg), ModelError);
    EXPECT_EQ(config(1000).effective_burn_in(), 10);
}

TEST(Export, SchemaLinesAndRows) {
    std::ostringstream traj;
    write_trajectory_header(traj);
    write_trajectory_row(traj, {4, {0, 2, 3, 1}, Action::Transmit, 2});
    EXPECT_EQ(traj.str(), "# schema: aoii-trajectory/1 (t,s,w,delta,r,action,cycle_id)\n"
                          "t,s,w,delta,r,action,cycle_id\n4,1,3,3,1,1,2\n");
    auto cfg = config(10000);
    cfg.replications = 2;
    std::ostringstream stats;
    write_stats_csv(stats, run(SingleThresholdPolicy(2), reference_source(), kDec, cfg));
    const std::string s = stats.str();
    EXPECT_EQ(s.rfind("# schema: aoii-simstats/1", 0), 0u);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
    EXPECT_NE(s.find("\nall,"), std::string::npos);
}
