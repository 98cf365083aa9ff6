#include "aoii/renewal.hpp"
#include "aoii/solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace aoii;

namespace {

const SourceChain& reference() {
    static const SourceChain c = reference_source();
    return c;
}
const DecoderProfile kDec = DecoderProfile::standard();

int threshold_or_zero(const MultiThresholdPolicy& p, int s, int w, int r) {
    const Threshold t = p.threshold(s, w, r);
    return t.is_never() ? 0 : t.value();
}

void expect_regeneration_waits(const StationaryPolicy& p, int n) {
    for (int s = 0; s < n; ++s) EXPECT_EQ(action(p, {s, s, 0, 0}), Action::Wait);
}

} // namespace

TEST(RviThreshold, LambdaEightReferenceInstance) {
    const TruncatedMDP mdp(reference(), kDec, 50);
    const auto sol = rvi_threshold(mdp, 8.0);
    ASSERT_TRUE(sol.converged);
    EXPECT_FALSE(sol.saturated);
    EXPECT_GE(sol.gain, 0.0);
    const int expected[4][4] = {{0, 7, 11, 11}, {9, 0, 10, 7}, {1, 1, 0, 3}, {7, 4, 9, 0}};
    for (int s = 0; s < 4; ++s)
        for (int w = 0; w < 4; ++w) EXPECT_EQ(threshold_or_zero(sol.thresholds, s, w, 0), expected[s][w]) << s << w;
    const auto ev = evaluate_policy(reference(), kDec, sol.thresholds);
    EXPECT_NEAR(sol.gain, ev.avg_aoii + 8.0 * ev.avg_rate, 1e-7);
    EXPECT_NEAR(sol.gain, 3.15421, 1e-5);
}

TEST(RviThreshold, RegenerationStatesPreferWait) {
    for (double lambda : {0.0, 0.5, 8.0, 100.0}) {
        const TruncatedMDP mdp(reference(), kDec, 40);
        const auto sol = rvi_threshold(mdp, lambda);
        const auto q = action_values(mdp, sol.value, lambda);
        for (int s = 0; s < 4; ++s) {
            const auto& v = q[mdp.space().index_of({s, s, 0, 0})];
            EXPECT_LE(v[0], v[1]);
        }
        expect_regeneration_waits(sol.thresholds, 4);
    }
}

TEST(RviThreshold, HugePenaltyNeverTransmitsWithinCap) {
    const auto sol = rvi_threshold(TruncatedMDP(reference(), kDec, 50), 1e6);
    EXPECT_TRUE(sol.saturated);
    EXPECT_FALSE(sol.thresholds.n_max().has_value());
    for (int s = 0; s < 4; ++s)
        for (int w = 0; w < 4; ++w)
            for (int r = 0; r <= 2; ++r) EXPECT_TRUE(sol.thresholds.threshold(s, w, r).is_never());
}

TEST(RviThreshold, IterationLimitFlagsUnconverged) {
    const auto sol = rvi_threshold(TruncatedMDP(reference(), kDec, 50), 8.0, RviOptions{1e-9, 3});
    EXPECT_FALSE(sol.converged);
    EXPECT_EQ(sol.iterations, 3);
}

TEST(RviThreshold, AgreesWithKernelValueIteration) {
    for (const auto& chain : {reference(), generate_random_source(3, 21)}) {
        for (double lambda : {2.0, 8.0}) {
            const TruncatedMDP mdp(chain, kDec, 25);
            const auto fast = rvi_threshold(mdp, lambda, RviOptions{1e-11, 100000});
            const auto slow = oracle::slow_rvi(chain, kDec, 25, lambda, 1e-11);
            EXPECT_NEAR(fast.gain, slow.gain, 1e-8);
            const auto& sp = mdp.space();
            for (int s = 0; s < chain.n_states(); ++s)
                for (int w = 0; w < chain.n_states(); ++w) {
                    if (s == w) continue;
                    for (int r = 0; r <= 2; ++r)
                        EXPECT_EQ(threshold_or_zero(fast.thresholds, s, w, r),
                                  oracle::first_transmit(sp, slow.greedy, s, w, r));
                }
        }
    }
}

TEST(RviPlain, AgreesWithKernelValueIteration) {
    const auto chain = generate_random_source(3, 8);
    const TruncatedMDP mdp(chain, kDec, 20);
    const auto fast = rvi_plain(mdp, 4.0, RviOptions{1e-11, 100000});
    const auto slow = oracle::slow_rvi(chain, kDec, 20, 4.0, 1e-11);
    EXPECT_NEAR(fast.gain, slow.gain, 1e-8);
    EXPECT_EQ(fast.greedy.actions(), slow.greedy);
}

TEST(RviPlain, MatchesThresholdSolverOnReferenceInstance) {
    for (double lambda : {1.0, 8.0, 32.0}) {
        const TruncatedMDP mdp(reference(), kDec, 50);
        const RviOptions opts;
        const auto thr = rvi_threshold(mdp, lambda, opts);
        const auto plain = rvi_plain(mdp, lambda, opts);
        ASSERT_TRUE(thr.converged && plain.converged);
        EXPECT_NEAR(thr.gain, plain.gain, 10 * opts.tol) << "lambda " << lambda;
        for (std::size_t k = 0; k < mdp.space().size(); ++k) {
            const SystemState x = mdp.space().state_at(k);
            ASSERT_EQ(thr.thresholds.action(x), plain.greedy.action(x)) << x << " lambda " << lambda;
        }
        expect_regeneration_waits(plain.greedy, 4);
    }
}

TEST(RviPlain, GreedyMonotonicityIsReported) {
    // a non-monotone slice would be a finding about the threshold assumption, not a solver error
    const auto plain = rvi_plain(TruncatedMDP(reference(), kDec, 50), 8.0);
    const int violations = monotonicity_violations(plain.greedy);
    RecordProperty("monotonicity_violations", violations);
    if (violations == 0) {
        const auto form = threshold_form(plain.greedy);
        ASSERT_TRUE(form.has_value());
    } else {
        EXPECT_FALSE(threshold_form(plain.greedy).has_value());
    }
}

TEST(ThresholdForm, DetectsNonMonotoneSlices) {
    const StateSpace sp(2, 0, 4);
    std::vector<Action> acts(sp.size(), Action::Wait);
    acts[sp.index_of({0, 1, 2, 0})] = Action::Transmit;
    for (int d = 3; d <= 4; ++d) acts[sp.index_of({1, 0, d, 0})] = Action::Transmit;
    const TabularPolicy bad(sp, acts);
    EXPECT_EQ(monotonicity_violations(bad), 1);
    EXPECT_FALSE(threshold_form(bad).has_value());
    acts[sp.index_of({0, 1, 2, 0})] = Action::Wait;
    const auto form = threshold_form(TabularPolicy(sp, acts));
    ASSERT_TRUE(form.has_value());
    EXPECT_TRUE(form->threshold(0, 1, 0).is_never());
    EXPECT_EQ(form->threshold(1, 0, 0).value(), 3);
}

TEST(ExtendValues, KeepsOverlapAndExtrapolates) {
    const StateSpace small(2, 0, 3);
    const StateSpace big(2, 0, 6);
    std::vector<double> v(small.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 2.0 * small.state_at(k).delta + small.state_at(k).s;
    const auto out = extend_values(small, v, big);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const SystemState x = big.state_at(k);
        EXPECT_DOUBLE_EQ(out[k], 2.0 * x.delta + x.s);
    }
}

TEST(DeltaCapSelection, CapExceedsThresholdsAndIsStable) {
    for (std::uint64_t seed : {1u, 2u}) {
        const auto chain = generate_random_source(4, seed);
        const auto sel = delta_cap_selection(chain, kDec, 6.0, 1e-6);
        EXPECT_GE(sel.delta_cap, kInitialDeltaCap);
        EXPECT_LT(sel.solution.thresholds.n_max().value_or(0), sel.delta_cap);
        ASSERT_GE(sel.gains.size(), 2u);
        const double g = sel.gains[sel.gains.size() - 2].second;
        EXPECT_LT(std::abs(sel.gains.back().second - g), 1e-6 * std::max(1.0, g));
        const auto doubled = rvi_threshold(TruncatedMDP(chain, kDec, 2 * sel.delta_cap), 6.0);
        EXPECT_EQ(doubled.thresholds, sel.solution.thresholds);
    }
}

TEST(DeltaCapSelection, RejectsNonPositiveEpsilon) {
    EXPECT_THROW(delta_cap_selection(reference(), kDec, 6.0, 0.0), ContractError);
}

TEST(LambdaBisection, ReferenceInstanceRateTwoTenths) {
    const double target = 0.2;
    const auto res = lambda_bisection(reference(), kDec, target);
    const auto& tr = res.trace;
    EXPECT_LE(tr.rate_plus, target);
    EXPECT_GE(tr.rate_minus, target);
    EXPECT_LT(tr.lambda_plus - tr.lambda_minus, 1e-6 * std::max(1.0, tr.lambda_plus));
    EXPECT_NEAR(tr.lambda_minus, 4.15873, 1e-4);
    EXPECT_TRUE(tr.rate_monotone);
    ASSERT_GT(tr.rho, 0.0);
    ASSERT_LT(tr.rho, 1.0);
    EXPECT_NEAR(res.evaluation.avg_rate, target, 1e-9);
    EXPECT_NEAR(evaluate_mixture(reference(), kDec, res.mixture).avg_rate, target, 1e-9);
    EXPECT_NEAR(res.evaluation.avg_aoii, 1.84401, 1e-4);
    for (const auto& step : tr.steps) EXPECT_LE(step.lower, step.upper);
    expect_regeneration_waits(res.mixture.minus(), 4);
    expect_regeneration_waits(res.mixture.plus(), 4);
}

TEST(LambdaBisection, RelaxedConstraintNeverHurts) {
    const auto loose = lambda_bisection(reference(), kDec, 1.0);
    EXPECT_LT(loose.trace.lambda_plus, 1e-5);
    EXPECT_LE(loose.evaluation.avg_rate, 1.0);
    for (double r : {0.3, 0.5}) EXPECT_LE(loose.evaluation.avg_aoii, lambda_bisection(reference(), kDec, r).evaluation.avg_aoii + 1e-12);
}

TEST(LambdaBisection, ZeroRateReturnsNeverTransmit) {
    const auto res = lambda_bisection(reference(), kDec, 0.0);
    EXPECT_FALSE(res.trace.warnings.empty());
    EXPECT_EQ(res.evaluation.avg_rate, 0.0);
    EXPECT_THROW(lambda_bisection(reference(), kDec, 1.5), ModelError);
    EXPECT_THROW(lambda_bisection(reference(), kDec, -0.1), ModelError);
}

TEST(LambdaBisection, PlainSolverAgreesOnGain) {
    BisectionOptions opts;
    opts.delta_cap = 40;
    const auto thr = lambda_bisection(reference(), kDec, 0.25, opts);
    opts.solver = SolverKind::Plain;
    const auto plain = lambda_bisection(reference(), kDec, 0.25, opts);
    EXPECT_NEAR(thr.evaluation.avg_aoii, plain.evaluation.avg_aoii, 1e-6);
    EXPECT_NEAR(plain.evaluation.avg_rate, 0.25, 1e-9);
}

TEST(NBisection, ReferenceInstanceOneTenth) {
    const auto res = n_bisection(reference(), kDec, 0.1);
    EXPECT_NEAR(res.trace.lambda_plus, 8.0, 1.0);
    EXPECT_EQ(res.trace.lambda_plus - res.trace.lambda_minus, 1.0);
    EXPECT_LE(res.trace.rate_plus, 0.1);
    EXPECT_GE(res.trace.rate_minus, 0.1);
    EXPECT_NEAR(res.evaluation.avg_rate, 0.1, 1e-9);
}

TEST(NBisection, ReferenceInstanceTwoTenths) {
    const auto res = n_bisection(reference(), kDec, 0.2);
    EXPECT_EQ(res.trace.lambda_minus, 4.0);
    EXPECT_NEAR(res.trace.rho, 0.528956, 1e-5);
    EXPECT_NEAR(res.evaluation.avg_aoii, 2.01659, 1e-4);
    for (const auto& step : res.trace.steps) EXPECT_LE(step.lower, step.upper);
}

TEST(NBisection, RateNonIncreasingInThreshold) {
    for (const auto& chain : {reference(), generate_random_source(4, 3), generate_random_source(6, 4)}) {
        double prev = 2.0;
        for (int n = 1; n <= 30; ++n) {
            const double rate = evaluate_policy(chain, kDec, SingleThresholdPolicy(n)).avg_rate;
            EXPECT_LE(rate, prev + 1e-12) << "n=" << n;
            prev = rate;
        }
    }
}

TEST(NBisection, InvalidTargets) {
    EXPECT_THROW(n_bisection(reference(), kDec, 0.0), ModelError);
    EXPECT_THROW(n_bisection(reference(), kDec, 1.1), ModelError);
}
