#include "aoii/policies.hpp"
#include "aoii/policy_io.hpp"

#include <gtest/gtest.h>

using namespace aoii;

namespace {

MultiThresholdPolicy sample_multi() {
    MultiThresholdPolicy p(3, 2, 4);
    p.set(0, 1, 0, Threshold::at(6));
    p.set(2, 0, 1, Threshold::never());
    p.set(1, 2, 2, Threshold::at(1));
    return p;
}

} // namespace

TEST(Threshold, BoundaryInclusive) {
    MultiThresholdPolicy p(4, 2, 3);
    p.set(0, 1, 0, Threshold::at(6));
    EXPECT_EQ(p.action({0, 1, 5, 0}), Action::Wait);
    EXPECT_EQ(p.action({0, 1, 6, 0}), Action::Transmit);
    EXPECT_EQ(p.action({0, 1, 60, 0}), Action::Transmit);
}

TEST(Threshold, MatchingStatesWait) {
    const auto p = sample_multi();
    for (int s = 0; s < 3; ++s) EXPECT_EQ(p.action({s, s, 0, 0}), Action::Wait);
    EXPECT_EQ(SingleThresholdPolicy(1).action({2, 2, 0, 0}), Action::Wait);
}

TEST(Threshold, ZeroOrNegativeRejected) {
    EXPECT_THROW(Threshold::at(0), ModelError);
    EXPECT_THROW(SingleThresholdPolicy(0), ModelError);
    EXPECT_THROW(MultiThresholdPolicy(3, 1, 0), ModelError);
}

TEST(Threshold, DiagonalFixedToNever) {
    auto p = sample_multi();
    EXPECT_TRUE(p.threshold(1, 1, 0).is_never());
    EXPECT_THROW(p.set(1, 1, 0, Threshold::at(3)), ContractError);
}

TEST(Threshold, OutOfBoundsState) {
    const auto p = sample_multi();
    EXPECT_THROW(p.action({0, 3, 1, 0}), std::out_of_range);
    EXPECT_THROW(p.action({0, 1, 1, 3}), std::out_of_range);
}

TEST(Threshold, ActionMonotoneWithOneSwitch) {
    const auto p = sample_multi();
    for (int s = 0; s < 3; ++s)
        for (int w = 0; w < 3; ++w)
            for (int r = 0; r <= 2; ++r) {
                if (s == w) continue;
                int switches = 0;
                Action prev = Action::Wait;
                for (int d = 1; d <= 20; ++d) {
                    const Action a = p.action({s, w, d, r});
                    EXPECT_FALSE(prev == Action::Transmit && a == Action::Wait);
                    switches += a != prev;
                    prev = a;
                }
                EXPECT_LE(switches, 1);
            }
}

TEST(Threshold, NmaxAndCap) {
    const auto p = sample_multi();
    EXPECT_EQ(p.n_max(), 6);
    EXPECT_EQ(p.aoii_cap(), 6);
    MultiThresholdPolicy never(2, 1, 1);
    for (int r = 0; r <= 1; ++r) {
        never.set(0, 1, r, Threshold::never());
        never.set(1, 0, r, Threshold::never());
    }
    EXPECT_FALSE(never.n_max().has_value());
    EXPECT_EQ(never.aoii_cap(), 1);
}

TEST(Mixture, ResampleExamples) {
    RandomizedMixturePolicy always_minus(SingleThresholdPolicy(2), SingleThresholdPolicy(5), 1.0);
    RandomizedMixturePolicy always_plus(SingleThresholdPolicy(2), SingleThresholdPolicy(5), 0.0);
    RandomizedMixturePolicy quarter(SingleThresholdPolicy(2), SingleThresholdPolicy(5), 0.25);
    const SystemState c{0, 0, 0, 0};
    for (double u : {0.0, 0.3, 0.999}) {
        EXPECT_EQ(always_minus.resample(c, u), MixtureComponent::Minus);
        EXPECT_EQ(always_plus.resample(c, u), MixtureComponent::Plus);
    }
    EXPECT_EQ(quarter.resample(c, 0.1), MixtureComponent::Minus);
    EXPECT_EQ(quarter.resample(c, 0.9), MixtureComponent::Plus);
}

TEST(Mixture, DelegatesToActiveComponent) {
    RandomizedMixturePolicy m(SingleThresholdPolicy(2), SingleThresholdPolicy(5), 0.5);
    m.resample({1, 1, 0, 0}, 0.2);
    EXPECT_EQ(m.action({0, 1, 3, 0}), Action::Transmit);
    m.resample({1, 1, 0, 0}, 0.7);
    EXPECT_EQ(m.action({0, 1, 3, 0}), Action::Wait);
}

TEST(Mixture, ResampleOutsideRegenerationSet) {
    RandomizedMixturePolicy m(SingleThresholdPolicy(2), SingleThresholdPolicy(5), 0.5);
    EXPECT_THROW(m.resample({0, 1, 1, 0}, 0.5), ContractError);
    EXPECT_THROW(m.resample({0, 0, 0, 0}, 1.0), ContractError);
    EXPECT_THROW(RandomizedMixturePolicy(SingleThresholdPolicy(2), SingleThresholdPolicy(5), 1.5), ModelError);
}

TEST(MixingProbability, Examples) {
    EXPECT_NEAR(mixing_probability(0.3, 0.1, 0.15), 0.25, 1e-15);
    EXPECT_EQ(mixing_probability(0.2, 0.2, 0.2), 1.0);
    EXPECT_EQ(mixing_probability(0.2, 0.05, 0.2), 1.0);
    EXPECT_EQ(mixing_probability(0.2, 0.05, 0.05), 0.0);
}

TEST(MixingProbability, BracketViolation) {
    EXPECT_THROW(mixing_probability(0.3, 0.2, 0.1), InfeasibleError);
    EXPECT_THROW(mixing_probability(0.1, 0.05, 0.2), InfeasibleError);
}

TEST(Periodic, TransmitsOncePerPeriod) {
    PeriodicPolicy p(4);
    int sent = 0;
    for (int t = 0; t < 400; ++t) {
        const Action a = p.action({0, 0, 0, 0});
        if (t % 4 == 0)
            EXPECT_EQ(a, Action::Transmit);
        else
            EXPECT_EQ(a, Action::Wait);
        sent += as_int(a);
    }
    EXPECT_EQ(sent, 100);
}

TEST(Periodic, PeriodForRate) {
    EXPECT_EQ(PeriodicPolicy::for_rate(0.1).period(), 10);
    EXPECT_EQ(PeriodicPolicy::for_rate(0.3).period(), 4);
    EXPECT_EQ(PeriodicPolicy::for_rate(1.0).period(), 1);
    EXPECT_LE(1.0 / PeriodicPolicy::for_rate(0.15).period(), 0.15);
    EXPECT_THROW(PeriodicPolicy::for_rate(0.0), ModelError);
    EXPECT_THROW(PeriodicPolicy(0), ModelError);
}

TEST(Tabular, CapsAoiiAtTable) {
    const StateSpace space(2, 1, 3);
    std::vector<Action> acts(space.size(), Action::Wait);
    acts[space.index_of({0, 1, 3, 1})] = Action::Transmit;
    const TabularPolicy t(space, acts);
    EXPECT_EQ(t.action({0, 1, 3, 1}), Action::Transmit);
    EXPECT_EQ(t.action({0, 1, 30, 1}), Action::Transmit);
    EXPECT_EQ(t.action({0, 1, 2, 1}), Action::Wait);
    EXPECT_THROW(TabularPolicy(space, {Action::Wait}), ModelError);
}

TEST(PolicyIo, RoundTripEveryClass) {
    const StateSpace space(2, 1, 2);
    std::vector<Action> acts(space.size(), Action::Transmit);
    acts[0] = Action::Wait;
    const std::vector<AnyPolicy> policies{
        sample_multi(), SingleThresholdPolicy(8), SingleThresholdPolicy::never_transmit(),
        TabularPolicy(space, acts), PeriodicPolicy(5, 2),
        RandomizedMixturePolicy(sample_multi(), SingleThresholdPolicy(3), 0.375)};
    for (const auto& p : policies) {
        const auto doc = policy_to_json(p);
        EXPECT_EQ(doc["format"], "aoii-policy/1");
        EXPECT_TRUE(policy_from_json(doc) == p) << doc.dump();
    }
}

TEST(PolicyIo, FileRoundTrip) {
    const std::string path = testing::TempDir() + "policy.json";
    const AnyPolicy p = RandomizedMixturePolicy(sample_multi(), sample_multi(), 0.5);
    save_policy(path, p);
    EXPECT_TRUE(load_policy(path) == p);
}

TEST(PolicyIo, RejectsUnknownDocuments) {
    EXPECT_THROW(policy_from_json(nlohmann::json{{"format", "other"}}), ModelError);
    EXPECT_THROW(policy_from_json(nlohmann::json{{"format", "aoii-policy/1"}, {"class", "lp"}}), ModelError);
    EXPECT_THROW(policy_from_json(nlohmann::json{{"format", "aoii-policy/1"}, {"class", "single"}}), ModelError);
}
