#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sievedyn/legendre.hpp"

using namespace sievedyn;

namespace {

CycleCache& cache() {
    static CycleCache c;
    return c;
}

unsigned max_of(const std::vector<unsigned>& v) { return *std::max_element(v.begin(), v.end()); }

// largest prime gap whose left prime lies in [lo, hi]
u64 max_prime_gap_from(u64 lo, u64 hi) {
    u64 best = 0, prev = 0;
    for (u64 n = lo;; ++n) {
        if (!oracle::is_prime(n)) continue;
        if (prev) best = std::max(best, n - prev);
        if (n > hi) return best;
        prev = n;
    }
}

}  // namespace

TEST(Jacobsthal, SmallPrimorials) {
    EXPECT_EQ(jacobsthal(5, cache()), 6u);
    EXPECT_EQ(jacobsthal(7, cache()), 10u);
    for (u64 p : {3, 5, 7, 11, 13}) EXPECT_EQ(jacobsthal(p, cache()), max_of(oracle::rough_cycle(p))) << p;
    EXPECT_EQ(jacobsthal(17, cache()), 26u);
    EXPECT_EQ(jacobsthal(19, cache()), 34u);
    EXPECT_THROW(jacobsthal(19, 1000), BudgetError);
}

TEST(Jacobsthal, IncreasesWithP) {
    unsigned prev = 0;
    for (u64 p : {3, 5, 7, 11, 13, 17, 19}) {
        EXPECT_GT(jacobsthal(p, cache()), prev);
        prev = jacobsthal(p, cache());
    }
}

TEST(GmaxRestricted, FullCycleEqualsJacobsthal) {
    for (u64 p : {3, 5, 7, 11, 13}) EXPECT_EQ(gmax_restricted(1, *primorial_exact(p) + 1, p), jacobsthal(p, cache()));
}

TEST(GmaxRestricted, PropertyMatchesPrimeGapsInSurvivalIntervals) {
    // below p_next^2 the p_k-rough numbers past p_k are exactly the primes
    for (int t = 0; t < 30; ++t) {
        const auto iv = delta_h(next_prime(oracle::uniform(5, 3000)));
        const u64 g = gmax_restricted(iv.lo, iv.hi, iv.p_k);
        EXPECT_EQ(g, max_prime_gap_from(iv.lo, iv.hi)) << iv.p_k;
        EXPECT_LT(g, 2 * iv.p_k);
    }
    EXPECT_THROW(gmax_restricted(10, 5, 7), PreconditionError);
    EXPECT_THROW(gmax_restricted(1, 100, 8), PreconditionError);
    EXPECT_THROW(gmax_restricted(1, 10'000, 7, 100), BudgetError);
}

TEST(GmaxRestricted, NoMoreThanThePrimeGaps) {
    // the primes past p are a subset of the p-rough numbers, so rough gaps can only be shorter
    for (int t = 0; t < 20; ++t) {
        const u64 lo = oracle::uniform(1000, 1'000'000);
        const u64 hi = lo + oracle::uniform(100, 5000);
        const u64 p = next_prime(oracle::uniform(3, 30));
        EXPECT_LE(gmax_restricted(lo, hi, p), max_prime_gap_from(lo, hi));
        EXPECT_GE(gmax_restricted(lo, hi, p), 2u);
    }
}

TEST(Classify, SyntheticCover) {
    const auto iv = delta_h(113);  // p_next = 127
    const u64 n = 120;
    const Threat t = classify_gap(n * n - 1, 2 * n + 4, iv);
    EXPECT_EQ(t.cls, ThreatClass::covers_quadratic);
    ASSERT_TRUE(t.covered_n.has_value());
    EXPECT_EQ(*t.covered_n, n);
    EXPECT_EQ(t.severity, ThreatSeverity::possible);
    EXPECT_STREQ(to_string(t.cls), "covers_quadratic");
}

TEST(Classify, MidIntervalIsMisaligned) {
    const auto iv = delta_h(113);
    const u64 n = 118;
    const Threat t = classify_gap(n * n + n, 2 * n + 4, iv);
    EXPECT_EQ(t.cls, ThreatClass::misaligned);
    EXPECT_FALSE(t.covered_n.has_value());
    EXPECT_EQ(classify_gap(n * n + 1, 2 * n + 2, iv).cls, ThreatClass::sub_threshold);
    EXPECT_STREQ(to_string(ThreatClass::misaligned), "misaligned");
}

TEST(Classify, Severity) {
    const auto iv = delta_h(113);
    EXPECT_EQ(classify_gap(iv.lo, 4 * 113 + 6, iv).severity, ThreatSeverity::early);
    EXPECT_EQ(classify_gap(iv.lo, 4 * 113 + 4, iv).severity, ThreatSeverity::possible);
    EXPECT_EQ(classify_gap(iv.lo, 4 * 127 - 2, iv).severity, ThreatSeverity::refutes);
    EXPECT_STREQ(to_string(ThreatSeverity::refutes), "refutes");
    const Threat mid = classify_gap(iv.lo + iv.width() / 2, 2, iv);
    EXPECT_NEAR(double(mid.position), 0.5, 1e-9);
}

TEST(Classify, PropertyCoverNeedsLongGap) {
    for (int t = 0; t < 2000; ++t) {
        const auto iv = delta_h(next_prime(oracle::uniform(5, 5000)));
        const u64 at = oracle::uniform(iv.lo, iv.hi - 1);
        const u64 gap = 2 * oracle::uniform(1, iv.p_k + 10);
        const Threat th = classify_gap(at, gap, iv);
        if (th.cls == ThreatClass::covers_quadratic) {
            const u64 n = *th.covered_n;
            ASSERT_GE(gap, 2 * n + 3);
            ASSERT_GT(n * n, at);
            ASSERT_LT((n + 1) * (n + 1), at + gap);
        } else {
            for (u64 n = iv.p_k; n < iv.p_next; ++n) ASSERT_FALSE(n * n > at && (n + 1) * (n + 1) < at + gap);
        }
    }
}

TEST(ThreatScan, SmallPrimesHaveNoThreats) {
    const auto reps = threat_scan_range(2, 3000, 2);
    EXPECT_EQ(reps.size(), oracle::primes_in(2, 3001).size());
    for (const auto& r : reps) {
        EXPECT_TRUE(r.threats.empty()) << r.p_k;
        ASSERT_EQ(r.per_quadratic.size(), r.g3);
        EXPECT_EQ(r.gmax_interval, *std::max_element(r.per_quadratic.begin(), r.per_quadratic.end()));
    }
}

TEST(ThreatScan, PerQuadraticAgainstEnumeration) {
    for (u64 p : {5, 23, 113, 1327}) {
        const auto r = threat_scan(p);
        const auto iv = delta_h(p);
        std::vector<u64> pts{iv.lo};
        for (u64 q : oracle::primes_in(iv.lo, iv.hi)) pts.push_back(q);
        pts.push_back(iv.hi);
        std::vector<u64> want(iv.g3, 0);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const u64 j = static_cast<u64>(std::sqrt(static_cast<double>(pts[i]))) - p;
            want[j] = std::max(want[j], pts[i + 1] - pts[i]);
        }
        EXPECT_EQ(r.per_quadratic, want) << p;
    }
}

TEST(ThreatScan, TinyInterval) {
    // p_k = 2: dH = [4, 9] holds 5 and 7; gaps 1, 2, 2 against threshold 8
    const auto r = threat_scan(2);
    EXPECT_TRUE(r.threats.empty());
    EXPECT_EQ(r.gmax_interval, 2u);
}

TEST(Verify, Examples) {
    EXPECT_TRUE(legendre_verify(2, 10'000).empty());
    EXPECT_TRUE(legendre_verify(2, 2).empty());
    EXPECT_EQ(oracle::primes_in(4, 10), (std::vector<u64>{5, 7}));
    EXPECT_TRUE(legendre_verify(1, 1).empty());
    EXPECT_THROW(legendre_verify(10, 5), PreconditionError);
    EXPECT_THROW(legendre_verify(1, 100'000, 1000), BudgetError);
}

TEST(Verify, PrimeCountsTrackSummedDensity) {
    // average primes per quadratic interval near n ~ 10^3 against sum over all gaps of eta
    u64 primes = 0, intervals = 0;
    long double model = 0;
    for (u64 p = 1009; p < 1200; p = next_prime(p)) {
        const auto iv = delta_h(p);
        for_each_prime(iv.lo, iv.hi, primes_up_to(iv.p_next), [&](u64) { ++primes; });
        intervals += iv.g3;
        long double log_phi_ratio = 0;
        PrimeStream ps(2, p);
        while (auto q = ps.next()) log_phi_ratio += std::log1p(-1.0L / static_cast<long double>(*q));
        model += static_cast<long double>(iv.width()) * std::exp(log_phi_ratio);
    }
    EXPECT_NEAR(double(model / primes), 1.0, 0.25);
    EXPECT_GT(primes / intervals, 100u);
}
