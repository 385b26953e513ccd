#pragma once

// Legendre's conjecture seen from the sieve: a prime-free [n^2, (n+1)^2] needs a
// gap of at least 2n+4 among the p_k-rough numbers of the interval of survival
// that also lines up with the squares.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "sievedyn/cycle.hpp"
#include "sievedyn/cycle_cache.hpp"
#include "sievedyn/errors.hpp"
#include "sievedyn/primes.hpp"
#include "sievedyn/survival.hpp"

namespace sievedyn {

inline unsigned jacobsthal(u64 p, CycleCache& cache) { return max_gap(cache.get(p)); }

inline unsigned jacobsthal(u64 p, u64 budget = kDefaultCycleBudget) { return max_gap(build_cycle(p, budget)); }

// Largest gap between consecutive p-rough numbers whose left end lies in [lo, hi].
inline u64 gmax_restricted(u64 lo, u64 hi, u64 p, u64 budget = kDefaultSieveBudget) {
    detail::require(hi >= lo && lo >= 1, "gmax_restricted: need 1 <= lo <= hi");
    detail::require(p >= 2 && is_prime(p), "gmax_restricted: p must be prime");
    if (hi - lo > budget) throw BudgetError("gmax_restricted: interval wider than sieve budget");
    const PrimeTable table = primes_up_to(p);
    u64 best = 0, prev = 0;
    bool have = false;
    for_each_rough(lo, hi + 1, table.primes, [&](u64 r) {
        if (have) best = std::max(best, r - prev);
        prev = r;
        have = true;
    });
    if (!have) return 0;
    // the gap leaving the last rough number <= hi
    for (u64 width = 2 * p + 2;; width *= 2) {
        std::optional<u64> next;
        for_each_rough(hi + 1, hi + 1 + width, table.primes, [&](u64 r) {
            if (!next) next = r;
        });
        if (next) return std::max(best, *next - prev);
    }
}

enum class ThreatClass { covers_quadratic, misaligned, sub_threshold };
enum class ThreatSeverity { possible, early, refutes };

inline const char* to_string(ThreatClass c) {
    switch (c) {
        case ThreatClass::covers_quadratic: return "covers_quadratic";
        case ThreatClass::misaligned: return "misaligned";
        default: return "sub_threshold";
    }
}

inline const char* to_string(ThreatSeverity s) {
    switch (s) {
        case ThreatSeverity::early: return "early";
        case ThreatSeverity::refutes: return "refutes";
        default: return "possible";
    }
}

struct Threat {
    u64 gap = 0;
    u64 at = 0;  // left end
    ThreatClass cls = ThreatClass::sub_threshold;
    std::optional<u64> covered_n;  // n with [n^2, (n+1)^2] inside the gap
    ThreatSeverity severity = ThreatSeverity::possible;
    long double position = 0;  // (at - p_k^2) / |dH|
};

struct ThreatReport {
    u64 p_k = 0;
    u64 g3 = 0;
    u64 gmax_interval = 0;
    std::vector<u64> per_quadratic;  // j = 0..g3-1 <-> [(p_k+j)^2, (p_k+j+1)^2)
    std::vector<Threat> threats;
};

// Classifies a gap (at, at+gap) of dH(p_k). It covers [n^2, (n+1)^2] when its
// open span contains that closed interval; otherwise it is misaligned if it
// reaches 2n+4 for the n whose quadratic interval holds its left end, and
// sub-threshold if not.
inline Threat classify_gap(u64 at, u64 gap, const SurvivalInterval& iv) {
    Threat t;
    t.gap = gap;
    t.at = at;
    const u64 end = at + gap;
    for (u64 n = std::max<u64>(isqrt(at), iv.p_k); n < iv.p_next; ++n) {
        const u64 sq = n * n, sq1 = (n + 1) * (n + 1);
        if (sq > at && sq1 < end) {
            t.cls = ThreatClass::covers_quadratic;
            t.covered_n = n;
            break;
        }
        if (sq >= end) break;
    }
    if (!t.covered_n) t.cls = gap >= 2 * isqrt(at) + 4 ? ThreatClass::misaligned : ThreatClass::sub_threshold;
    if (gap + 2 >= 4 * iv.p_next)
        t.severity = ThreatSeverity::refutes;
    else if (gap >= 4 * iv.p_k + 6)
        t.severity = ThreatSeverity::early;
    t.position = static_cast<long double>(at - iv.lo) / static_cast<long double>(iv.width());
    return t;
}

// Scans dH(p_k) = [p_k^2, p_{k+1}^2]. Below p_{k+1}^2 the p_k-rough numbers are
// the primes, and p_{k+1}^2 itself closes the interval; p_k^2 is kept as the
// left boundary so scans over consecutive p_k tile the line without gaps.
// Gaps are attributed to quadratic intervals by their left end.
inline ThreatReport threat_scan(u64 p_k, const PrimeTable& base, u64 sieve_budget = kDefaultSieveBudget) {
    const SurvivalInterval iv = delta_h(p_k);
    if (iv.width() > sieve_budget) throw BudgetError("threat_scan: interval wider than sieve budget");
    ThreatReport rep{p_k, iv.g3, 0, std::vector<u64>(iv.g3, 0), {}};
    const u64 threshold = 2 * p_k + 4;
    u64 prev = iv.lo;
    auto take = [&](u64 r) {
        const u64 g = r - prev;
        const u64 j = isqrt(prev) - p_k;
        rep.per_quadratic[j] = std::max(rep.per_quadratic[j], g);
        if (g >= threshold) rep.threats.push_back(classify_gap(prev, g, iv));
        prev = r;
    };
    for_each_prime(iv.lo + 1, iv.hi, base, take);
    take(iv.hi);
    rep.gmax_interval = *std::max_element(rep.per_quadratic.begin(), rep.per_quadratic.end());
    return rep;
}

inline ThreatReport threat_scan(u64 p_k, u64 sieve_budget = kDefaultSieveBudget) {
    detail::require(is_prime(p_k), "threat_scan: p_k must be prime");
    return threat_scan(p_k, primes_up_to(next_prime(p_k)), sieve_budget);
}

// Threat reports for every prime p_k in [p_lo, p_hi].
inline std::vector<ThreatReport> threat_scan_range(u64 p_lo, u64 p_hi, unsigned threads = 1,
                                                   u64 sieve_budget = kDefaultSieveBudget) {
    detail::require(p_lo >= 2 && p_hi >= p_lo, "threat_scan_range: need 2 <= p_lo <= p_hi");
    std::vector<u64> ps;
    for (u64 p = next_prime(p_lo - 1); p <= p_hi; p = next_prime(p)) ps.push_back(p);
    if (ps.empty()) return {};
    const u64 total = next_prime(ps.back()) * next_prime(ps.back()) - ps.front() * ps.front();
    if (total > sieve_budget) throw BudgetError("threat_scan_range: range wider than sieve budget");
    const PrimeTable base = primes_up_to(next_prime(ps.back()));
    std::vector<ThreatReport> out(ps.size());
    parallel_for(ps.size(), threads, [&](std::size_t i) { out[i] = threat_scan(ps[i], base, sieve_budget); });
    return out;
}

// n in [n_lo, n_hi] with no prime in [n^2, (n+1)^2].
inline std::vector<u64> legendre_verify(u64 n_lo, u64 n_hi, u64 sieve_budget = kDefaultSieveBudget) {
    detail::require(n_lo >= 1 && n_hi >= n_lo && n_hi < 4'294'967'295ULL, "legendre_verify: need 1 <= n_lo <= n_hi < 2^32");
    const u64 lo = n_lo * n_lo, hi = (n_hi + 1) * (n_hi + 1);
    if (hi - lo > sieve_budget) throw BudgetError("legendre_verify: range wider than sieve budget");
    const PrimeTable base = primes_up_to(n_hi + 1);
    std::vector<std::uint8_t> hit(n_hi - n_lo + 1, 0);
    // squares are never prime, so each prime lies in exactly one quadratic interval
    for_each_prime(lo, hi + 1, base, [&](u64 q) { hit[isqrt(q) - n_lo] = 1; });
    std::vector<u64> violations;
    for (u64 n = n_lo; n <= n_hi; ++n)
        if (!hit[n - n_lo]) violations.push_back(n);
    return violations;
}

}  // namespace sievedyn
