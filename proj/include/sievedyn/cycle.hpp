#pragma once

// Cycles of gaps G(p#): the differences between consecutive p-rough numbers
// over one period p#. Built by the three-step recursion (next prime,
// concatenate copies, fuse at multiples of the new prime) and counted
// directly for gaps, constellations and driving terms.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sievedyn/constellation.hpp"
#include "sievedyn/errors.hpp"
#include "sievedyn/primes.hpp"

namespace sievedyn {

using Gap = std::uint16_t;

// G(23#) has 36,495,360 gaps; G(29#) (about 1.02e9) stays behind the default.
inline constexpr u64 kDefaultCycleBudget = 1'000'000'000;

class GapCycle {
  public:
    GapCycle(u64 p, std::vector<Gap> gaps) : p_(p), gaps_(std::move(gaps)) {
        detail::require(!gaps_.empty(), "gap cycle cannot be empty");
    }

    u64 p() const { return p_; }
    std::span<const Gap> gaps() const { return gaps_; }
    u64 size() const { return gaps_.size(); }
    Gap operator[](u64 i) const { return gaps_[i]; }
    // R1: the first gap runs from 1 to the next prime.
    u64 next_prime() const { return u64{gaps_.front()} + 1; }
    // Sum of gaps; equals p# for a valid cycle.
    u64 span() const {
        u64 s = 0;
        for (Gap g : gaps_) s += g;
        return s;
    }

  private:
    u64 p_;
    std::vector<Gap> gaps_;
};

// G(3#): the 3-rough numbers 1, 5, 7 give gaps (4, 2).
inline GapCycle seed_cycle() { return GapCycle(3, {4, 2}); }

// One application of the recursion. The strikes are the multiples p_next * r
// for each rough r of the input cycle, in increasing order; the first (r = 1)
// is the fusion g1+g2 that confirms p_next, and there are phi(p#) in total.
inline GapCycle next_cycle(const GapCycle& c, u64 budget = kDefaultCycleBudget) {
    const auto g = c.gaps();
    const u64 p_next = c.next_prime();
    const u64 phi = g.size();
    const u64 out_len = (p_next - 1) * phi;
    if (out_len > budget)
        throw BudgetError("next_cycle: G(" + std::to_string(p_next) + "#) has " + std::to_string(out_len) +
                          " gaps, over the cycle budget of " + std::to_string(budget));

    std::vector<Gap> out;
    out.reserve(out_len);
    u64 value = 1;           // rough number at the right end of the pending gap
    u64 strike = p_next;     // next multiple of p_next to remove
    std::size_t strike_idx = 0;
    u64 pending = 0;
    for (u64 copy = 0; copy < p_next; ++copy) {
        for (u64 i = 0; i < phi; ++i) {
            pending += g[i];
            value += g[i];
            if (value == strike) {
                strike += p_next * g[strike_idx++];
                continue;  // fuse: the gap keeps growing
            }
            detail::ensure(pending <= std::numeric_limits<Gap>::max(), "next_cycle: gap exceeds 16-bit storage");
            out.push_back(static_cast<Gap>(pending));
            pending = 0;
        }
    }
    detail::ensure(strike_idx == phi, "next_cycle: fusion count differs from phi(p#)");
    detail::ensure(pending == 0 && out.size() == out_len, "next_cycle: output length differs from phi(p_next#)");
    return GapCycle(p_next, std::move(out));
}

inline GapCycle build_cycle(u64 p, u64 budget = kDefaultCycleBudget) {
    detail::require(p >= 3 && is_prime(p), "build_cycle: p must be an odd prime, got " + std::to_string(p));
    GapCycle c = seed_cycle();
    while (c.p() < p) c = next_cycle(c, budget);
    return c;
}

// Number of positions holding gap g (each cyclic position once).
inline u64 count_gap(const GapCycle& c, unsigned g) {
    return static_cast<u64>(std::count(c.gaps().begin(), c.gaps().end(), static_cast<Gap>(g)));
}

// Number of cyclic start positions where s appears verbatim.
inline u64 count_constellation(const GapCycle& c, const Constellation& s) {
    const auto g = c.gaps();
    const auto sg = s.gaps();
    const u64 n = g.size();
    detail::require(s.span() < c.span(), "count_constellation: span must be below the cycle span");
    u64 count = 0;
    for (u64 i = 0; i < n; ++i) {
        bool match = true;
        for (std::size_t k = 0; k < sg.size(); ++k) {
            if (g[(i + k) % n] != sg[k]) {
                match = false;
                break;
            }
        }
        count += match;
    }
    return count;
}

struct OccurrenceCount {
    Constellation s;
    unsigned j;
    u64 count;
};

namespace detail {

// Length of the driving term for s starting at position i: the window whose
// partial sums pass through every boundary point of s and end at |s|.
// Returns 0 when no window starting at i fuses to s.
inline unsigned driving_length_at(std::span<const Gap> g, u64 i, std::span<const u64> boundary) {
    const u64 n = g.size();
    const u64 span = boundary.back();
    u64 sum = 0;
    std::size_t b = 1;
    unsigned len = 0;
    while (sum < span) {
        sum += g[(i + len) % n];
        ++len;
        if (sum > boundary[b]) return 0;
        if (sum == boundary[b]) ++b;
    }
    return len;
}

}  // namespace detail

inline OccurrenceCount count_driving_terms(const GapCycle& c, const Constellation& s, unsigned j) {
    if (j < s.length() || j > s.max_driving_length())
        throw DomainError("count_driving_terms: j=" + std::to_string(j) + " outside [J, |s|/2]");
    const auto boundary = s.boundary_points();
    const auto g = c.gaps();
    u64 count = 0;
    for (u64 i = 0; i < g.size(); ++i) count += detail::driving_length_at(g, i, boundary) == j;
    return {s, j, count};
}

// Counts of driving terms for every length j = J..|s|/2 in one pass.
inline std::vector<u64> driving_term_counts(const GapCycle& c, const Constellation& s) {
    const auto boundary = s.boundary_points();
    const auto g = c.gaps();
    std::vector<u64> counts(s.max_driving_length() - s.length() + 1, 0);
    for (u64 i = 0; i < g.size(); ++i) {
        const unsigned len = detail::driving_length_at(g, i, boundary);
        if (len) ++counts[len - s.length()];
    }
    return counts;
}

// table[g/2][j] = number of windows of j consecutive gaps summing to g, for
// every even g <= max_span. One pass covers all gaps and their driving terms.
inline std::vector<std::vector<u64>> gap_driving_table(const GapCycle& c, unsigned max_span) {
    std::vector<std::vector<u64>> table(max_span / 2 + 1);
    for (unsigned g = 2; g <= max_span; g += 2) table[g / 2].assign(g / 2 + 1, 0);
    const auto gaps = c.gaps();
    const u64 n = gaps.size();
    for (u64 i = 0; i < n; ++i) {
        u64 sum = 0;
        for (unsigned len = 1;; ++len) {
            sum += gaps[(i + len - 1) % n];
            if (sum > max_span) break;
            ++table[sum / 2][len];
        }
    }
    return table;
}

inline unsigned max_gap(const GapCycle& c) { return *std::max_element(c.gaps().begin(), c.gaps().end()); }

// Gaps between consecutive p-rough numbers inside [lo, hi], sieved in windows
// without building the cycle.
inline std::vector<u64> rough_gaps_in_interval(u64 lo, u64 hi, u64 p, u64 budget = 100'000'000) {
    detail::require(hi >= lo, "rough_gaps_in_interval: hi < lo");
    detail::require(p >= 2, "rough_gaps_in_interval: p must be at least 2");
    if (hi - lo > budget) throw BudgetError("rough_gaps_in_interval: interval wider than budget");
    const PrimeTable table = primes_up_to(p);
    std::vector<u64> gaps;
    u64 prev = 0;
    bool have_prev = false;
    for_each_rough(lo, hi + 1, table.primes, [&](u64 r) {
        if (have_prev) gaps.push_back(r - prev);
        prev = r;
        have_prev = true;
    });
    return gaps;
}

}  // namespace sievedyn
