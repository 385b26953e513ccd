#pragma once

// Prime generation: a classic sieve for base tables, an odd-only segmented
// sieve for far intervals (both prime and p-rough variants), and the
// logarithmic primorial / eigenvalue products used by the population models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sievedyn/errors.hpp"

namespace sievedyn {

using u64 = std::uint64_t;

// Odd entries per segment; 2^20 bytes stays cache resident.
inline constexpr std::size_t kSegmentEntries = std::size_t{1} << 20;
inline constexpr u64 kDefaultPrimeBudget = 100'000'000;
inline constexpr u64 kDefaultSieveBudget = 20'000'000'000ULL;

inline u64 isqrt(u64 n) {
    auto r = static_cast<u64>(std::sqrt(static_cast<long double>(n)));
    while (static_cast<unsigned __int128>(r) * r > n) --r;
    while (static_cast<unsigned __int128>(r + 1) * (r + 1) <= n) ++r;
    return r;
}

struct PrimeTable {
    u64 limit = 0;
    std::vector<u64> primes;  // ascending, every prime <= limit

    bool covers_sqrt_of(u64 n) const { return limit >= isqrt(n); }
    // Primes <= p as a view into the table.
    std::span<const u64> up_to(u64 p) const {
        auto end = std::upper_bound(primes.begin(), primes.end(), p);
        return {primes.data(), static_cast<std::size_t>(end - primes.begin())};
    }
};

inline PrimeTable primes_up_to(u64 n) {
    if (n < 2) throw DomainError("primes_up_to: n must be at least 2, got " + std::to_string(n));
    // index i <-> odd value 2i+1
    std::vector<std::uint8_t> composite(n / 2 + 1, 0);
    composite[0] = 1;
    for (u64 q = 3; q * q <= n; q += 2) {
        if (composite[q / 2]) continue;
        for (u64 m = q * q; m <= n; m += 2 * q) composite[m / 2] = 1;
    }
    PrimeTable t;
    t.limit = n;
    t.primes.push_back(2);
    for (u64 v = 3; v <= n; v += 2)
        if (!composite[v / 2]) t.primes.push_back(v);
    return t;
}

namespace detail {

// flags[i] describes the odd value lo_odd + 2i. Strikes odd multiples of every
// odd prime in `primes`. With from_square the prime itself survives (prime
// sieve); otherwise the prime is struck too (p-rough sieve).
inline void strike_odd_segment(u64 lo_odd, std::size_t count, std::span<const u64> primes,
                               bool from_square, std::vector<std::uint8_t>& flags) {
    const u64 hi = lo_odd + 2 * static_cast<u64>(count);
    for (u64 q : primes) {
        if (q == 2) continue;
        u64 start;
        if (from_square) {
            const u64 sq = q * q;
            if (sq >= hi) break;
            start = sq;
            if (start < lo_odd) {
                start = (lo_odd + q - 1) / q * q;
                if ((start & 1) == 0) start += q;
            }
        } else {
            if (q >= hi) break;
            start = (lo_odd + q - 1) / q * q;
            if ((start & 1) == 0) start += q;
        }
        if (start >= hi) continue;
        const u64 step = q;
        for (u64 i = (start - lo_odd) / 2; i < count; i += step) flags[i] = 0;
    }
}

}  // namespace detail

// Calls f(p) for every prime p in [lo, hi), ascending.
template <class F>
void for_each_prime(u64 lo, u64 hi, const PrimeTable& base, F&& f) {
    if (hi <= lo) return;
    if (!base.covers_sqrt_of(hi - 1))
        throw PreconditionError("for_each_prime: base table (limit " + std::to_string(base.limit) +
                                ") does not cover sqrt(" + std::to_string(hi - 1) + ")");
    if (lo <= 2 && 2 < hi) f(u64{2});
    const u64 first = std::max<u64>(lo, 3) | 1;
    std::vector<std::uint8_t> flags;
    for (u64 seg = first; seg < hi; seg += 2 * kSegmentEntries) {
        const auto count = static_cast<std::size_t>(std::min<u64>(kSegmentEntries, (hi - seg + 1) / 2));
        flags.assign(count, 1);
        detail::strike_odd_segment(seg, count, base.primes, true, flags);
        for (std::size_t i = 0; i < count; ++i)
            if (flags[i]) f(seg + 2 * static_cast<u64>(i));
    }
}

// Calls f(r) for every r in [lo, hi) with no prime factor among
// `sieving_primes` (which must contain 2). 1 counts as rough.
template <class F>
void for_each_rough(u64 lo, u64 hi, std::span<const u64> sieving_primes, F&& f) {
    if (hi <= lo) return;
    detail::require(!sieving_primes.empty() && sieving_primes.front() == 2,
                    "for_each_rough: sieving primes must start at 2");
    const u64 first = lo | 1;
    std::vector<std::uint8_t> flags;
    for (u64 seg = first; seg < hi; seg += 2 * kSegmentEntries) {
        const auto count = static_cast<std::size_t>(std::min<u64>(kSegmentEntries, (hi - seg + 1) / 2));
        flags.assign(count, 1);
        detail::strike_odd_segment(seg, count, sieving_primes, false, flags);
        for (std::size_t i = 0; i < count; ++i)
            if (flags[i]) f(seg + 2 * static_cast<u64>(i));
    }
}

// Primality mask over [lo, hi): mask[i] != 0 iff lo+i is prime.
inline std::vector<std::uint8_t> sieve_interval(u64 lo, u64 hi, const PrimeTable& base,
                                                u64 max_width = 1'000'000'000) {
    detail::require(lo >= 2, "sieve_interval: lo must be at least 2");
    detail::require(hi >= lo, "sieve_interval: hi < lo");
    if (hi - lo > max_width) throw BudgetError("sieve_interval: width exceeds sieve budget");
    std::vector<std::uint8_t> mask(hi - lo, 0);
    for_each_prime(lo, hi, base, [&](u64 p) { mask[p - lo] = 1; });
    return mask;
}

// Deterministic trial division; fine for the prime sizes this toolkit touches
// (neighbours of sieving stages, well below 2^42).
inline bool is_prime(u64 n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    if (n % 3 == 0) return n == 3;
    for (u64 d = 5; d * d <= n; d += 6)
        if (n % d == 0 || n % (d + 2) == 0) return false;
    return true;
}

inline u64 next_prime(u64 n) {
    if (n < 2) return 2;
    u64 c = n + 1;
    if (c % 2 == 0) ++c;
    while (!is_prime(c)) c += 2;
    return c;
}

inline u64 prev_prime(u64 n) {
    if (n <= 2) throw DomainError("prev_prime: no prime below " + std::to_string(n));
    if (n == 3) return 2;
    u64 c = n - 1;
    if (c % 2 == 0) --c;
    while (!is_prime(c)) c -= 2;
    return c;
}

// Ascending primes in [from, limit], generated segment by segment.
class PrimeStream {
  public:
    explicit PrimeStream(u64 from, u64 limit = kDefaultPrimeBudget)
        : limit_(limit), next_lo_(from) {
        base_ = primes_up_to(std::max<u64>(2, isqrt(limit)));
    }

    std::optional<u64> next() {
        while (pos_ == buffer_.size()) {
            if (next_lo_ > limit_) return std::nullopt;
            refill();
        }
        return buffer_[pos_++];
    }

    u64 limit() const { return limit_; }

  private:
    void refill() {
        buffer_.clear();
        pos_ = 0;
        const u64 lo = next_lo_;
        const u64 hi = std::min<u64>(limit_, lo + 2 * kSegmentEntries) + 1;
        for_each_prime(lo, hi, base_, [&](u64 p) { buffer_.push_back(p); });
        next_lo_ = hi;
    }

    u64 limit_;
    u64 next_lo_;
    PrimeTable base_;
    std::vector<u64> buffer_;
    std::size_t pos_ = 0;
};

struct LogPrimorial {
    u64 p = 0;
    long double log_value = 0;  // sum of ln q over primes q <= p
};

inline LogPrimorial log_primorial(u64 p) {
    LogPrimorial lp{p, 0};
    if (p < 2) return lp;
    PrimeStream ps(2, p);
    while (auto q = ps.next()) lp.log_value += std::log(static_cast<long double>(*q));
    return lp;
}

// p# when it fits in 64 bits (p <= 47).
inline std::optional<u64> primorial_exact(u64 p) {
    unsigned __int128 acc = 1;
    for (u64 q = 2; q <= p; ++q) {
        if (!is_prime(q)) continue;
        acc *= q;
        if (acc > std::numeric_limits<u64>::max()) return std::nullopt;
    }
    return static_cast<u64>(acc);
}

// Running eigenvalue product prod_{q >= p_start} (q-J-j)/(q-J-1), kept in log
// space so a million near-unity factors do not drift.
class LambdaProduct {
  public:
    LambdaProduct(unsigned J, unsigned j) : J_(J), j_(j) {
        if (j < 2) throw DomainError("lambda index j must be at least 2");
    }

    void include(u64 q) {
        if (q <= static_cast<u64>(J_) + j_)
            throw DomainError("lambda factor (q-J-j)/(q-J-1) nonpositive at q=" + std::to_string(q) +
                              "; J too large for this prime range");
        log_sum_ += std::log1p(-static_cast<long double>(j_ - 1) / static_cast<long double>(q - J_ - 1));
    }

    long double value() const { return std::exp(log_sum_); }
    long double log_value() const { return log_sum_; }

  private:
    unsigned J_;
    unsigned j_;
    long double log_sum_ = 0;
};

inline long double lambda_j_of(u64 p_k, u64 p_start, unsigned J, unsigned j) {
    LambdaProduct prod(J, j);
    if (p_k < p_start) return 1.0L;
    PrimeStream ps(p_start, p_k);
    while (auto q = ps.next()) prod.include(*q);
    return prod.value();
}

// Subdominant eigenvalue product; 1 at the base stage, decreasing to 0.
inline long double lambda_of(u64 p_k, u64 p_start, unsigned J) { return lambda_j_of(p_k, p_start, J, 2); }

// Smallest prime p_k >= p_start with lambda_of(p_k) <= target. A target of 1 or
// more maps back to the base stage p0 (the prime before p_start).
inline u64 prime_for_lambda(long double target, u64 p_start, unsigned J,
                            u64 prime_budget = kDefaultPrimeBudget) {
    if (target >= 1.0L) return prev_prime(p_start);
    if (!(target > 0.0L)) throw DomainError("prime_for_lambda: target must lie in (0,1)");
    const long double log_target = std::log(target);
    LambdaProduct prod(J, 2);
    PrimeStream ps(p_start, prime_budget);
    while (auto q = ps.next()) {
        prod.include(*q);
        if (prod.log_value() <= log_target) return *q;
    }
    throw BudgetError("prime_for_lambda: lambda " + std::to_string(static_cast<double>(target)) +
                      " not reached below prime budget " + std::to_string(prime_budget));
}

// Beyond the budget, Mertens' theorem gives lambda(p) ~ lambda(P) * ln P / ln p,
// so halving lambda squares the prime. Returns ln of the estimated prime.
inline long double log_prime_for_lambda_estimate(long double target, u64 p_start, unsigned J,
                                                 u64 reference_prime) {
    if (!(target > 0.0L && target < 1.0L)) throw DomainError("lambda target must lie in (0,1)");
    const long double lam_ref = lambda_of(reference_prime, p_start, J);
    return std::log(static_cast<long double>(reference_prime)) * lam_ref / target;
}

}  // namespace sievedyn
