#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sievedyn/constellation.hpp"
#include "sievedyn/cycle.hpp"
#include "sievedyn/cycle_cache.hpp"

namespace sievedyn {

// Exact populations n_{s,j}(p#) of s and its driving terms, j = J..|s|/2.
struct PopulationVector {
    Constellation s;
    u64 p = 0;
    std::vector<mpz_class> n;  // n[k] <-> j = J + k
    // False once a transfer step was applied with |s| >= 2 p_next; the
    // counts are then model output, not populations of the real cycle.
    bool exact = true;

    unsigned J() const { return s.length(); }
    unsigned J1() const { return s.max_driving_length(); }
    mpz_class at(unsigned j) const {
        if (j < J() || j > J1()) return 0;
        return n[j - J()];
    }
};

// The transfer from stage p to its successor is exact while |s| < 2 p_next:
// the fusions then land in distinct images of every driving term.
inline bool transfer_exact(const Constellation& s, u64 p_next) { return s.span() < 2 * p_next; }

inline PopulationVector population_vector(const GapCycle& c, const Constellation& s) {
    PopulationVector v{s, c.p(), {}, true};
    for (u64 count : driving_term_counts(c, s)) v.n.emplace_back(static_cast<unsigned long>(count));
    return v;
}

// Smallest buildable base stage from which every later transfer step is exact.
inline u64 default_base_stage(const Constellation& s) {
    static constexpr std::array<u64, 7> stages{5, 7, 11, 13, 17, 19, 23};
    for (u64 p : stages)
        if (transfer_exact(s, next_prime(p)) && next_prime(p) > s.length() + 1) return p;
    throw DomainError("no buildable base cycle gives exact models for span " + std::to_string(s.span()) +
                      " (needs |s| < 2*p_next with p <= 23)");
}

// Preferred fitting stage: 17 for gaps, 13 for longer constellations, pushed
// later when the span needs it.
inline u64 default_model_stage(const Constellation& s) {
    return std::max<u64>(default_base_stage(s), s.length() == 1 ? 17 : 13);
}

inline PopulationVector base_population(const Constellation& s, CycleCache& cache, u64 p0 = 0) {
    if (p0 == 0) p0 = default_base_stage(s);
    return population_vector(cache.get(p0), s);
}

// a/b in canonical form; gmp's mpq arithmetic expects canonical operands.
inline mpq_class ratio(const mpz_class& a, const mpz_class& b) {
    mpq_class q(a, b);
    q.canonicalize();
    return q;
}

// ln(z) for z > 0; -inf for zero.
inline long double log_of(const mpz_class& z) {
    if (sgn(z) == 0) return -std::numeric_limits<long double>::infinity();
    signed long exp = 0;
    const double mant = mpz_get_d_2exp(&exp, z.get_mpz_t());
    return std::log(static_cast<long double>(mant)) + static_cast<long double>(exp) * std::log(2.0L);
}

// Rational to long double with a full 64-bit mantissa.
inline long double to_long_double(const mpq_class& q) {
    if (sgn(q) == 0) return 0.0L;
    mpz_class a = abs(q.get_num());
    mpz_class b = q.get_den();
    const long shift = 66 - (static_cast<long>(mpz_sizeinbase(a.get_mpz_t(), 2)) -
                             static_cast<long>(mpz_sizeinbase(b.get_mpz_t(), 2)));
    if (shift > 0)
        a <<= static_cast<mp_bitcnt_t>(shift);
    else
        b <<= static_cast<mp_bitcnt_t>(-shift);
    mpz_class quot = a / b;  // 65..67 bits
    long extra = static_cast<long>(mpz_sizeinbase(quot.get_mpz_t(), 2)) - 64;
    if (extra > 0) quot >>= static_cast<mp_bitcnt_t>(extra);
    const long double mant = static_cast<long double>(mpz_get_ui(quot.get_mpz_t()));
    const long double v = std::ldexp(mant, static_cast<int>(-shift + (extra > 0 ? extra : 0)));
    return sgn(q) < 0 ? -v : v;
}

}  // namespace sievedyn
