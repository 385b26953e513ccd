#pragma once

// Population dynamics across sieve stages.
//
// For a constellation s of length J with |s| < 2 p_next, each driving term of
// length j in G(p#) spawns p_next images in G(p_next#): J+1 are destroyed by
// boundary fusions, j-J are demoted to length j-1 by interior fusions and the
// remaining p_next-j-1 survive. Hence
//
//     n_j' = (p_next - j - 1) n_j + (j + 1 - J) n_{j+1}.
//
// Normalising every length by prod (q-J-1) gives relative populations w whose
// step matrix is I - A/(q-J-1) with the constant matrix
// A = diag(0..K-1) - superdiag(1..K-1); the steps commute, so
//
//     w_J(p) = w_inf - l_2 lambda_2(p) + l_3 lambda_3(p) - ...
//     lambda_i(p) = prod_{q=p_start}^{p} (q-J-i)/(q-J-1).

#include <gmpxx.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sievedyn/constellation.hpp"
#include "sievedyn/cycle_cache.hpp"
#include "sievedyn/errors.hpp"
#include "sievedyn/population.hpp"
#include "sievedyn/primes.hpp"

namespace sievedyn {

inline PopulationVector transfer_step(const PopulationVector& v, u64 p_next) {
    const unsigned J = v.J();
    if (p_next <= static_cast<u64>(J) + 1)
        throw DomainError("transfer_step: stage too early, p_next=" + std::to_string(p_next) + " <= J+1");
    PopulationVector out{v.s, p_next, v.n, v.exact && transfer_exact(v.s, p_next)};
    const std::size_t K = v.n.size();
    for (std::size_t k = 0; k < K; ++k) {
        const u64 j = J + k;
        const u64 keep = p_next > j + 1 ? p_next - j - 1 : 0;
        out.n[k] = v.n[k] * keep;
        if (k + 1 < K) out.n[k] += v.n[k + 1] * static_cast<unsigned long>(k + 1);
    }
    return out;
}

// Iterates transfer_step over every prime in (v.p, p_target].
inline PopulationVector evolve(PopulationVector v, u64 p_target, u64 prime_budget = kDefaultPrimeBudget) {
    detail::require(p_target >= v.p, "evolve: target stage precedes the population stage");
    if (p_target == v.p) return v;
    detail::require(is_prime(p_target), "evolve: target stage must be prime");
    if (p_target > prime_budget) throw BudgetError("evolve: target stage beyond prime budget");
    PrimeStream ps(v.p + 1, p_target);
    while (auto q = ps.next()) v = transfer_step(v, *q);
    return v;
}

struct RelativePopulation {
    Constellation s;
    u64 p = 0;
    std::vector<long double> w;  // w[k] <-> j = J + k
};

// ln prod_{J+1 < q <= p} (q - J - 1)
inline long double log_normalizer(unsigned J, u64 p) {
    long double acc = 0;
    if (p <= J + 1) return acc;
    PrimeStream ps(J + 2, p);
    while (auto q = ps.next()) acc += std::log(static_cast<long double>(*q - J - 1));
    return acc;
}

// Every length normalised by the constellation's own prod (q-J-1).
inline RelativePopulation relative_population(const PopulationVector& v) {
    const long double norm = log_normalizer(v.J(), v.p);
    RelativePopulation r{v.s, v.p, {}};
    for (const auto& n : v.n) r.w.push_back(sgn(n) == 0 ? 0.0L : std::exp(log_of(n) - norm));
    return r;
}

namespace detail {

inline mpz_class exact_normalizer(unsigned J, u64 p) {
    mpz_class d = 1;
    for (u64 q = J + 2; q <= p; ++q)
        if (is_prime(q)) d *= static_cast<unsigned long>(q - J - 1);
    return d;
}

// Odd primes dividing some difference of boundary points.
inline std::vector<u64> boundary_difference_primes(const Constellation& s) {
    const auto b = s.boundary_points();
    std::vector<u64> out;
    for (u64 q = 3; q <= s.span(); q += 2) {
        if (!is_prime(q)) continue;
        bool divides = false;
        for (std::size_t x = 0; x < b.size() && !divides; ++x)
            for (std::size_t y = x + 1; y < b.size() && !divides; ++y) divides = (b[y] - b[x]) % q == 0;
        if (divides) out.push_back(q);
    }
    return out;
}

}  // namespace detail

// Asymptotic relative population, prod_{p | Q} (p - nu_s(p)) / max(1, p-J-1).
inline mpq_class asymptotic_w_exact(const Constellation& s) {
    if (!is_admissible(s)) throw DomainError("asymptotic_w: constellation " + s.key() + " is inadmissible");
    mpq_class w = 1;
    for (u64 q : detail::boundary_difference_primes(s)) {
        const unsigned covered = nu(s, q);
        if (covered >= q) throw DomainError("asymptotic_w: constellation " + s.key() + " is inadmissible");
        const long den = std::max<long>(1, static_cast<long>(q) - static_cast<long>(s.length()) - 1);
        w *= ratio(static_cast<long>(q - covered), den);
    }
    w.canonicalize();
    return w;
}

inline long double asymptotic_w(const Constellation& s) { return to_long_double(asymptotic_w_exact(s)); }

inline constexpr const char* kLambdaConvention =
    "uniform: w_j = n_j / prod_{J+1<q<=p}(q-J-1) for all j; lambda_i = prod_{q=p_start}^{p}(q-J-i)/(q-J-1)";

struct ModelCoefficients {
    Constellation s;
    u64 p0 = 0;       // base stage, lambda = 1
    u64 p_start = 0;  // first prime in the lambda products
    long double w_inf = 0;
    std::vector<long double> l;  // l[k] <-> l_{k+2}
    std::vector<u64> stages_used;
    long double residual = 0;  // max relative error at held-out stages
    std::string lambda_convention = kLambdaConvention;

    unsigned J() const { return s.length(); }
};

namespace detail {

struct ExactStage {
    u64 p;
    mpq_class w;                    // w_J(p)
    std::vector<mpq_class> lambda;  // lambda_i(p), i = 2..K
};

// Exact (w_J, lambda_2..lambda_K) at `count` consecutive stages from base.p.
inline std::vector<ExactStage> exact_stages(const PopulationVector& base, std::size_t count) {
    const unsigned J = base.J();
    const std::size_t K = base.n.size();
    PopulationVector v = base;
    mpz_class norm = exact_normalizer(J, base.p);
    std::vector<mpq_class> lambda(K > 0 ? K - 1 : 0, mpq_class(1));
    std::vector<ExactStage> out;
    while (true) {
        out.push_back(ExactStage{v.p, ratio(v.n[0], norm), lambda});
        if (out.size() == count) break;
        const u64 q = next_prime(v.p);
        ensure(transfer_exact(v.s, q), "exact_stages: transfer left the exact range");
        v = transfer_step(v, q);
        norm *= static_cast<unsigned long>(q - J - 1);
        for (std::size_t i = 2; i <= K; ++i) {
            lambda[i - 2] *= ratio(static_cast<long>(q - J - i), static_cast<long>(q - J - 1));
        }
    }
    return out;
}

// Gauss-Jordan over the rationals; nullopt when singular.
inline std::optional<std::vector<mpq_class>> solve_exact(std::vector<std::vector<mpq_class>> a,
                                                         std::vector<mpq_class> b) {
    const std::size_t m = b.size();
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        while (piv < m && sgn(a[piv][col]) == 0) ++piv;
        if (piv == m) return std::nullopt;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col || sgn(a[r][col]) == 0) continue;
            const mpq_class f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < m; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<mpq_class> x(m);
    for (std::size_t i = 0; i < m; ++i) x[i] = b[i] / a[i][i];
    return x;
}

inline long double eval_model(const ModelCoefficients& m, const std::vector<long double>& lambda) {
    long double w = m.w_inf;
    for (std::size_t k = 0; k < m.l.size(); ++k) w += (k % 2 == 0 ? -1.0L : 1.0L) * m.l[k] * lambda[k];
    return w;
}

}  // namespace detail

// Fits l_2..l_K from exact relative populations at consecutive stages starting
// at p0 (w_inf comes from the closed form), then checks held-out stages.
inline ModelCoefficients fit_coefficients(const Constellation& s, u64 p0, CycleCache& cache,
                                          std::size_t held_out = 4) {
    detail::require(is_admissible(s), "fit_coefficients: " + s.key() + " is inadmissible");
    detail::require(is_prime(p0), "fit_coefficients: base stage must be prime");
    const u64 p_start = next_prime(p0);
    detail::require(transfer_exact(s, p_start), "fit_coefficients: span " + std::to_string(s.span()) +
                                                    " needs a base with 2*p_next > |s|");
    detail::require(p_start > s.length() + 1, "fit_coefficients: base stage too early for this length");

    const PopulationVector base = population_vector(cache.get(p0), s);
    const std::size_t unknowns = base.n.size() - 1;
    const mpq_class w_inf = asymptotic_w_exact(s);
    constexpr std::size_t kMaxShifts = 3;
    const auto stages = detail::exact_stages(base, unknowns + held_out + kMaxShifts);

    ModelCoefficients m{s, p0, p_start, to_long_double(w_inf), {}, {}, 0, kLambdaConvention};
    std::optional<std::vector<mpq_class>> sol;
    std::size_t offset = 0;
    for (; offset <= kMaxShifts; ++offset) {
        std::vector<std::vector<mpq_class>> a(unknowns, std::vector<mpq_class>(unknowns));
        std::vector<mpq_class> b(unknowns);
        for (std::size_t t = 0; t < unknowns; ++t) {
            const auto& st = stages[offset + t];
            for (std::size_t k = 0; k < unknowns; ++k) a[t][k] = (k % 2 == 0 ? -1 : 1) * st.lambda[k];
            b[t] = st.w - w_inf;
        }
        sol = detail::solve_exact(std::move(a), std::move(b));
        if (sol) break;
    }
    if (!sol) throw InvariantError("fit_coefficients: singular system for every stage window");
    for (const auto& x : *sol) m.l.push_back(to_long_double(x));
    for (std::size_t t = 0; t < unknowns; ++t) m.stages_used.push_back(stages[offset + t].p);

    long double worst = 0;
    for (std::size_t t = offset + unknowns; t < offset + unknowns + held_out; ++t) {
        std::vector<long double> lam;
        for (const auto& x : stages[t].lambda) lam.push_back(to_long_double(x));
        const long double exact = to_long_double(stages[t].w);
        const long double fitted = detail::eval_model(m, lam);
        worst = std::max(worst, std::fabs(fitted - exact) / std::fabs(exact));
    }
    m.residual = worst;
    return m;
}

inline ModelCoefficients fit_coefficients(const Constellation& s, u64 p0) {
    CycleCache cache;
    return fit_coefficients(s, p0, cache);
}

// Exact lambda_2..lambda_K at stage p for this model's p_start.
inline std::vector<long double> model_lambdas(const ModelCoefficients& m, u64 p) {
    std::vector<LambdaProduct> prods;
    for (std::size_t k = 0; k < m.l.size(); ++k) prods.emplace_back(m.J(), static_cast<unsigned>(k + 2));
    if (p >= m.p_start) {
        PrimeStream ps(m.p_start, p);
        while (auto q = ps.next())
            for (auto& pr : prods) pr.include(*q);
    }
    std::vector<long double> out;
    for (const auto& pr : prods) out.push_back(pr.value());
    return out;
}

// w_J at stage p using the exact eigenvalue products.
inline long double w_at_stage(const ModelCoefficients& m, u64 p) {
    detail::require(p >= m.p0, "w_at_stage: stage precedes the model base");
    return detail::eval_model(m, model_lambdas(m, p));
}

// Closed form in the single parameter lambda, with lambda_i ~ lambda^(i-1).
inline long double w_of_lambda(const ModelCoefficients& m, long double lam) {
    detail::require(lam >= 0.0L && lam <= 1.0L, "w_of_lambda: lambda must lie in [0,1]");
    long double w = m.w_inf;
    long double pw = 1;
    for (std::size_t k = 0; k < m.l.size(); ++k) {
        pw *= lam;
        w += (k % 2 == 0 ? -1.0L : 1.0L) * m.l[k] * pw;
    }
    return w;
}

// Re-expresses the same model with base stage new_p0 (lambda = 1 there).
inline ModelCoefficients rebase(const ModelCoefficients& m, u64 new_p0) {
    detail::require(new_p0 >= m.p0 && is_prime(new_p0), "rebase: new base must be a prime at or after the old one");
    ModelCoefficients out = m;
    const auto lam = model_lambdas(m, new_p0);
    for (std::size_t k = 0; k < out.l.size(); ++k) out.l[k] *= lam[k];
    out.p0 = new_p0;
    out.p_start = next_prime(new_p0);
    return out;
}

// delta_s = n_{J+1} / n_J at the population's stage.
inline long double delta(const PopulationVector& v) {
    if (sgn(v.n[0]) == 0)
        throw PreconditionError("delta: constellation " + v.s.key() + " absent at stage " + std::to_string(v.p));
    if (v.n.size() < 2) return 0.0L;
    return to_long_double(ratio(v.n[1], v.n[0]));
}

inline long double delta(const Constellation& s, u64 p, CycleCache& cache) {
    const u64 p0 = std::min<u64>(default_base_stage(s), p);
    return delta(evolve(base_population(s, cache, p0), p));
}

// Root of w_a(lambda) - w_b(lambda) in (0,1) by bisection.
inline long double crossing_lambda(const ModelCoefficients& a, const ModelCoefficients& b,
                                   long double tol = 1e-6L) {
    detail::require(a.J() == b.J() && a.p_start == b.p_start,
                    "crossing_lambda: models must share length and lambda base");
    auto diff = [&](long double lam) { return w_of_lambda(a, lam) - w_of_lambda(b, lam); };
    constexpr int kGrid = 4096;
    long double lo = 0, hi = 0;
    bool found = false;
    long double prev_x = 1e-12L, prev_d = diff(prev_x);
    for (int i = 1; i <= kGrid && !found; ++i) {
        const long double x = i == kGrid ? 1.0L - 1e-12L : static_cast<long double>(i) / kGrid;
        const long double d = diff(x);
        if ((prev_d < 0 && d > 0) || (prev_d > 0 && d < 0)) {
            lo = prev_x;
            hi = x;
            found = true;
        }
        prev_x = x;
        prev_d = d;
    }
    if (!found) throw DomainError("crossing_lambda: no crossing of " + a.s.key() + " and " + b.s.key() + " in (0,1)");
    const bool lo_neg = diff(lo) < 0;
    while (hi - lo > tol) {
        const long double mid = (lo + hi) / 2;
        ((diff(mid) < 0) == lo_neg ? lo : hi) = mid;
    }
    return (lo + hi) / 2;
}

// Floating-point evolution for stages far beyond exact integer reach. Tracks
// relative populations plus ln of the normaliser and of p#, so n_j and p# are
// recovered in log space.
struct ScaledPopulation {
    Constellation s;
    u64 p = 0;
    std::vector<long double> w;
    long double log_norm = 0;       // ln prod_{J+1<q<=p}(q-J-1)
    long double log_primorial = 0;  // ln p#

    unsigned J() const { return s.length(); }
    long double log_n(unsigned k = 0) const {
        return w[k] > 0 ? std::log(w[k]) + log_norm : -std::numeric_limits<long double>::infinity();
    }
};

inline ScaledPopulation to_scaled(const PopulationVector& v) {
    ScaledPopulation sp{v.s, v.p, {}, log_normalizer(v.J(), v.p), log_primorial(v.p).log_value};
    for (const auto& n : v.n) sp.w.push_back(sgn(n) == 0 ? 0.0L : std::exp(log_of(n) - sp.log_norm));
    return sp;
}

inline void scaled_step(ScaledPopulation& sp, u64 p_next) {
    const unsigned J = sp.J();
    if (p_next <= static_cast<u64>(J) + 1) throw DomainError("scaled_step: stage too early");
    const long double den = static_cast<long double>(p_next - J - 1);
    const std::size_t K = sp.w.size();
    for (std::size_t k = 0; k < K; ++k) {
        const u64 j = J + k;
        const long double keep = p_next > j + 1 ? static_cast<long double>(p_next - j - 1) : 0.0L;
        long double v = keep * sp.w[k];
        if (k + 1 < K) v += static_cast<long double>(k + 1) * sp.w[k + 1];
        sp.w[k] = v / den;
    }
    sp.log_norm += std::log(den);
    sp.log_primorial += std::log(static_cast<long double>(p_next));
    sp.p = p_next;
}

inline void evolve_scaled(ScaledPopulation& sp, u64 p_target, u64 prime_budget = kDefaultPrimeBudget) {
    detail::require(p_target >= sp.p, "evolve_scaled: target stage precedes the population stage");
    if (p_target == sp.p) return;
    detail::require(is_prime(p_target), "evolve_scaled: target stage must be prime");
    if (p_target > prime_budget) throw BudgetError("evolve_scaled: target stage beyond prime budget");
    PrimeStream ps(sp.p + 1, p_target);
    while (auto q = ps.next()) scaled_step(sp, *q);
}

}  // namespace sievedyn
