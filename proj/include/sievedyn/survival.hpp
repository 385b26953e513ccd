#pragma once

// Intervals of survival [p_k^2, p_{k+1}^2], expected survivors and quadratic
// densities from the population models, and the sieved observations they are
// compared against.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sievedyn/constellation.hpp"
#include "sievedyn/cycle_cache.hpp"
#include "sievedyn/errors.hpp"
#include "sievedyn/parallel.hpp"
#include "sievedyn/popmodel.hpp"
#include "sievedyn/population.hpp"
#include "sievedyn/primes.hpp"

namespace sievedyn {

struct SurvivalInterval {
    u64 p_k = 0;
    u64 p_next = 0;
    u64 g3 = 0;
    u64 lo = 0;  // p_k^2
    u64 hi = 0;  // p_next^2
    u64 width() const { return hi - lo; }
};

inline SurvivalInterval delta_h(u64 p_k, u64 p_next) {
    detail::require(p_next > p_k && p_next <= 4'294'967'295ULL, "delta_h: need p_k < p_next < 2^32");
    return {p_k, p_next, p_next - p_k, p_k * p_k, p_next * p_next};
}

inline SurvivalInterval delta_h(u64 p_k) {
    detail::require(is_prime(p_k), "delta_h: p_k must be prime, got " + std::to_string(p_k));
    return delta_h(p_k, next_prime(p_k));
}

// E_s = n_{s,J}(p_k#) |dH| / p_k#, in log space.
inline long double expected_survivors(const ScaledPopulation& sp, const SurvivalInterval& iv) {
    detail::require(sp.p == iv.p_k, "expected_survivors: population stage differs from p_k");
    if (!(sp.w[0] > 0)) return 0.0L;
    return std::exp(sp.log_n(0) + std::log(static_cast<long double>(iv.width())) - sp.log_primorial);
}

inline long double expected_survivors(const PopulationVector& v, const SurvivalInterval& iv) {
    return expected_survivors(to_scaled(v), iv);
}

inline long double quadratic_density(const ScaledPopulation& sp, const SurvivalInterval& iv) {
    return expected_survivors(sp, iv) / static_cast<long double>(iv.g3);
}

inline long double quadratic_density(const PopulationVector& v, const SurvivalInterval& iv) {
    return quadratic_density(to_scaled(v), iv);
}

// Base stage for modelling s: exact when some buildable cycle allows it,
// otherwise G(23#) with the model flagged non-exact.
inline u64 model_base_stage(const Constellation& s) {
    try {
        return default_base_stage(s);
    } catch (const DomainError&) {
        return 23;
    }
}

// Model populations of s at each of the ascending prime `stages`. Stages
// below the base come straight from their cycles.
inline std::vector<ScaledPopulation> model_populations(const Constellation& s, const std::vector<u64>& stages,
                                                       CycleCache& cache, u64 prime_budget = kDefaultPrimeBudget) {
    detail::require(std::is_sorted(stages.begin(), stages.end()), "model_populations: stages must ascend");
    const u64 base = model_base_stage(s);
    std::vector<ScaledPopulation> out;
    std::optional<ScaledPopulation> cur;
    for (u64 p : stages) {
        if (p < base) {
            out.push_back(to_scaled(population_vector(cache.get(p), s)));
            continue;
        }
        if (!cur) cur = to_scaled(population_vector(cache.get(base), s));
        evolve_scaled(*cur, p, prime_budget);
        out.push_back(*cur);
    }
    return out;
}

// Model eta for several constellations at one stage.
inline std::vector<long double> eta_table(u64 p_k, const std::vector<Constellation>& targets, CycleCache& cache,
                                          u64 prime_budget = kDefaultPrimeBudget) {
    const SurvivalInterval iv = delta_h(p_k);
    std::vector<long double> out;
    for (const auto& s : targets) out.push_back(quadratic_density(model_populations(s, {p_k}, cache, prime_budget)[0], iv));
    return out;
}

// Occurrences of each target as consecutive prime gaps with every prime of
// the window inside [lo, hi]. Windows are attributed to the interval holding
// their first prime, so adjacent intervals never share a window.
inline std::vector<u64> observed_counts(const std::vector<Constellation>& targets, const SurvivalInterval& iv,
                                        const PrimeTable& base, u64 sieve_budget = kDefaultSieveBudget) {
    if (iv.width() > sieve_budget)
        throw BudgetError("observed_counts: interval width " + std::to_string(iv.width()) + " over sieve budget");
    unsigned max_len = 0;
    for (const auto& s : targets) max_len = std::max(max_len, s.length());
    std::vector<u64> counts(targets.size(), 0);
    std::vector<u64> ring(max_len + 1, 0);  // last primes, ring[seen % size]
    u64 seen = 0;
    const std::size_t R = ring.size();
    for_each_prime(iv.lo, iv.hi + 1, base, [&](u64 q) {
        ring[seen % R] = q;
        ++seen;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const auto g = targets[t].gaps();
            const std::size_t J = g.size();
            if (seen < J + 1) continue;
            bool match = true;
            for (std::size_t k = 0; k < J && match; ++k) {
                // k-th gap of the window ending at the newest prime
                const u64 a = ring[(seen - 1 - J + k) % R];
                const u64 b = ring[(seen - J + k) % R];
                match = b - a == g[k];
            }
            counts[t] += match;
        }
    });
    return counts;
}

inline u64 observed_counts(const Constellation& s, const SurvivalInterval& iv, const PrimeTable& base,
                           u64 sieve_budget = kDefaultSieveBudget) {
    return observed_counts(std::vector<Constellation>{s}, iv, base, sieve_budget)[0];
}

inline u64 observed_counts(const Constellation& s, const SurvivalInterval& iv) {
    return observed_counts(s, iv, primes_up_to(std::max<u64>(2, iv.p_next)));
}

struct SurvivalRecord {
    SurvivalInterval interval;
    Constellation s;
    long double expected = 0;
    long double eta_expected = 0;
    u64 observed = 0;
    long double eta_observed = 0;
};

struct SampleSummary {
    Constellation s;
    u64 n_samples = 0;
    long double mean_eta_obs = 0;
    long double std_eta_obs = 0;  // n-1 denominator
    long double mean_eta_model = 0;

    long double standard_error() const {
        return n_samples ? std_eta_obs / std::sqrt(static_cast<long double>(n_samples)) : 0.0L;
    }
};

struct SampleResult {
    std::vector<SurvivalRecord> records;  // sorted by (p_k, s)
    std::vector<SampleSummary> summary;   // one per target, sorted by s
};

struct SampleOptions {
    unsigned threads = 1;
    u64 sieve_budget = kDefaultSieveBudget;
    u64 prime_budget = kDefaultPrimeBudget;
};

// `count` consecutive intervals of survival, starting at the first prime >= p_lo.
inline SampleResult sample_run(u64 p_lo, u64 count, std::vector<Constellation> targets, CycleCache& cache,
                               const SampleOptions& opt = {}) {
    detail::require(p_lo >= 2, "sample_run: p_lo must be at least 2");
    detail::require(count > 0, "sample_run: need at least one interval");
    detail::require(!targets.empty(), "sample_run: no targets");
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    std::vector<u64> stages{next_prime(p_lo - 1)};
    while (stages.size() < count + 1) stages.push_back(next_prime(stages.back()));
    std::vector<SurvivalInterval> ivs;
    u64 total = 0;
    for (u64 k = 0; k < count; ++k) {
        ivs.push_back(delta_h(stages[k], stages[k + 1]));
        total += ivs.back().width();
    }
    if (total > opt.sieve_budget)
        throw BudgetError("sample_run: " + std::to_string(total) + " sieved integers over sieve budget " +
                          std::to_string(opt.sieve_budget));

    const PrimeTable base = primes_up_to(stages.back());
    std::vector<std::vector<u64>> observed(count);
    parallel_for(count, opt.threads, [&](std::size_t k) { observed[k] = observed_counts(targets, ivs[k], base); });

    stages.pop_back();
    SampleResult res;
    std::vector<std::vector<ScaledPopulation>> model;
    for (const auto& s : targets) model.push_back(model_populations(s, stages, cache, opt.prime_budget));
    for (u64 k = 0; k < count; ++k) {
        for (std::size_t t = 0; t < targets.size(); ++t) {
            SurvivalRecord r{ivs[k], targets[t], 0, 0, observed[k][t], 0};
            r.expected = expected_survivors(model[t][k], ivs[k]);
            r.eta_expected = r.expected / static_cast<long double>(ivs[k].g3);
            r.eta_observed = static_cast<long double>(r.observed) / static_cast<long double>(ivs[k].g3);
            res.records.push_back(std::move(r));
        }
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
        SampleSummary sm{targets[t], count, 0, 0, 0};
        for (u64 k = 0; k < count; ++k) {
            const auto& r = res.records[k * targets.size() + t];
            sm.mean_eta_obs += r.eta_observed;
            sm.mean_eta_model += r.eta_expected;
        }
        sm.mean_eta_obs /= static_cast<long double>(count);
        sm.mean_eta_model /= static_cast<long double>(count);
        long double ss = 0;
        for (u64 k = 0; k < count; ++k) {
            const long double d = res.records[k * targets.size() + t].eta_observed - sm.mean_eta_obs;
            ss += d * d;
        }
        sm.std_eta_obs = count > 1 ? std::sqrt(ss / static_cast<long double>(count - 1)) : 0.0L;
        res.summary.push_back(std::move(sm));
    }
    return res;
}

// f(p_k, J) = (g2 + g3) / (2 + g3/p_k) - (J + 1)
inline long double f_value(u64 p_prev, u64 p_k, u64 p_next, unsigned J) {
    const long double g2 = static_cast<long double>(p_k - p_prev);
    const long double g3 = static_cast<long double>(p_next - p_k);
    return (g2 + g3) / (2.0L + g3 / static_cast<long double>(p_k)) - static_cast<long double>(J + 1);
}

inline long double f_value(u64 p_k, unsigned J) {
    detail::require(p_k >= 5 && is_prime(p_k), "f_value: p_k must be a prime >= 5");
    return f_value(prev_prime(p_k), p_k, next_prime(p_k), J);
}

struct ConstraintPoint {
    u64 p_k = 0;
    u64 g2 = 0;
    u64 g3 = 0;
    unsigned J = 0;
    long double f = 0;
    std::optional<long double> delta;
    bool satisfied = false;
};

using DeltaProvider = std::function<std::optional<long double>(u64 p_k, unsigned J)>;

// Rows: consecutive primes in [p_lo, p_hi]; columns J = 1..J_max.
inline std::vector<std::vector<ConstraintPoint>> constraint_chart(u64 p_lo, u64 p_hi, unsigned J_max,
                                                                  const DeltaProvider& delta_of = {}) {
    detail::require(J_max >= 1, "constraint_chart: J_max must be at least 1");
    detail::require(p_hi >= p_lo, "constraint_chart: p_hi < p_lo");
    p_lo = std::max<u64>(p_lo, 5);
    std::vector<std::vector<ConstraintPoint>> rows;
    const u64 first = next_prime(p_lo - 1);
    if (first > p_hi) return rows;
    u64 prev = prev_prime(first), cur = first;
    PrimeStream ps(cur + 1, next_prime(p_hi));
    while (auto nxt = ps.next()) {
        std::vector<ConstraintPoint> row;
        for (unsigned J = 1; J <= J_max; ++J) {
            ConstraintPoint c{cur, cur - prev, *nxt - cur, J, f_value(prev, cur, *nxt, J), std::nullopt, false};
            if (delta_of) c.delta = delta_of(cur, J);
            c.satisfied = c.f + c.delta.value_or(0.0L) > 0;
            row.push_back(c);
        }
        rows.push_back(std::move(row));
        prev = cur;
        cur = *nxt;
        if (cur > p_hi) break;
    }
    return rows;
}

struct EtaRatioCheck {
    long double ratio = 0;           // eta(p_k) / eta(p_{k-1})
    long double constraint_lhs = 0;  // g2 + g3
    long double constraint_rhs = 0;  // (J + 1 - delta) (2 + g3/p_k)
    bool ratio_ge_one = false;
    bool constraint_holds = false;
    bool agree = false;
};

// Both sides of the eta-ratio criterion, computed independently and exactly.
// prev and cur hold the populations at p_{k-1} and p_k.
inline EtaRatioCheck eta_ratio_check(const PopulationVector& prev, const PopulationVector& cur) {
    detail::require(prev.s == cur.s, "eta_ratio_check: populations of different constellations");
    detail::require(cur.p > prev.p && next_prime(prev.p) == cur.p, "eta_ratio_check: stages must be consecutive primes");
    if (sgn(prev.n[0]) == 0)
        throw PreconditionError("eta_ratio_check: " + prev.s.key() + " absent at stage " + std::to_string(prev.p));
    const u64 pk = cur.p, pprev = prev.p, pnext = next_prime(pk);
    const long J = cur.J();

    // eta(p) = n_J(p#) (p_next + p) / p#, so the primorials cancel down to p_k.
    const mpq_class eta_ratio = ratio(cur.n[0] * static_cast<unsigned long>(pnext + pk),
                                      prev.n[0] * static_cast<unsigned long>(pk) * static_cast<unsigned long>(pk + pprev));
    const mpq_class delta = prev.n.size() > 1 ? ratio(prev.n[1], prev.n[0]) : mpq_class(0);
    const mpq_class lhs(static_cast<long>(pnext - pprev));
    mpq_class rhs = (mpq_class(J + 1) - delta) * (2 + ratio(static_cast<long>(pnext - pk), static_cast<long>(pk)));
    rhs.canonicalize();

    EtaRatioCheck r;
    r.ratio = to_long_double(eta_ratio);
    r.constraint_lhs = to_long_double(lhs);
    r.constraint_rhs = to_long_double(rhs);
    r.ratio_ge_one = eta_ratio >= 1;
    r.constraint_holds = lhs >= rhs;
    r.agree = r.ratio_ge_one == r.constraint_holds;
    return r;
}

// True populations of one constellation at consecutive stages: read from the
// cycles up to the exact base stage, then carried by exact transfer steps.
class ExactChain {
  public:
    ExactChain(Constellation s, CycleCache& cache) : s_(std::move(s)), cache_(cache), base_(default_base_stage(s_)) {}

    // Stages must be requested in ascending order.
    const PopulationVector& at(u64 p) {
        detail::require(is_prime(p) && p >= 3, "ExactChain: stage must be an odd prime");
        if (cur_ && cur_->p == p) return *cur_;
        detail::require(!cur_ || p > cur_->p, "ExactChain: stages must ascend");
        if (p <= base_)
            cur_ = population_vector(cache_.get(p), s_);
        else {
            if (!cur_ || cur_->p < base_) cur_ = population_vector(cache_.get(base_), s_);
            cur_ = evolve(std::move(*cur_), p);
        }
        detail::ensure(cur_->exact, "ExactChain: left the exact range");
        return *cur_;
    }

    u64 base_stage() const { return base_; }

  private:
    Constellation s_;
    CycleCache& cache_;
    u64 base_;
    std::optional<PopulationVector> cur_;
};

struct Theorem1Violation {
    unsigned g;
    u64 p_k;
};

struct Theorem1Sweep {
    u64 comparisons = 0;
    std::vector<Theorem1Violation> violations;
};

// eta_g(p_k) > eta_g(p_{k-1}) over consecutive primes in [p_lo, p_hi] for every
// even g <= max_gap already present at p_{k-1}, compared as exact integers:
// n(p_k#)(p_{k+1} + p_k) > n(p_{k-1}#) p_k (p_k + p_{k-1}).
inline Theorem1Sweep theorem1_sweep(unsigned max_gap, u64 p_lo, u64 p_hi, CycleCache& cache) {
    detail::require(p_lo >= 7 && is_prime(p_lo), "theorem1_sweep: p_lo must be a prime >= 7");
    Theorem1Sweep out;
    std::vector<u64> stages{prev_prime(p_lo)};
    for (u64 p = p_lo; p <= p_hi; p = next_prime(p)) stages.push_back(p);
    stages.push_back(next_prime(stages.back()));
    for (unsigned g = 2; g <= max_gap; g += 2) {
        ExactChain chain(Constellation({g}), cache);
        mpz_class prev = chain.at(stages[0]).n[0];
        for (std::size_t k = 1; k + 1 < stages.size(); ++k) {
            const u64 pp = stages[k - 1], pk = stages[k], pn = stages[k + 1];
            mpz_class cur = chain.at(pk).n[0];
            if (sgn(prev) > 0) {
                ++out.comparisons;
                const mpz_class lhs = cur * static_cast<unsigned long>(pn + pk);
                const mpz_class rhs = prev * static_cast<unsigned long>(pk) * static_cast<unsigned long>(pk + pp);
                if (!(lhs > rhs)) out.violations.push_back({g, pk});
            }
            prev = std::move(cur);
        }
    }
    return out;
}

}  // namespace sievedyn
