#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sievedyn/errors.hpp"
#include "sievedyn/primes.hpp"

namespace sievedyn {

// A run of consecutive gaps. Length J = number of gaps, span |s| = their sum.
class Constellation {
  public:
    explicit Constellation(std::vector<std::uint32_t> gaps) : gaps_(std::move(gaps)) {
        detail::require(!gaps_.empty(), "constellation needs at least one gap");
        for (auto g : gaps_)
            detail::require(g >= 2 && g % 2 == 0,
                            "constellation gaps must be even and >= 2, got " + std::to_string(g));
    }

    // Accepts "2,4", "2-4" or "2 4".
    static Constellation parse(std::string_view text) {
        std::vector<std::uint32_t> gaps;
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && (text[i] == ',' || text[i] == '-' || text[i] == ' ')) ++i;
            if (i == text.size()) break;
            std::uint32_t v = 0;
            auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
            if (ec != std::errc{}) throw PreconditionError("cannot parse constellation '" + std::string(text) + "'");
            gaps.push_back(v);
            i = static_cast<std::size_t>(ptr - text.data());
        }
        return Constellation(std::move(gaps));
    }

    std::span<const std::uint32_t> gaps() const { return gaps_; }
    unsigned length() const { return static_cast<unsigned>(gaps_.size()); }
    u64 span() const { return std::accumulate(gaps_.begin(), gaps_.end(), u64{0}); }
    // Longest possible driving term: all gaps equal to 2.
    unsigned max_driving_length() const { return static_cast<unsigned>(span() / 2); }

    // Partial sums {0, g1, g1+g2, ..., span}; J+1 strictly increasing points.
    std::vector<u64> boundary_points() const {
        std::vector<u64> b{0};
        for (auto g : gaps_) b.push_back(b.back() + g);
        return b;
    }

    Constellation reversed() const { return Constellation({gaps_.rbegin(), gaps_.rend()}); }

    // "2-4-6"; safe in file names and CSV fields.
    std::string key() const {
        std::string out;
        for (std::size_t i = 0; i < gaps_.size(); ++i) {
            if (i) out += '-';
            out += std::to_string(gaps_[i]);
        }
        return out;
    }

    bool operator==(const Constellation&) const = default;
    auto operator<=>(const Constellation& other) const { return gaps_ <=> other.gaps_; }

  private:
    std::vector<std::uint32_t> gaps_;
};

// Number of residue classes mod p hit by the boundary points of s.
inline unsigned nu(const Constellation& s, u64 p) {
    detail::require(p >= 2, "nu: modulus must be at least 2");
    std::set<u64> residues;
    for (auto b : s.boundary_points()) residues.insert(b % p);
    return static_cast<unsigned>(residues.size());
}

// Admissible iff no prime has all its residues covered; primes above J+1
// cannot be covered by J+1 points.
inline bool is_admissible(const Constellation& s) {
    for (u64 p = 2; p <= s.length() + 1; ++p)
        if (is_prime(p) && nu(s, p) >= p) return false;
    return true;
}

// All admissible constellations with length <= max_length and span <= max_span,
// ordered by (length, gaps).
inline std::vector<Constellation> admissible_constellations(unsigned max_length, u64 max_span) {
    std::vector<Constellation> out;
    std::vector<std::uint32_t> cur;
    auto extend = [&](auto&& self, u64 span, unsigned target_len) -> void {
        if (cur.size() == target_len) {
            Constellation c(cur);
            if (is_admissible(c)) out.push_back(std::move(c));
            return;
        }
        for (std::uint32_t g = 2; span + g <= max_span; g += 2) {
            cur.push_back(g);
            self(self, span + g, target_len);
            cur.pop_back();
        }
    };
    for (unsigned len = 1; len <= max_length; ++len) extend(extend, 0, len);
    return out;
}

}  // namespace sievedyn
