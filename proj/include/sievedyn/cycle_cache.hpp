#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "sievedyn/cycle.hpp"
#include "sievedyn/cycle_file.hpp"

namespace sievedyn {

// Builds cycles on demand from the largest one already held, optionally
// persisting them as cycles/gcyc_p{p}.bin under a cache directory.
class CycleCache {
  public:
    explicit CycleCache(std::optional<std::filesystem::path> dir = std::nullopt,
                        u64 budget = kDefaultCycleBudget)
        : dir_(std::move(dir)), budget_(budget) {}

    const GapCycle& get(u64 p) {
        detail::require(p >= 3 && is_prime(p), "cycle stage must be an odd prime");
        if (auto it = cycles_.find(p); it != cycles_.end()) return *it->second;
        if (dir_) {
            const auto path = file_for(p);
            if (std::filesystem::exists(path)) {
                files_used_.push_back(path);
                return store(std::make_unique<GapCycle>(load_cycle(path)));
            }
        }
        GapCycle c = seed_cycle();
        // largest held cycle below p
        if (auto it = cycles_.lower_bound(p); it != cycles_.begin()) c = *std::prev(it)->second;
        while (c.p() < p) {
            c = next_cycle(c, budget_);
            if (c.p() < p && !cycles_.count(c.p())) store(std::make_unique<GapCycle>(c));
        }
        detail::require(c.p() == p, "cycle stage must be prime");
        if (dir_) {
            save_cycle(file_for(p), c);
            files_used_.push_back(file_for(p));
        }
        return store(std::make_unique<GapCycle>(std::move(c)));
    }

    std::filesystem::path file_for(u64 p) const {
        return *dir_ / "cycles" / ("gcyc_p" + std::to_string(p) + ".bin");
    }

    const std::vector<std::filesystem::path>& files_used() const { return files_used_; }
    u64 budget() const { return budget_; }

  private:
    const GapCycle& store(std::unique_ptr<GapCycle> c) {
        const u64 p = c->p();
        auto& slot = cycles_[p];
        slot = std::move(c);
        return *slot;
    }

    std::optional<std::filesystem::path> dir_;
    u64 budget_;
    std::map<u64, std::unique_ptr<GapCycle>> cycles_;
    std::vector<std::filesystem::path> files_used_;
};

}  // namespace sievedyn
