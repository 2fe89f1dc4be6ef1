#pragma once

#include <string>
#include <vector>

#include "copyscope/game.hpp"

namespace copyscope {

struct AblationEntry {
    std::string player;
    double mean_raw_without = 0.0; // mean raw score over nonempty coalitions excluding the player
    double deviation = 0.0;        // mean_raw_without - raw(grand)
    std::size_t coalitions = 0;    // 2^(N-1) - 1
};

struct AblationReport {
    double grand_raw = 0.0;
    std::vector<AblationEntry> entries; // sorted by |deviation| descending, then id
    bool baseline_excluded = true;      // the empty coalition never enters a mean
};

// Dropout ablation over raw scores. Requires a complete table with N >= 2.
AblationReport ablate(const ValueTable& table);

} // namespace copyscope
