#include "copyscope/ablation.hpp"

#include <algorithm>
#include <cmath>

#include "copyscope/error.hpp"

namespace copyscope {

AblationReport ablate(const ValueTable& table) {
    const std::size_t n = table.player_count();
    if (n < 2) fail(ErrorKind::Argument, "ablation needs at least two players");
    if (n > kMaxEnumerablePlayers) fail(ErrorKind::Argument, "ablation is limited to 20 players");
    table.require_complete();

    AblationReport report;
    report.grand_raw = table.raw(table.grand());
    const auto ids = table.player_ids();
    for (std::size_t i = 0; i < n; ++i) {
        const Mask rest = table.grand() ^ (Mask{1} << i);
        double sum = 0.0;
        std::size_t count = 0;
        // Enumerates the nonempty submasks of `rest` in increasing order.
        for (Mask m = 1; m <= rest; ++m) {
            if ((m & ~rest) != 0) continue;
            sum += table.raw(m);
            ++count;
        }
        const double mean = sum / static_cast<double>(count);
        report.entries.push_back({ids[i], mean, mean - report.grand_raw, count});
    }
    std::sort(report.entries.begin(), report.entries.end(), [](const AblationEntry& a, const AblationEntry& b) {
        const double da = std::abs(a.deviation);
        const double db = std::abs(b.deviation);
        if (da != db) return da > db;
        return a.player < b.player;
    });
    return report;
}

} // namespace copyscope
