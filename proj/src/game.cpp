#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "copyscope/error.hpp"
#include "copyscope/game.hpp"
#include "copyscope/parallel.hpp"

namespace copyscope {

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::ShapleyExact: return "ShapleyExact";
        case Method::ShapleySampled: return "ShapleySampled";
        case Method::Loo: return "LOO";
    }
    return "";
}

std::string_view to_string(Normalization n) noexcept {
    switch (n) {
        case Normalization::None: return "None";
        case Normalization::ShareOfTotal: return "ShareOfTotal";
        case Normalization::MinMax: return "MinMax";
    }
    return "";
}

Normalization parse_normalization(std::string_view s) {
    if (s == "share" || s == "ShareOfTotal") return Normalization::ShareOfTotal;
    if (s == "minmax" || s == "MinMax") return Normalization::MinMax;
    if (s == "none" || s == "None") return Normalization::None;
    fail(ErrorKind::Argument, "unknown normalization mode '" + std::string(s) + "'");
}

double AttributionResult::value(std::string_view id) const {
    for (std::size_t i = 0; i < players.size(); ++i) {
        if (players[i] == id) return values[i];
    }
    fail(ErrorKind::Lookup, "no attribution for player '" + std::string(id) + "'");
}

double AttributionResult::total() const {
    return std::accumulate(values.begin(), values.end(), 0.0);
}

std::vector<std::string> rank_players(const std::vector<std::string>& ids, const std::vector<double>& values) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return ids[a] < ids[b];
    });
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto i : order) out.push_back(ids[i]);
    return out;
}

namespace {

AttributionResult make_result(const ValueTable& table, Method method, std::vector<double> values) {
    AttributionResult r;
    r.method = method;
    r.orientation = table.orientation();
    r.players = table.player_ids();
    r.values = std::move(values);
    r.ranking = rank_players(r.players, r.values);
    return r;
}

// 1 / C(n-1, k) for k = 0..n-1, i.e. k!(n-1-k)!/(n-1)!.
std::vector<double> coalition_weights(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        double binom = 1.0;
        for (std::size_t j = 1; j <= k; ++j) binom = binom * static_cast<double>(n - 1 - k + j) / static_cast<double>(j);
        w[k] = 1.0 / std::round(binom);
    }
    return w;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Unbiased draw in [0, bound) by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

constexpr std::uint64_t kPermutationBlock = 1024;

} // namespace

AttributionResult shapley_exact(const ValueTable& table) {
    const std::size_t n = table.player_count();
    if (n == 0) fail(ErrorKind::Argument, "attribution requires at least one player");
    if (n > kMaxEnumerablePlayers) fail(ErrorKind::Argument, "exact Shapley is limited to 20 players");
    const auto u = table.utilities();
    const auto weight = coalition_weights(n);

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Mask bit = Mask{1} << i;
        double margin = 0.0;
        for (Mask m = 0; m < u.size(); ++m) {
            if (!(m & bit)) continue;
            const auto others = static_cast<std::size_t>(std::popcount(m)) - 1;
            margin += (u[m] - u[m ^ bit]) * weight[others];
        }
        values[i] = margin / static_cast<double>(n);
    }
    return make_result(table, Method::ShapleyExact, std::move(values));
}

AttributionResult shapley_sampled(const ValueTable& table, std::uint64_t permutations, std::uint64_t seed,
                                  unsigned threads) {
    const std::size_t n = table.player_count();
    if (n == 0) fail(ErrorKind::Argument, "attribution requires at least one player");
    if (permutations < 1) fail(ErrorKind::Argument, "permutation count must be >= 1");

    const std::uint64_t blocks = (permutations + kPermutationBlock - 1) / kPermutationBlock;
    std::vector<std::vector<double>> block_sum(blocks, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> block_sq(blocks, std::vector<double>(n, 0.0));
    const double base_utility = 0.0; // U(empty) is zero by construction

    parallel_for(blocks, threads, [&](std::size_t b) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(b)));
        std::vector<std::size_t> order(n);
        const std::uint64_t begin = b * kPermutationBlock;
        const std::uint64_t end = std::min(permutations, begin + kPermutationBlock);
        auto& sum = block_sum[b];
        auto& sq = block_sq[b];
        for (std::uint64_t p = begin; p < end; ++p) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[bounded(rng, i + 1)]);
            Mask m = 0;
            double prev = base_utility;
            for (std::size_t player : order) {
                m |= Mask{1} << player;
                const double cur = table.utility(m);
                const double margin = cur - prev;
                sum[player] += margin;
                sq[player] += margin * margin;
                prev = cur;
            }
        }
    });

    std::vector<double> sum(n, 0.0);
    std::vector<double> sq(n, 0.0);
    for (std::uint64_t b = 0; b < blocks; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            sum[i] += block_sum[b][i];
            sq[i] += block_sq[b][i];
        }
    }
    const double count = static_cast<double>(permutations);
    std::vector<double> mean(n);
    std::vector<double> se(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        mean[i] = sum[i] / count;
        if (permutations > 1) {
            const double var = std::max(0.0, (sq[i] - sum[i] * mean[i]) / (count - 1.0));
            se[i] = std::sqrt(var / count);
        }
    }
    auto r = make_result(table, Method::ShapleySampled, std::move(mean));
    r.std_error = std::move(se);
    r.seed = seed;
    r.permutations = permutations;
    return r;
}

AttributionResult loo(const ValueTable& table) {
    const std::size_t n = table.player_count();
    if (n == 0) fail(ErrorKind::Argument, "attribution requires at least one player");
    const Mask grand = table.grand();
    const double u_grand = table.utility(grand);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = u_grand - table.utility(grand ^ (Mask{1} << i));
    return make_result(table, Method::Loo, std::move(values));
}

AttributionResult normalize(const AttributionResult& result, Normalization mode) {
    if (result.values.empty()) fail(ErrorKind::Argument, "cannot normalize an empty attribution");
    AttributionResult out = result;
    out.normalization_fallback = false;
    out.normalization_degenerate = false;
    const auto& v = result.values;

    if (mode == Normalization::None) {
        out.normalization = Normalization::None;
        out.normalized = v;
        return out;
    }
    if (mode == Normalization::ShareOfTotal) {
        const bool nonneg = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
        const bool nonpos = std::all_of(v.begin(), v.end(), [](double x) { return x <= 0.0; });
        const double total = result.total();
        if ((nonneg || nonpos) && total != 0.0) {
            out.normalization = Normalization::ShareOfTotal;
            out.normalized.resize(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) out.normalized[i] = v[i] / total;
            return out;
        }
        out.normalization_fallback = true;
    }

    out.normalization = Normalization::MinMax;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    out.normalized.assign(v.size(), 0.0);
    if (*hi == *lo) {
        out.normalization_degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) out.normalized[i] = (v[i] - *lo) / (*hi - *lo);
    return out;
}

AxiomReport check_axioms(const ValueTable& table, const AttributionResult& result, const ValueTable* companion) {
    if (result.method != Method::ShapleyExact) {
        fail(ErrorKind::Argument, "axiom checks apply to exact Shapley results");
    }
    if (result.players != table.player_ids()) fail(ErrorKind::Argument, "attribution and table players differ");
    if (companion && companion->player_ids() != table.player_ids()) {
        fail(ErrorKind::Argument, "companion table declares different players");
    }

    const std::size_t n = table.player_count();
    const auto u = table.utilities();
    double scale = 0.0;
    for (double x : u) scale = std::max(scale, std::abs(x));

    AxiomReport rep;
    rep.grand_utility = u[table.grand()];
    rep.value_sum = result.total();
    rep.efficiency_tolerance = 1e-9 * scale;
    rep.efficiency = std::abs(rep.value_sum - rep.grand_utility) <= rep.efficiency_tolerance;

    for (std::size_t i = 0; i < n; ++i) {
        const Mask bit = Mask{1} << i;
        bool is_null = true;
        for (Mask m = 0; m < u.size() && is_null; ++m) {
            if (!(m & bit) && u[m | bit] != u[m]) is_null = false;
        }
        if (is_null) {
            rep.null_players.push_back(result.players[i]);
            if (std::abs(result.values[i]) > 1e-12) rep.null_player = false;
        }
    }

    const double symmetry_tol = 1e-12 * std::max(1.0, scale);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Mask bi = Mask{1} << i;
            const Mask bj = Mask{1} << j;
            bool symmetric = true;
            for (Mask m = 0; m < u.size() && symmetric; ++m) {
                if (!(m & (bi | bj)) && u[m | bi] != u[m | bj]) symmetric = false;
            }
            if (symmetric) {
                rep.symmetric_pairs.emplace_back(result.players[i], result.players[j]);
                if (std::abs(result.values[i] - result.values[j]) > symmetry_tol) rep.symmetry = false;
            }
        }
    }

    if (companion) {
        const auto other = shapley_exact(*companion);
        const auto combined = shapley_exact(sum_utilities(table, *companion));
        double comp_scale = scale;
        for (double x : companion->utilities()) comp_scale = std::max(comp_scale, std::abs(x));
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, std::abs(combined.values[i] - (result.values[i] + other.values[i])));
        }
        rep.additivity_max_error = worst;
        rep.additivity = worst <= 1e-9 * std::max(1.0, comp_scale);
    }
    return rep;
}

} // namespace copyscope
