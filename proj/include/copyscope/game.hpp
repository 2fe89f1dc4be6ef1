#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace copyscope {

enum class ComponentKind { BaseModel, ControlNet, Lora, KeyPrompt };
enum class Orientation { LowerIsBetter, HigherIsBetter };

std::string_view to_string(ComponentKind kind) noexcept;
std::string_view to_string(Orientation o) noexcept;
ComponentKind parse_component_kind(std::string_view s);
Orientation parse_orientation(std::string_view s);

struct Player {
    std::string id;
    std::optional<ComponentKind> kind; // unknown when the table carries no manifest

    friend bool operator==(const Player&, const Player&) = default;
};

// Canonically sorted set of player ids; the empty coalition is the baseline
// pipeline.
class Coalition {
public:
    Coalition() = default;
    // Sorts the ids. Duplicate or empty ids are a schema error.
    explicit Coalition(std::vector<std::string> members);

    // Parses the semicolon-joined form used in value-table CSVs.
    static Coalition parse(std::string_view joined);

    [[nodiscard]] const std::vector<std::string>& members() const noexcept { return members_; }
    [[nodiscard]] bool empty() const noexcept { return members_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }
    [[nodiscard]] bool contains(std::string_view id) const;
    [[nodiscard]] std::string joined() const;

    friend auto operator<=>(const Coalition&, const Coalition&) = default;

private:
    std::vector<std::string> members_;
};

// Bit i of a mask refers to players()[i] (players are kept sorted by id).
using Mask = std::uint64_t;

inline constexpr std::size_t kMaxPlayers = 63;
inline constexpr std::size_t kMaxEnumerablePlayers = 20;

// Raw score per coalition, with the orientation-adjusted utility
// U(L) = raw(empty) - raw(L) (LowerIsBetter) or raw(L) - raw(empty).
class ValueTable {
public:
    ValueTable(std::vector<Player> players, Orientation orientation, std::string baseline_label = "baseline");

    [[nodiscard]] const std::vector<Player>& players() const noexcept { return players_; }
    [[nodiscard]] std::vector<std::string> player_ids() const;
    [[nodiscard]] std::size_t player_count() const noexcept { return players_.size(); }
    [[nodiscard]] Orientation orientation() const noexcept { return orientation_; }
    [[nodiscard]] const std::string& baseline_label() const noexcept { return baseline_label_; }
    [[nodiscard]] Mask grand() const noexcept;

    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view id) const;
    [[nodiscard]] Mask mask_of(const Coalition& c) const;
    [[nodiscard]] Coalition coalition_of(Mask m) const;

    void set(Mask m, double raw);
    void set(const Coalition& c, double raw) { set(mask_of(c), raw); }

    [[nodiscard]] bool contains(Mask m) const;
    [[nodiscard]] double raw(Mask m) const;
    [[nodiscard]] double raw(const Coalition& c) const { return raw(mask_of(c)); }
    [[nodiscard]] double utility(Mask m) const;
    [[nodiscard]] double utility(const Coalition& c) const { return utility(mask_of(c)); }

    [[nodiscard]] std::size_t entry_count() const noexcept;
    [[nodiscard]] std::vector<Mask> missing() const;
    [[nodiscard]] bool complete() const { return missing().empty(); }
    // Throws Completeness naming every absent coalition.
    void require_complete() const;

    // Dense U(mask) for all 2^N masks; requires a complete table.
    [[nodiscard]] std::vector<double> utilities() const;

    // HigherIsBetter table whose raw scores are this table's utilities.
    [[nodiscard]] ValueTable utility_table() const;

private:
    std::vector<Player> players_;
    Orientation orientation_;
    std::string baseline_label_;
    bool dense_;
    std::vector<double> dense_values_; // NaN marks a missing entry
    std::unordered_map<Mask, double> sparse_values_;
};

// Table over the players of a whose utilities are U_a + U_b.
ValueTable sum_utilities(const ValueTable& a, const ValueTable& b);

// Value-table CSV: header `members,value`; members semicolon-joined ids, the
// empty string for the baseline. When `declared` is given, ids outside it are
// a schema error; otherwise the players are the ids that appear in the file.
ValueTable load_value_table(const std::filesystem::path& path, Orientation orientation,
                            std::string baseline_label = "baseline",
                            const std::optional<std::vector<Player>>& declared = std::nullopt);
ValueTable parse_value_table(std::string_view csv, Orientation orientation, std::string baseline_label = "baseline",
                             const std::optional<std::vector<Player>>& declared = std::nullopt);
std::string format_value_table(const ValueTable& table);

enum class Method { ShapleyExact, ShapleySampled, Loo };
enum class Normalization { None, ShareOfTotal, MinMax };

std::string_view to_string(Method m) noexcept;
std::string_view to_string(Normalization n) noexcept;
Normalization parse_normalization(std::string_view s);

struct AttributionResult {
    Method method = Method::ShapleyExact;
    Orientation orientation = Orientation::LowerIsBetter;
    std::vector<std::string> players;
    std::vector<double> values;
    std::vector<double> std_error; // sampled only
    std::vector<std::string> ranking;

    Normalization normalization = Normalization::None; // mode actually applied
    std::vector<double> normalized;
    bool normalization_fallback = false;   // ShareOfTotal fell back to MinMax
    bool normalization_degenerate = false; // constant values under MinMax

    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> permutations;

    [[nodiscard]] double value(std::string_view id) const;
    [[nodiscard]] double total() const;
};

// Descending by value, ties broken by ascending id.
std::vector<std::string> rank_players(const std::vector<std::string>& ids, const std::vector<double>& values);

// For each z, accumulates [U(L) - U(L - z)] * |L-z|!(N-1-|L-z|)!/(N-1)! over
// every coalition L containing z, then divides by N.
AttributionResult shapley_exact(const ValueTable& table);

// Permutation-sampling estimate. Permutations are grouped in fixed blocks, each
// with its own RNG stream derived from (seed, block), so the estimate is
// independent of `threads`.
AttributionResult shapley_sampled(const ValueTable& table, std::uint64_t permutations, std::uint64_t seed,
                                  unsigned threads = 1);

// v(z) = U(grand) - U(grand - z).
AttributionResult loo(const ValueTable& table);

AttributionResult normalize(const AttributionResult& result, Normalization mode);

struct AxiomReport {
    double grand_utility = 0.0;
    double value_sum = 0.0;
    double efficiency_tolerance = 0.0;
    bool efficiency = false;

    std::vector<std::string> null_players;
    bool null_player = true;

    std::vector<std::pair<std::string, std::string>> symmetric_pairs;
    bool symmetry = true;

    std::optional<bool> additivity; // checked only when a companion table is supplied
    double additivity_max_error = 0.0;

    [[nodiscard]] bool all_hold() const noexcept {
        return efficiency && null_player && symmetry && additivity.value_or(true);
    }
};

AxiomReport check_axioms(const ValueTable& table, const AttributionResult& result,
                         const ValueTable* companion = nullptr);

} // namespace copyscope
