#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "copyscope/error.hpp"
#include "copyscope/game.hpp"

namespace copyscope {

std::string_view to_string(ComponentKind kind) noexcept {
    switch (kind) {
        case ComponentKind::BaseModel: return "BaseModel";
        case ComponentKind::ControlNet: return "ControlNet";
        case ComponentKind::Lora: return "Lora";
        case ComponentKind::KeyPrompt: return "KeyPrompt";
    }
    return "";
}

std::string_view to_string(Orientation o) noexcept {
    return o == Orientation::LowerIsBetter ? "LowerIsBetter" : "HigherIsBetter";
}

ComponentKind parse_component_kind(std::string_view s) {
    for (auto k : {ComponentKind::BaseModel, ComponentKind::ControlNet, ComponentKind::Lora, ComponentKind::KeyPrompt}) {
        if (s == to_string(k)) return k;
    }
    fail(ErrorKind::Schema, "unknown component kind '" + std::string(s) + "'");
}

Orientation parse_orientation(std::string_view s) {
    if (s == "LowerIsBetter" || s == "lower") return Orientation::LowerIsBetter;
    if (s == "HigherIsBetter" || s == "higher") return Orientation::HigherIsBetter;
    fail(ErrorKind::Argument, "unknown orientation '" + std::string(s) + "'");
}

Coalition::Coalition(std::vector<std::string> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (members_[i].empty()) fail(ErrorKind::Schema, "empty player id in coalition");
        if (i > 0 && members_[i] == members_[i - 1]) {
            fail(ErrorKind::Schema, "duplicate player '" + members_[i] + "' in coalition");
        }
    }
}

Coalition Coalition::parse(std::string_view joined) {
    std::vector<std::string> ids;
    if (!joined.empty()) {
        std::size_t start = 0;
        while (true) {
            const auto pos = joined.find(';', start);
            ids.emplace_back(joined.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
    }
    for (auto& id : ids) {
        const auto b = id.find_first_not_of(" \t");
        const auto e = id.find_last_not_of(" \t");
        id = b == std::string::npos ? std::string() : id.substr(b, e - b + 1);
    }
    return Coalition(std::move(ids));
}

bool Coalition::contains(std::string_view id) const {
    return std::binary_search(members_.begin(), members_.end(), id);
}

std::string Coalition::joined() const {
    std::string out;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (i) out += ';';
        out += members_[i];
    }
    return out;
}

ValueTable::ValueTable(std::vector<Player> players, Orientation orientation, std::string baseline_label)
    : players_(std::move(players)), orientation_(orientation), baseline_label_(std::move(baseline_label)) {
    std::sort(players_.begin(), players_.end(), [](const Player& a, const Player& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < players_.size(); ++i) {
        if (players_[i].id.empty()) fail(ErrorKind::Schema, "player id must be nonempty");
        if (players_[i].id.find(';') != std::string::npos) {
            fail(ErrorKind::Schema, "player id '" + players_[i].id + "' must not contain ';'");
        }
        if (i > 0 && players_[i].id == players_[i - 1].id) {
            fail(ErrorKind::Schema, "duplicate player id '" + players_[i].id + "'");
        }
    }
    if (players_.size() > kMaxPlayers) fail(ErrorKind::Argument, "too many players for a value table");
    dense_ = players_.size() <= kMaxEnumerablePlayers;
    if (dense_) dense_values_.assign(std::size_t{1} << players_.size(), std::numeric_limits<double>::quiet_NaN());
}

std::vector<std::string> ValueTable::player_ids() const {
    std::vector<std::string> ids;
    ids.reserve(players_.size());
    for (const auto& p : players_) ids.push_back(p.id);
    return ids;
}

Mask ValueTable::grand() const noexcept {
    return players_.empty() ? 0 : (~Mask{0} >> (64 - players_.size()));
}

std::optional<std::size_t> ValueTable::index_of(std::string_view id) const {
    const auto it = std::lower_bound(players_.begin(), players_.end(), id,
                                     [](const Player& p, std::string_view v) { return p.id < v; });
    if (it == players_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - players_.begin());
}

Mask ValueTable::mask_of(const Coalition& c) const {
    Mask m = 0;
    for (const auto& id : c.members()) {
        const auto idx = index_of(id);
        if (!idx) fail(ErrorKind::Schema, "unknown player id '" + id + "'");
        m |= Mask{1} << *idx;
    }
    return m;
}

Coalition ValueTable::coalition_of(Mask m) const {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < players_.size(); ++i) {
        if (m & (Mask{1} << i)) ids.push_back(players_[i].id);
    }
    return Coalition(std::move(ids));
}

void ValueTable::set(Mask m, double raw) {
    if ((m & ~grand()) != 0) fail(ErrorKind::Argument, "coalition mask references unknown players");
    if (!std::isfinite(raw)) fail(ErrorKind::Schema, "coalition score must be finite");
    if (dense_) dense_values_[m] = raw;
    else sparse_values_[m] = raw;
}

bool ValueTable::contains(Mask m) const {
    if ((m & ~grand()) != 0) return false;
    if (dense_) return !std::isnan(dense_values_[m]);
    return sparse_values_.count(m) != 0;
}

double ValueTable::raw(Mask m) const {
    if (!contains(m)) {
        const std::string label = (m & ~grand()) ? "<invalid mask>" : "{" + coalition_of(m).joined() + "}";
        fail(ErrorKind::Lookup, "coalition " + label + " not present in value table");
    }
    return dense_ ? dense_values_[m] : sparse_values_.at(m);
}

double ValueTable::utility(Mask m) const {
    const double base = raw(0);
    const double v = raw(m);
    return orientation_ == Orientation::LowerIsBetter ? base - v : v - base;
}

std::size_t ValueTable::entry_count() const noexcept {
    if (!dense_) return sparse_values_.size();
    return static_cast<std::size_t>(
        std::count_if(dense_values_.begin(), dense_values_.end(), [](double v) { return !std::isnan(v); }));
}

std::vector<Mask> ValueTable::missing() const {
    if (!dense_) fail(ErrorKind::Argument, "completeness is only defined for at most 20 players");
    std::vector<Mask> out;
    for (Mask m = 0; m < dense_values_.size(); ++m) {
        if (std::isnan(dense_values_[m])) out.push_back(m);
    }
    return out;
}

void ValueTable::require_complete() const {
    const auto absent = missing();
    if (absent.empty()) return;
    std::string msg = "value table is missing " + std::to_string(absent.size()) + " coalition(s):";
    for (Mask m : absent) {
        const auto c = coalition_of(m);
        msg += " {" + (c.empty() ? baseline_label_ : c.joined()) + "}";
    }
    fail(ErrorKind::Completeness, msg);
}

std::vector<double> ValueTable::utilities() const {
    require_complete();
    std::vector<double> u(dense_values_.size());
    const double base = dense_values_[0];
    for (std::size_t m = 0; m < u.size(); ++m) {
        u[m] = orientation_ == Orientation::LowerIsBetter ? base - dense_values_[m] : dense_values_[m] - base;
    }
    return u;
}

ValueTable ValueTable::utility_table() const {
    ValueTable out(players_, Orientation::HigherIsBetter, baseline_label_);
    if (dense_) {
        for (Mask m = 0; m < dense_values_.size(); ++m) {
            if (!std::isnan(dense_values_[m])) out.set(m, utility(m));
        }
    } else {
        for (const auto& [m, v] : sparse_values_) out.set(m, utility(m));
    }
    return out;
}

ValueTable sum_utilities(const ValueTable& a, const ValueTable& b) {
    if (a.player_ids() != b.player_ids()) fail(ErrorKind::Argument, "value tables declare different players");
    const auto ua = a.utilities();
    const auto ub = b.utilities();
    ValueTable out(a.players(), Orientation::HigherIsBetter, a.baseline_label());
    for (Mask m = 0; m < ua.size(); ++m) out.set(m, ua[m] + ub[m]);
    return out;
}

namespace {

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            if (!cur.empty() || was_quoted) {
                fail(ErrorKind::Schema, "malformed quoting on line " + std::to_string(line_no));
            }
            quoted = was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += ch;
        }
    }
    if (quoted) fail(ErrorKind::Schema, "unterminated quote on line " + std::to_string(line_no));
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

ValueTable parse_value_table(std::string_view csv, Orientation orientation, std::string baseline_label,
                             const std::optional<std::vector<Player>>& declared) {
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = parse_csv_line(trim(line), line_no);
            break;
        }
    }
    for (auto& h : header) h = trim(h);
    if (header.size() != 2 || header[0] != "members" || header[1] != "value") {
        fail(ErrorKind::Schema, "value table header must be 'members,value'");
    }

    std::vector<std::pair<Coalition, double>> rows;
    std::vector<std::size_t> row_lines;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = parse_csv_line(trim(line), line_no);
        if (fields.size() != 2) {
            fail(ErrorKind::Schema, "line " + std::to_string(line_no) + ": expected 2 fields, found " +
                                        std::to_string(fields.size()));
        }
        const std::string value_text = trim(fields[1]);
        char* end = nullptr;
        const double value = std::strtod(value_text.c_str(), &end);
        if (value_text.empty() || *end != '\0') {
            fail(ErrorKind::Schema, "line " + std::to_string(line_no) + ": bad value '" + value_text + "'");
        }
        if (!std::isfinite(value)) fail(ErrorKind::Schema, "line " + std::to_string(line_no) + ": non-finite value");
        rows.emplace_back(Coalition::parse(fields[0]), value);
        row_lines.push_back(line_no);
    }

    std::vector<Player> players;
    if (declared) {
        players = *declared;
    } else {
        std::set<std::string> ids;
        for (const auto& [c, v] : rows) ids.insert(c.members().begin(), c.members().end());
        for (const auto& id : ids) players.push_back({id, std::nullopt});
    }
    if (players.size() > kMaxEnumerablePlayers) {
        fail(ErrorKind::Schema, "value table declares more than 20 players");
    }

    ValueTable table(std::move(players), orientation, std::move(baseline_label));
    std::map<Mask, std::size_t> seen;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Mask m = table.mask_of(rows[i].first);
        if (const auto it = seen.find(m); it != seen.end()) {
            fail(ErrorKind::Schema, "duplicate coalition {" + rows[i].first.joined() + "} on lines " +
                                        std::to_string(it->second) + " and " + std::to_string(row_lines[i]));
        }
        seen.emplace(m, row_lines[i]);
        table.set(m, rows[i].second);
    }
    table.require_complete();
    return table;
}

ValueTable load_value_table(const std::filesystem::path& path, Orientation orientation, std::string baseline_label,
                            const std::optional<std::vector<Player>>& declared) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open value table: " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return parse_value_table(text, orientation, std::move(baseline_label), declared);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

std::string format_value_table(const ValueTable& table) {
    std::ostringstream out;
    out.precision(17);
    out << "members,value\n";
    const std::size_t n = table.player_count();
    std::vector<Mask> masks;
    for (Mask m = 0; m < (Mask{1} << n); ++m) {
        if (table.contains(m)) masks.push_back(m);
    }
    std::stable_sort(masks.begin(), masks.end(),
                     [](Mask a, Mask b) { return std::popcount(a) < std::popcount(b); });
    for (Mask m : masks) out << '"' << table.coalition_of(m).joined() << "\"," << table.raw(m) << '\n';
    return out.str();
}

} // namespace copyscope
