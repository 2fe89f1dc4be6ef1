#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "copyscope/error.hpp"
#include "copyscope/game.hpp"
#include "oracles.hpp"

using namespace copyscope;

namespace {

const std::string kData = COPYSCOPE_DATA_DIR;

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected copyscope::Error");
    return ErrorKind::InternalConsistency;
}

std::string error_message(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

ValueTable additive_pair() {
    ValueTable t({{"a", std::nullopt}, {"b", std::nullopt}}, Orientation::HigherIsBetter, "none");
    t.set(0b00, 0.0);
    t.set(0b01, 1.0);
    t.set(0b10, 2.0);
    t.set(0b11, 3.0);
    return t;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("coalitions are canonical") {
    const Coalition c({"b", "a", "c"});
    CHECK(c.members() == std::vector<std::string>{"a", "b", "c"});
    CHECK(c.joined() == "a;b;c");
    CHECK(Coalition::parse("c;a;b") == c);
    CHECK(Coalition::parse("").empty());
    CHECK(kind_of([] { Coalition({"a", "a"}); }) == ErrorKind::Schema);
    CHECK(kind_of([] { Coalition::parse("a;;b"); }) == ErrorKind::Schema);
}

TEST_CASE("appendix table loads") {
    const auto t = load_value_table(kData + "/appendix_fid.csv", Orientation::LowerIsBetter, "SDv1-5");
    CHECK(t.player_count() == 5);
    CHECK(t.entry_count() == 32);
    CHECK(t.player_ids() == std::vector<std::string>{"Davinci", "Depth", "Leonardo", "MonaLisa", "SDMv10"});
    CHECK(t.raw(Coalition{}) == 310.18);
    CHECK(t.raw(Coalition({"Davinci", "Depth", "Leonardo", "MonaLisa", "SDMv10"})) == 184.69);
    CHECK(t.utility(Coalition{}) == 0.0);
    CHECK(t.utility(t.grand()) == doctest::Approx(125.49).epsilon(1e-12));
    CHECK(t.utility(Coalition({"SDMv10"})) == doctest::Approx(-10.30).epsilon(1e-12));

    for (const char* metric : {"cosine", "hist", "dhash", "ssim", "rgb_ssim"}) {
        const auto m = load_value_table(kData + "/appendix_" + metric + ".csv", Orientation::HigherIsBetter, "SDv1-5");
        CHECK(m.complete());
    }
}

TEST_CASE("value table schema errors") {
    std::string csv = read_file(kData + "/appendix_fid.csv");
    // Drop the last row: one coalition missing.
    auto trimmed = csv.substr(0, csv.rfind('\n', csv.size() - 2) + 1);
    const auto msg = error_message([&] { parse_value_table(trimmed, Orientation::LowerIsBetter, "SDv1-5"); });
    CHECK(kind_of([&] { parse_value_table(trimmed, Orientation::LowerIsBetter, "SDv1-5"); }) ==
          ErrorKind::Completeness);
    CHECK(msg.find("missing 1 coalition") != std::string::npos);
    const auto last = csv.substr(csv.rfind('\n', csv.size() - 2) + 1);
    const auto members = last.substr(1, last.find('"', 1) - 1);
    CHECK(msg.find("{" + members + "}") != std::string::npos);

    CHECK(kind_of([&] { parse_value_table(csv + "\"Depth\",1.0\n", Orientation::LowerIsBetter); }) ==
          ErrorKind::Schema);
    CHECK(kind_of([&] {
              parse_value_table(csv, Orientation::LowerIsBetter, "SDv1-5",
                                std::vector<Player>{{"Davinci", {}}, {"Depth", {}}, {"Leonardo", {}}, {"MonaLisa", {}}});
          }) == ErrorKind::Schema);
    CHECK(kind_of([] { parse_value_table("coalition,value\n\"\",1\n", Orientation::LowerIsBetter); }) ==
          ErrorKind::Schema);
    CHECK(kind_of([] { parse_value_table("members,value\n\"\",abc\n", Orientation::LowerIsBetter); }) ==
          ErrorKind::Schema);
    CHECK(kind_of([] { parse_value_table("members,value\n\"\",nan\n", Orientation::LowerIsBetter); }) ==
          ErrorKind::Schema);
    CHECK(kind_of([] { load_value_table("/nonexistent/table.csv", Orientation::LowerIsBetter); }) == ErrorKind::Io);

    const auto t = additive_pair();
    CHECK(kind_of([&] { (void)t.raw(Mask{0b100}); }) == ErrorKind::Lookup);
    ValueTable partial({{"a", {}}, {"b", {}}}, Orientation::LowerIsBetter);
    partial.set(0, 1.0);
    CHECK(kind_of([&] { (void)partial.utility(Mask{1}); }) == ErrorKind::Lookup);
}

TEST_CASE("value table roundtrips through csv") {
    std::mt19937_64 rng(1);
    const auto t = oracle::random_table(4, rng, Orientation::LowerIsBetter);
    const auto back = parse_value_table(format_value_table(t), Orientation::LowerIsBetter);
    for (Mask m = 0; m < 16; ++m) CHECK(back.raw(m) == t.raw(m));
}

TEST_CASE("additive game") {
    const auto t = additive_pair();
    const auto ex = shapley_exact(t);
    CHECK(ex.values == std::vector<double>{1.0, 2.0});
    CHECK(ex.ranking == std::vector<std::string>{"b", "a"});
    CHECK(shapley_sampled(t, 500, 42).values == std::vector<double>{1.0, 2.0});
    CHECK(loo(t).values == std::vector<double>{1.0, 2.0});

    // LOO and Shapley coincide on random additive games.
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> w(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        ValueTable a(oracle::players(6), Orientation::HigherIsBetter);
        std::vector<double> weights(6);
        for (auto& x : weights) x = w(rng);
        for (Mask m = 0; m < 64; ++m) {
            double s = 0.0;
            for (int i = 0; i < 6; ++i)
                if (m & (Mask{1} << i)) s += weights[static_cast<std::size_t>(i)];
            a.set(m, s);
        }
        const auto sv = shapley_exact(a).values;
        const auto lv = loo(a).values;
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(std::abs(sv[i] - weights[i]) <= 1e-12);
            CHECK(std::abs(lv[i] - weights[i]) <= 1e-12);
        }
    }
}

TEST_CASE("glove game") {
    const auto t = oracle::glove_table();
    const auto ex = shapley_exact(t);
    CHECK(std::abs(ex.value("L") - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(ex.value("R1") - 1.0 / 6.0) <= 1e-12);
    CHECK(std::abs(ex.value("R2") - 1.0 / 6.0) <= 1e-12);
    const auto q = oracle::shapley_rational(t);
    CHECK(q[0] == std::pair<long long, long long>{2, 3});
    CHECK(q[1] == std::pair<long long, long long>{1, 6});
    CHECK(q[2] == std::pair<long long, long long>{1, 6});

    const auto lv = loo(t);
    CHECK(lv.values == std::vector<double>{1.0, 0.0, 0.0});

    const auto s = shapley_sampled(t, 100000, 7);
    CHECK(std::abs(s.value("L") - 2.0 / 3.0) <= 0.01);
    CHECK(std::abs(s.value("R1") - 1.0 / 6.0) <= 0.01);
    CHECK(std::abs(s.value("R2") - 1.0 / 6.0) <= 0.01);
    CHECK(s.seed == 7u);
    CHECK(s.permutations == 100000u);
}

TEST_CASE("exact Shapley matches permutation enumeration and the subset form") {
    std::mt19937_64 rng(3);
    for (std::size_t n = 1; n <= 6; ++n) {
        for (int trial = 0; trial < 20; ++trial) {
            const auto t = oracle::random_table(n, rng, trial % 2 ? Orientation::LowerIsBetter
                                                                   : Orientation::HigherIsBetter);
            const auto v = shapley_exact(t).values;
            const auto perm = oracle::shapley_by_permutations(t);
            const auto subset = oracle::shapley_subset_form(t);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::abs(v[i] - perm[i]) <= 1e-10);
                CHECK(std::abs(v[i] - subset[i]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("axioms hold on random tables") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto t = oracle::random_table(5, rng);
        oracle::make_null(t, 1);
        oracle::make_symmetric(t, 2, 4);
        const auto companion = oracle::random_table(5, rng);
        const auto r = shapley_exact(t);
        const auto rep = check_axioms(t, r, &companion);
        CHECK(rep.efficiency);
        CHECK(rep.null_player);
        CHECK(rep.symmetry);
        CHECK(rep.additivity == true);
        CHECK(rep.all_hold());
        CHECK(std::find(rep.null_players.begin(), rep.null_players.end(), "p1") != rep.null_players.end());
        CHECK(std::find(rep.symmetric_pairs.begin(), rep.symmetric_pairs.end(), std::pair<std::string, std::string>{
                                                                                     "p2", "p4"}) !=
              rep.symmetric_pairs.end());
        CHECK(std::abs(r.values[1]) <= 1e-12);
        CHECK(std::abs(r.values[2] - r.values[4]) <= 1e-12);

        // Independent additivity check through the composed game.
        const auto sum = shapley_exact(sum_utilities(t, companion)).values;
        const auto other = shapley_exact(companion).values;
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(sum[i] - r.values[i] - other[i]) <= 1e-9);
    }
}

TEST_CASE("axiom check rejects unsuitable input") {
    std::mt19937_64 rng(5);
    const auto t = oracle::random_table(3, rng);
    CHECK(kind_of([&] { check_axioms(t, loo(t)); }) == ErrorKind::Argument);
    const auto other = oracle::random_table(4, rng);
    CHECK(kind_of([&] { check_axioms(t, shapley_exact(t), &other); }) == ErrorKind::Argument);
    CHECK(!check_axioms(t, shapley_exact(t)).additivity.has_value());

    auto tampered = shapley_exact(t);
    tampered.values[0] += 1e-3;
    CHECK(!check_axioms(t, tampered).efficiency);
}

TEST_CASE("rankings are invariant under positive scaling and raw offsets") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto t = oracle::random_table(5, rng, Orientation::LowerIsBetter);
        ValueTable scaled(t.players(), Orientation::LowerIsBetter);
        ValueTable shifted(t.players(), Orientation::LowerIsBetter);
        for (Mask m = 0; m < 32; ++m) {
            scaled.set(m, 3.5 * t.raw(m));
            shifted.set(m, t.raw(m) + 100.0);
        }
        const auto base = shapley_exact(t);
        CHECK(shapley_exact(scaled).ranking == base.ranking);
        const auto sh = shapley_exact(shifted);
        CHECK(sh.ranking == base.ranking);
        for (std::size_t i = 0; i < 5; ++i) CHECK(sh.values[i] == doctest::Approx(base.values[i]).epsilon(1e-9));
        CHECK(loo(scaled).ranking == loo(t).ranking);
    }
}

TEST_CASE("ranking ties break by id") {
    CHECK(rank_players({"b", "a", "c"}, {1.0, 1.0, 2.0}) == std::vector<std::string>{"c", "a", "b"});
}

TEST_CASE("sampled Shapley convergence and determinism") {
    const auto t = oracle::glove_table();
    const auto small = shapley_sampled(t, 100, 11);
    const auto large = shapley_sampled(t, 10000, 11);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(small.std_error[i] > 0.0);
        const double ratio = small.std_error[i] / large.std_error[i];
        CHECK(ratio > 5.0);
        CHECK(ratio < 20.0);
    }

    // Mean over seeds approaches the exact value.
    double mean_l = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) mean_l += shapley_sampled(t, 200, seed).value("L");
    CHECK(std::abs(mean_l / 50 - 2.0 / 3.0) < 0.01);

    std::mt19937_64 rng(7);
    const auto big = oracle::random_table(8, rng);
    const auto one = shapley_sampled(big, 5000, 99, 1);
    const auto eight = shapley_sampled(big, 5000, 99, 8);
    CHECK(one.values == eight.values);
    CHECK(one.std_error == eight.std_error);
    CHECK(shapley_sampled(big, 5000, 99, 3).values == one.values);
    CHECK(shapley_sampled(big, 5000, 100, 1).values != one.values);
    CHECK(kind_of([&] { shapley_sampled(big, 0, 1); }) == ErrorKind::Argument);
}

TEST_CASE("sampled Shapley works beyond the enumeration bound") {
    std::vector<Player> ps;
    for (int i = 0; i < 30; ++i) ps.push_back({"q" + std::to_string(100 + i), {}});
    ValueTable t(ps, Orientation::HigherIsBetter);
    // Tables this large are stored sparsely; an empty one fails on the first lookup.
    CHECK(kind_of([&] { shapley_sampled(t, 10, 1); }) == ErrorKind::Lookup);
    CHECK(kind_of([&] { shapley_exact(t); }) == ErrorKind::Argument);
}

TEST_CASE("normalization") {
    AttributionResult r;
    r.players = {"a", "b"};
    r.values = {1.0, 3.0};
    auto s = normalize(r, Normalization::ShareOfTotal);
    CHECK(s.normalized == std::vector<double>{0.25, 0.75});
    CHECK(!s.normalization_fallback);
    CHECK(s.normalization == Normalization::ShareOfTotal);

    r.values = {2.0, 2.0};
    auto m = normalize(r, Normalization::MinMax);
    CHECK(m.normalized == std::vector<double>{0.0, 0.0});
    CHECK(m.normalization_degenerate);

    r.players = {"a", "b", "c"};
    r.values = {-1.0, 1.0, 3.0};
    m = normalize(r, Normalization::MinMax);
    CHECK(m.normalized == std::vector<double>{0.0, 0.5, 1.0});

    s = normalize(r, Normalization::ShareOfTotal);
    CHECK(s.normalization_fallback);
    CHECK(s.normalization == Normalization::MinMax);
    CHECK(s.normalized == std::vector<double>{0.0, 0.5, 1.0});

    r.values = {-1.0, -3.0, 0.0};
    s = normalize(r, Normalization::ShareOfTotal);
    CHECK(!s.normalization_fallback);
    CHECK(s.normalized == std::vector<double>{0.25, 0.75, 0.0});

    CHECK(normalize(r, Normalization::None).normalized == r.values);
    CHECK(parse_normalization("share") == Normalization::ShareOfTotal);
    CHECK(parse_normalization("minmax") == Normalization::MinMax);
    CHECK(kind_of([] { parse_normalization("zscore"); }) == ErrorKind::Argument);
}
