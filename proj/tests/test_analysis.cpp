#include <catch_amalgamated.hpp>

#include <random>

#include "confalign/analysis.hpp"
#include "oracles.hpp"

using namespace confalign;

namespace {

trial_record rec(std::string qid, std::optional<double> ic, std::optional<double> vc,
                 std::optional<bool> correct = std::nullopt, double temperature = 0.0,
                 int sample_index = 0) {
    trial_record r;
    r.question_id = std::move(qid);
    r.dataset = "d";
    r.variant_id = "full";
    r.internal_confidence = ic;
    r.verbalized_score = vc;
    r.correct = correct;
    r.temperature = temperature;
    r.sample_index = sample_index;
    return r;
}

std::vector<double> random_vector(std::mt19937_64& rng, size_t n, bool with_ties) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = unit(rng);
    if (with_ties && n >= 4) {
        // copy a few values around to force tie blocks
        std::uniform_int_distribution<size_t> idx(0, n - 1);
        for (size_t k = 0; k < n / 3; ++k) v[idx(rng)] = v[idx(rng)];
    }
    return v;
}

}  // namespace

TEST_CASE("spearman on monotone data is exactly one", "[analysis]") {
    std::vector<double> x{1, 2, 3}, y{10, 20, 30};
    auto r = spearman_rho(x, y);
    REQUIRE(r.rho_defined);
    CHECK(r.rho == 1.0);
    CHECK(r.p_value == 0.0);
}

TEST_CASE("spearman on reversed data is exactly minus one", "[analysis]") {
    std::vector<double> x{1, 2, 3}, y{3, 2, 1};
    auto r = spearman_rho(x, y);
    CHECK(r.rho == -1.0);

    // with ties on both sides, x vs -x still reverses exactly
    std::vector<double> xt{0.2, 0.2, 0.7, 0.9, 0.9, 0.1};
    std::vector<double> yt;
    for (double v : xt) yt.push_back(-v);
    CHECK(spearman_rho(xt, yt).rho == -1.0);
    CHECK(spearman_rho(xt, xt).rho == 1.0);
}

TEST_CASE("tied example matches the midrank definition", "[analysis]") {
    std::vector<double> x{0.9, 0.9, 0.5, 0.1}, y{1.0, 0.8, 0.8, 0.2};
    auto r = spearman_rho(x, y);
    REQUIRE(r.rho_defined);
    // frozen scipy.stats.spearmanr reference: rho = 0.8333333333333335, p = 1/6
    CHECK_THAT(r.rho, Catch::Matchers::WithinAbs(0.8333333333333335, 1e-12));
    CHECK_THAT(r.p_value, Catch::Matchers::WithinAbs(0.1666666666666665, 1e-10));
    auto oracle = test::oracle_spearman(x, y);
    REQUIRE(oracle.has_value());
    CHECK_THAT(r.rho, Catch::Matchers::WithinAbs(*oracle, 1e-12));
}

TEST_CASE("p-values match the t-approximation reference", "[analysis]") {
    // frozen from scipy: n=12 interleaved permutation
    std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<double> y{2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11};
    auto r = spearman_rho(x, y);
    CHECK_THAT(r.rho, Catch::Matchers::WithinAbs(0.9580419580419581, 1e-12));
    CHECK_THAT(r.p_value, Catch::Matchers::WithinRel(9.5435818268384e-07, 1e-9));

    // frozen from scipy: n=8 mixed case
    std::vector<double> x2{0.1, 0.25, 0.3, 0.45, 0.5, 0.62, 0.8, 0.9};
    std::vector<double> y2{0.2, 0.1, 0.45, 0.4, 0.6, 0.5, 0.95, 0.7};
    auto r2 = spearman_rho(x2, y2);
    CHECK_THAT(r2.rho, Catch::Matchers::WithinAbs(0.9047619047619048, 1e-12));
    CHECK_THAT(r2.p_value, Catch::Matchers::WithinRel(0.0020082755054294677, 1e-9));
}

TEST_CASE("exact permutation p-value agrees with the t-approximation at small n", "[analysis]") {
    std::vector<double> x{0.1, 0.25, 0.3, 0.45, 0.5, 0.62, 0.8, 0.9};
    std::vector<double> y{0.2, 0.1, 0.45, 0.4, 0.6, 0.5, 0.95, 0.7};
    double p_exact = test::permutation_p_value(x, y);  // 0.004563... by enumeration
    auto r = spearman_rho(x, y);
    CHECK_THAT(p_exact, Catch::Matchers::WithinAbs(0.004563492063492064, 1e-12));
    CHECK(std::fabs(r.p_value - p_exact) < 0.01);
}

TEST_CASE("tie-free midrank result equals the closed form", "[analysis]") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 3 + rng() % 60;
        std::vector<double> x = random_vector(rng, n, false);
        std::vector<double> y = random_vector(rng, n, false);
        auto r = spearman_rho(x, y);
        double shortcut = spearman_rho_no_ties(x, y);
        CHECK(std::fabs(r.rho - shortcut) <= 1e-12);
    }
}

TEST_CASE("random tied vectors match the definition-level oracle", "[analysis]") {
    std::mt19937_64 rng(333);
    for (int trial = 0; trial < 300; ++trial) {
        size_t n = 3 + rng() % 60;
        std::vector<double> x = random_vector(rng, n, true);
        std::vector<double> y = random_vector(rng, n, true);
        auto r = spearman_rho(x, y);
        auto oracle = test::oracle_spearman(x, y);
        REQUIRE(r.rho_defined == oracle.has_value());
        if (oracle) CHECK(std::fabs(r.rho - *oracle) <= 1e-9);
    }
}

TEST_CASE("constant input yields an undefined rho, not zero", "[analysis]") {
    std::vector<double> c{0.5, 0.5, 0.5, 0.5}, y{1, 2, 3, 4};
    auto r = spearman_rho(c, y);
    CHECK_FALSE(r.rho_defined);
    CHECK(std::isnan(r.rho));
    CHECK_FALSE(spearman_rho(y, c).rho_defined);
}

TEST_CASE("length mismatch and tiny inputs are rejected", "[analysis]") {
    std::vector<double> a{1, 2}, b{1, 2, 3}, one{1};
    CHECK_THROWS_AS(spearman_rho(a, b), validation_error);
    CHECK_THROWS_AS(spearman_rho(one, one), validation_error);
    // n = 2: rho defined, p-value is not
    std::vector<double> x{1, 2}, y{2, 3};
    auto r = spearman_rho(x, y);
    CHECK(r.rho == 1.0);
    CHECK(std::isnan(r.p_value));
}

TEST_CASE("spearman is invariant under strictly increasing transforms", "[analysis]") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 5 + rng() % 40;
        std::vector<double> x = random_vector(rng, n, true);
        std::vector<double> y = random_vector(rng, n, true);
        std::vector<double> fx, gy;
        for (double v : x) fx.push_back(std::exp(3.0 * v) + 1.0);       // strictly increasing
        for (double v : y) gy.push_back(std::atan(5.0 * (v - 0.5)));    // strictly increasing
        auto base = spearman_rho(x, y);
        auto mapped = spearman_rho(fx, gy);
        if (base.rho_defined) CHECK(base.rho == mapped.rho);
    }
}

TEST_CASE("taxonomy reproduces the published exemplars", "[analysis]") {
    CHECK(classify_alignment(1.00, 1.00) == taxonomy_label::consistent_alignment);
    CHECK(classify_alignment(0.99, 0.20) == taxonomy_label::internal_overconfidence);
    CHECK(classify_alignment(0.69, 1.00) == taxonomy_label::external_overconfidence);
    CHECK(classify_alignment(0.69, 0.40) == taxonomy_label::consistent_discordance);
}

TEST_CASE("taxonomy partitions the unit square", "[analysis]") {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        double ic = unit(rng), vc = unit(rng);
        taxonomy_label t = classify_alignment(ic, vc);
        // exactly one label: recompute from first principles
        taxonomy_label expected =
            ic >= 0.9 ? (vc >= 0.8 ? taxonomy_label::consistent_alignment
                                   : taxonomy_label::internal_overconfidence)
                      : (vc >= 0.8 ? taxonomy_label::external_overconfidence
                                   : taxonomy_label::consistent_discordance);
        CHECK(t == expected);
    }
    CHECK_THROWS_AS(classify_alignment(1.2, 0.5), validation_error);
    alignment_thresholds custom{0.5, 0.5};
    CHECK(classify_alignment(0.6, 0.1, custom) == taxonomy_label::internal_overconfidence);
}

TEST_CASE("verbal matrix on a degenerate set", "[analysis]") {
    std::vector<trial_record> records;
    for (int i = 0; i < 7; ++i) records.push_back(rec("q" + std::to_string(i), 0.9, 1.0, true));
    auto m = verbal_confusion_matrix(records);
    REQUIRE_FALSE(m.empty);
    CHECK(m.pos_correct == 100.0);
    CHECK(m.pos_incorrect == 0.0);
    CHECK(m.neg_correct == 0.0);
    CHECK(m.neg_incorrect == 0.0);
    CHECK(m.residual_fraction == 0.0);
}

TEST_CASE("verbal matrix matches an exact counting oracle on synthetic data", "[analysis]") {
    std::mt19937_64 rng(31);
    std::vector<trial_record> records;
    size_t counts[4] = {0, 0, 0, 0};
    size_t eligible = 0, restricted = 0;
    const double levels[6] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    for (int i = 0; i < 400; ++i) {
        double vc = levels[rng() % 6];
        bool correct = rng() % 2 == 0;
        records.push_back(rec("q" + std::to_string(i), 0.5, vc, correct));
        ++eligible;
        if (vc == 1.0 || vc == 0.8) {
            ++restricted;
            counts[(vc == 1.0 ? 0 : 2) + (correct ? 0 : 1)] += 1;
        }
    }
    auto m = verbal_confusion_matrix(records);
    REQUIRE(m.n == restricted);
    CHECK_THAT(m.pos_correct, Catch::Matchers::WithinAbs(100.0 * counts[0] / restricted, 1e-9));
    CHECK_THAT(m.pos_incorrect, Catch::Matchers::WithinAbs(100.0 * counts[1] / restricted, 1e-9));
    CHECK_THAT(m.neg_correct, Catch::Matchers::WithinAbs(100.0 * counts[2] / restricted, 1e-9));
    CHECK_THAT(m.neg_incorrect, Catch::Matchers::WithinAbs(100.0 * counts[3] / restricted, 1e-9));
    CHECK_THAT(m.sum(), Catch::Matchers::WithinAbs(100.0, 0.1));
    CHECK_THAT(m.residual_fraction,
               Catch::Matchers::WithinAbs(double(eligible - restricted) / eligible, 1e-12));
}

TEST_CASE("verbal matrix with zero restricted records is empty", "[analysis]") {
    std::vector<trial_record> records{rec("a", 0.5, 0.4, true), rec("b", 0.5, 0.2, false)};
    CHECK(verbal_confusion_matrix(records).empty);
}

TEST_CASE("internal matrix splits strictly above the median", "[analysis]") {
    std::vector<trial_record> records{rec("a", 0.1, 1.0, false), rec("b", 0.2, 1.0, false),
                                      rec("c", 0.8, 1.0, true), rec("d", 0.9, 1.0, true)};
    auto m = internal_confusion_matrix(records);
    REQUIRE_FALSE(m.empty);
    CHECK(m.pos_correct == 50.0);
    CHECK(m.pos_incorrect == 0.0);
    CHECK(m.neg_correct == 0.0);
    CHECK(m.neg_incorrect == 50.0);
}

TEST_CASE("equal confidences all land at-or-below the median", "[analysis]") {
    std::vector<trial_record> records;
    for (int i = 0; i < 6; ++i) records.push_back(rec("q" + std::to_string(i), 0.7, 1.0, i % 2 == 0));
    auto m = internal_confusion_matrix(records);
    CHECK(m.pos_correct == 0.0);
    CHECK(m.pos_incorrect == 0.0);
    CHECK(m.neg_correct == 50.0);
    CHECK(m.neg_incorrect == 50.0);
}

TEST_CASE("internal matrix needs at least two records", "[analysis]") {
    CHECK(internal_confusion_matrix({rec("a", 0.5, 1.0, true)}).empty);
    CHECK(internal_confusion_matrix({}).empty);
}

TEST_CASE("certainty histogram uses the exact score levels", "[analysis]") {
    std::vector<trial_record> all_very;
    for (int i = 0; i < 9; ++i) all_very.push_back(rec("q" + std::to_string(i), 0.5, 1.0));
    auto h = certainty_histogram(all_very);
    REQUIRE(h.labels.size() == 6);
    CHECK(h.percentages[5] == 100.0);
    for (size_t i = 0; i < 5; ++i) CHECK(h.percentages[i] == 0.0);

    std::vector<trial_record> mixed{rec("a", 0.5, 0.0),  rec("b", 0.5, 0.2), rec("c", 0.5, 0.2),
                                    rec("d", 0.5, 0.8),  rec("e", 0.5, 1.0), rec("f", 0.5, 1.0),
                                    rec("g", 0.5, 1.0),  rec("h", 0.5, 0.6)};
    auto hm = certainty_histogram(mixed);
    CHECK_THAT(hm.percentages[0], Catch::Matchers::WithinAbs(12.5, 1e-12));   // 0.0
    CHECK_THAT(hm.percentages[1], Catch::Matchers::WithinAbs(25.0, 1e-12));   // 0.2
    CHECK(hm.percentages[2] == 0.0);                                          // 0.4
    CHECK_THAT(hm.percentages[3], Catch::Matchers::WithinAbs(12.5, 1e-12));   // 0.6
    CHECK_THAT(hm.percentages[4], Catch::Matchers::WithinAbs(12.5, 1e-12));   // 0.8
    CHECK_THAT(hm.percentages[5], Catch::Matchers::WithinAbs(37.5, 1e-12));   // 1.0
    double sum = 0.0;
    for (double p : hm.percentages) sum += p;
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(100.0, 0.1));
}

TEST_CASE("confidence histogram matches an exact counting oracle", "[analysis]") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<trial_record> records;
    size_t counts[10] = {};
    for (int i = 0; i < 1000; ++i) {
        double ic = unit(rng);
        records.push_back(rec("q" + std::to_string(i), ic, 1.0));
        counts[std::min(9, static_cast<int>(ic * 10.0))] += 1;
    }
    auto h = confidence_histogram(records);
    double sum = 0.0;
    for (size_t b = 0; b < 10; ++b) {
        CHECK_THAT(h.percentages[b], Catch::Matchers::WithinAbs(counts[b] / 10.0, 1e-9));
        CHECK_THAT(h.percentages[b], Catch::Matchers::WithinAbs(10.0, 3.5));  // roughly uniform
        sum += h.percentages[b];
    }
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(100.0, 0.1));
    // boundary: exactly 1.0 lands in the last bin
    auto edge = confidence_histogram({rec("x", 1.0, 1.0)});
    CHECK(edge.percentages[9] == 100.0);
}

TEST_CASE("temperature stability basics", "[analysis]") {
    std::vector<double> grid{0.0, 1.0};
    // identical samples -> exactly zero
    std::vector<trial_record> same{rec("q1", 0.5, 0.8, true, 0.0, 0), rec("q1", 0.5, 0.8, true, 0.0, 1),
                                   rec("q1", 0.5, 0.8, true, 0.0, 2)};
    auto curve = temperature_stability(same, std::vector<double>{0.0});
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].avg_std == 0.0);
    CHECK(curve[0].questions == 1);

    // [1.0, 0.8] -> population std exactly half the gap
    std::vector<trial_record> pair{rec("q1", 0.5, 1.0, true, 1.0, 0), rec("q1", 0.5, 0.8, true, 1.0, 1)};
    auto curve2 = temperature_stability(pair, std::vector<double>{1.0});
    CHECK_THAT(curve2[0].avg_std, Catch::Matchers::WithinAbs(0.1, 1e-12));

    // a question missing samples at one temperature is excluded there
    std::vector<trial_record> missing{rec("q1", 0.5, 1.0, true, 0.0, 0), rec("q1", 0.5, 1.0, true, 0.0, 1),
                                      rec("q2", 0.5, 1.0, true, 0.0, 0)};
    auto curve3 = temperature_stability(missing, std::vector<double>{0.0});
    CHECK(curve3[0].questions == 1);
    CHECK(curve3[0].excluded == 1);
}

TEST_CASE("ablation table flags the best cell per dataset", "[analysis]") {
    auto make_records = [](const std::vector<std::pair<double, double>>& pairs) {
        std::vector<trial_record> rs;
        int i = 0;
        for (auto [ic, vc] : pairs) rs.push_back(rec("q" + std::to_string(i++), ic, vc));
        return rs;
    };
    std::vector<std::pair<double, double>> aligned{{0.1, 0.0}, {0.4, 0.4}, {0.7, 0.8}, {0.9, 1.0}};
    std::vector<std::pair<double, double>> reversed{{0.1, 1.0}, {0.4, 0.8}, {0.7, 0.4}, {0.9, 0.0}};
    std::vector<std::pair<std::string, std::vector<trial_record>>> input{
        {"numerical", make_records(reversed)},
        {"lsu", make_records(aligned)},
        {"ttp_lsu", make_records(reversed)}};
    auto table = ablation_table(input);
    REQUIRE(table.variants.size() == 3);
    REQUIRE(table.datasets.size() == 1);
    CHECK(table.cells[1][0].rho == 1.0);
    CHECK(table.best_row[0] == 1);

    // identical record sets give identical rho
    std::vector<std::pair<std::string, std::vector<trial_record>>> twin{
        {"a", make_records(aligned)}, {"b", make_records(aligned)}};
    auto twins = ablation_table(twin);
    CHECK(twins.cells[0][0].rho == twins.cells[1][0].rho);
}

TEST_CASE("undefined ablation cells stay undefined", "[analysis]") {
    std::vector<trial_record> constant{rec("a", 0.5, 1.0), rec("b", 0.5, 0.8), rec("c", 0.5, 0.6)};
    std::vector<std::pair<std::string, std::vector<trial_record>>> input{{"lsu", constant}};
    auto table = ablation_table(input);
    CHECK_FALSE(table.cells[0][0].rho_defined);
    CHECK(table.best_row[0] == SIZE_MAX);
}

TEST_CASE("records with verbal failures are excluded from rho but counted", "[analysis]") {
    std::vector<trial_record> records{rec("a", 0.9, 1.0), rec("b", 0.5, 0.4), rec("c", 0.2, 0.0)};
    trial_record failed = rec("d", 0.7, std::nullopt);
    failed.verbal_failure = certainty_failure::no_category;
    records.push_back(failed);
    auto corr = alignment_correlation(records);
    CHECK(corr.n == 3);
    CHECK(records_with_pair(records).size() == 3);
}
