#include <catch_amalgamated.hpp>

#include <random>

#include "confalign/confidence.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace confalign;

namespace {

token_distribution probs(std::vector<std::pair<std::string, double>> entries) {
    token_distribution d;
    d.kind = score_kind::prob;
    for (auto& [t, s] : entries) d.entries.push_back({t, s});
    return d;
}

}  // namespace

TEST_CASE("option token map has six disjoint variants per label", "[confidence]") {
    auto map = build_option_token_map({'A', 'B'});
    REQUIRE(map.variants.size() == 2);
    for (const auto& [label, vs] : map.variants) CHECK(vs.size() == 6);
    CHECK(map.label_of("A") == 'A');
    CHECK(map.label_of("a") == 'A');
    CHECK(map.label_of(" A") == 'A');
    CHECK(map.label_of("A.") == 'A');
    CHECK(map.label_of(" b") == 'B');
    CHECK_FALSE(map.label_of("AB").has_value());
}

TEST_CASE("option token map covers A through H disjointly", "[confidence]") {
    std::vector<char> labels{'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H'};
    auto map = build_option_token_map(labels);
    REQUIRE(map.variants.size() == 8);
    std::set<std::string> all;
    size_t total = 0;
    for (const auto& [label, vs] : map.variants) {
        for (const auto& v : vs) all.insert(v);
        total += vs.size();
    }
    CHECK(all.size() == total);  // pairwise disjoint
    // every variant maps back to exactly one label
    for (const auto& [label, vs] : map.variants)
        for (const auto& v : vs) CHECK(map.label_of(v) == label);
}

TEST_CASE("punctuation variants can be disabled", "[confidence]") {
    auto map = build_option_token_map({'A'}, false);
    CHECK(map.variants.at('A').size() == 4);
    CHECK_FALSE(map.label_of("A.").has_value());
}

TEST_CASE("worked example: lowercase variant dominates its label", "[confidence]") {
    // entries {A:0.1, B:0.2, b:0.6, C:0.05, D:0.03, E:0.02}, chosen B
    auto dist = probs({{"A", 0.1}, {"B", 0.2}, {"b", 0.6}, {"C", 0.05}, {"D", 0.03}, {"E", 0.02}});
    auto map = build_option_token_map({'A', 'B', 'C', 'D', 'E'});
    auto adj = adjusted_internal_confidence(dist, map, 'B');
    CHECK(adj.per_option.at('B') == 0.6);
    CHECK_THAT(adj.total_mass, Catch::Matchers::WithinAbs(0.8, 1e-15));
    CHECK_THAT(adj.internal_confidence, Catch::Matchers::WithinAbs(0.75, 1e-15));
    CHECK(adj.variant_ambiguity);  // both "B" and "b" carry mass

    auto oracle = test::brute_force_confidence(
        {{"A", 0.1}, {"B", 0.2}, {"b", 0.6}, {"C", 0.05}, {"D", 0.03}, {"E", 0.02}},
        {'A', 'B', 'C', 'D', 'E'}, 'B');
    CHECK(adj.internal_confidence == oracle.internal_confidence);
}

TEST_CASE("single massive option normalizes to one", "[confidence]") {
    auto dist = probs({{"C", 0.4}, {"the", 0.5}});
    auto map = build_option_token_map({'A', 'B', 'C'});
    auto adj = adjusted_internal_confidence(dist, map, 'C');
    CHECK(adj.internal_confidence == 1.0);
    CHECK_FALSE(adj.variant_ambiguity);
}

TEST_CASE("uniform mass gives symmetric confidence", "[confidence]") {
    auto dist = probs({{"A", 0.2}, {"B", 0.2}, {"C", 0.2}, {"D", 0.2}, {"E", 0.2}});
    auto map = build_option_token_map({'A', 'B', 'C', 'D', 'E'});
    for (char chosen : {'A', 'B', 'C', 'D', 'E'}) {
        auto adj = adjusted_internal_confidence(dist, map, chosen);
        CHECK_THAT(adj.internal_confidence, Catch::Matchers::WithinAbs(0.2, 1e-15));
    }
}

TEST_CASE("absent chosen label yields zero confidence, not an error", "[confidence]") {
    auto dist = probs({{"A", 0.9}});
    auto map = build_option_token_map({'A', 'B'});
    auto adj = adjusted_internal_confidence(dist, map, 'B');
    CHECK(adj.internal_confidence == 0.0);
    CHECK(adj.per_option.at('B') == 0.0);
}

TEST_CASE("zero option mass raises a diagnostic error", "[confidence]") {
    auto dist = probs({{"the", 0.4}, {"answer", 0.3}});
    auto map = build_option_token_map({'A', 'B'});
    try {
        adjusted_internal_confidence(dist, map, 'A');
        FAIL("expected no_option_mass");
    } catch (const no_option_mass& e) {
        CHECK(e.distribution.entries.size() == 2);  // raw distribution kept for diagnostics
    }
}

TEST_CASE("argmax mode restores the literal maximum numerator", "[confidence]") {
    auto dist = probs({{"A", 0.7}, {"B", 0.2}});
    auto map = build_option_token_map({'A', 'B'});
    auto chosen_mode = adjusted_internal_confidence(dist, map, 'B', false);
    auto argmax_mode = adjusted_internal_confidence(dist, map, 'B', true);
    CHECK_THAT(chosen_mode.internal_confidence, Catch::Matchers::WithinAbs(0.2 / 0.9, 1e-15));
    CHECK_THAT(argmax_mode.internal_confidence, Catch::Matchers::WithinAbs(0.7 / 0.9, 1e-15));
}

TEST_CASE("scaling all probabilities leaves the ratio unchanged", "[confidence]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.01, 1.0);
    auto map = build_option_token_map({'A', 'B', 'C'});
    for (int i = 0; i < 200; ++i) {
        double a = unit(rng), b = unit(rng), c = unit(rng);
        double k = 0.25;  // power of two keeps the scaling exact
        auto base = adjusted_internal_confidence(probs({{"A", a}, {"B", b}, {"C", c}}), map, 'B');
        auto scaled =
            adjusted_internal_confidence(probs({{"A", a * k}, {"B", b * k}, {"C", c * k}}), map, 'B');
        CHECK(base.internal_confidence == scaled.internal_confidence);
    }
}

TEST_CASE("non-option tokens never change the result", "[confidence]") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto map = build_option_token_map({'A', 'B', 'C'});
    for (int i = 0; i < 200; ++i) {
        auto base_entries = probs({{"A", unit(rng)}, {"b", unit(rng)}, {"C", unit(rng)}});
        auto with_noise = base_entries;
        with_noise.entries.push_back({"banana", unit(rng)});
        with_noise.entries.push_back({" the", unit(rng)});
        auto x = adjusted_internal_confidence(base_entries, map, 'C');
        auto y = adjusted_internal_confidence(with_noise, map, 'C');
        CHECK(x.internal_confidence == y.internal_confidence);
    }
}

TEST_CASE("randomized distributions match the brute-force oracle exactly", "[confidence]") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const char* junk[] = {"the", " of", "answer", "\n", "  ", "42", "Z.", "zz"};
    int checked = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        int n_options = 2 + static_cast<int>(rng() % 7);
        std::vector<char> labels;
        for (int i = 0; i < n_options; ++i) labels.push_back(static_cast<char>('A' + i));
        auto map = build_option_token_map(labels);

        std::vector<test::oracle_entry> entries;
        for (char label : labels) {
            int variants = static_cast<int>(rng() % 7);  // 0..6
            const auto& vs = map.variants.at(label);
            for (int v = 0; v < variants; ++v) entries.push_back({vs[static_cast<size_t>(v)], unit(rng)});
        }
        int extra = static_cast<int>(rng() % 4);
        for (int e = 0; e < extra; ++e) entries.push_back({junk[rng() % 8], unit(rng)});

        char chosen = labels[static_cast<size_t>(rng() % labels.size())];
        token_distribution dist;
        dist.kind = score_kind::prob;
        for (const auto& e : entries) dist.entries.push_back({e.token, e.prob});

        auto oracle = test::brute_force_confidence(entries, labels, chosen);
        if (oracle.no_mass) {
            CHECK_THROWS_AS(adjusted_internal_confidence(dist, map, chosen), no_option_mass);
            continue;
        }
        auto adj = adjusted_internal_confidence(dist, map, chosen);
        CHECK(std::fabs(adj.internal_confidence - oracle.internal_confidence) <= 1e-12);
        ++checked;
    }
    CHECK(checked > 1500);
}

TEST_CASE("leading label patterns extract the chosen answer", "[confidence]") {
    question q = test::make_question("t", "stem",
                                     {"attic", "countryside", "pet store", "fairy tale", "laboratory"});
    CHECK(extract_chosen_label("E. laboratory", q) == 'E');
    CHECK(extract_chosen_label("b", q) == 'B');
    CHECK(extract_chosen_label("  C) pet store", q) == 'C');
    CHECK(extract_chosen_label("d: fairy tale", q) == 'D');
    CHECK(extract_chosen_label("A", q) == 'A');
    CHECK(extract_chosen_label("\n a. attic", q) == 'A');
}

TEST_CASE("unique option-text containment resolves free-form answers", "[confidence]") {
    question q = test::make_question("t", "stem",
                                     {"getting drunk", "food", "plan", "having fun", "meeting new people"});
    CHECK(extract_chosen_label("I think the answer is meeting new people", q) == 'E');
    // oracle: exhaustive containment scan agrees
    std::string response = "I think the answer is meeting new people";
    int matches = 0;
    char matched = 0;
    for (const auto& o : q.options)
        if (detail::to_lower(response).find(detail::to_lower(o.text)) != std::string::npos) {
            ++matches;
            matched = o.label;
        }
    CHECK(matches == 1);
    CHECK(matched == 'E');
}

TEST_CASE("unparseable and ambiguous answers raise typed errors", "[confidence]") {
    question q = test::make_question("t", "stem", {"oxygen", "nitrogen"});
    CHECK_THROWS_AS(extract_chosen_label("no idea at all", q), unparseable_answer);
    CHECK_THROWS_AS(extract_chosen_label("maybe oxygen or nitrogen", q), ambiguous_answer);
    CHECK_THROWS_AS(extract_chosen_label("", q), unparseable_answer);
    // leading word starting with a label letter is not a label match
    CHECK_THROWS_AS(extract_chosen_label("Absolutely unsure", q), unparseable_answer);
}
