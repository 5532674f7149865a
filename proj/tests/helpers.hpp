#pragma once

#include <random>
#include <string>
#include <vector>

#include "confalign/dataset.hpp"

namespace confalign::test {

inline std::string repo_path(const std::string& rel) {
    return std::string(CONFALIGN_REPO_DIR) + "/" + rel;
}

inline question make_question(std::string id, std::string stem, std::vector<std::string> options,
                              std::optional<char> gold = std::nullopt) {
    question q;
    q.id = std::move(id);
    q.stem = std::move(stem);
    char label = 'A';
    for (auto& text : options) q.options.push_back({label++, std::move(text)});
    q.gold = gold;
    return q;
}

inline question atmosphere_question() {
    return make_question("atmosphere", "Which of the following is a common element in the atmosphere?",
                         {"Oxygen", "Nitrogen", "Gold", "Iron", "Helium"}, 'B');
}

inline question random_valid_question(std::mt19937_64& rng, int min_options = 2, int max_options = 8) {
    std::uniform_int_distribution<int> count(min_options, max_options);
    std::uniform_int_distribution<int> word(0, 15);
    static const char* words[16] = {"river",  "copper", "engine", "violet", "meadow", "quartz",
                                    "harbor", "lantern", "falcon", "timber", "orchid", "saddle",
                                    "anchor", "beacon",  "cinder", "walnut"};
    int n = count(rng);
    std::vector<std::string> options;
    for (int i = 0; i < n; ++i)
        options.push_back(std::string(words[word(rng)]) + " " + words[word(rng)] + " " +
                          std::to_string(i));
    question q = make_question("rq" + std::to_string(rng() % 100000), "Pick the right phrase?", options);
    q.gold = q.options[static_cast<size_t>(rng() % q.options.size())].label;
    return q;
}

}  // namespace confalign::test
