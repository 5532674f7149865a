#pragma once

// 30 curated verbalized-certainty responses with pinned expected outcomes:
// successes across the whole scoring dictionary plus every failure class at
// least twice. Shared between the unit suite and the acceptance suite.

#include <optional>
#include <string>
#include <vector>

#include "confalign/certainty.hpp"

namespace confalign::test {

struct curated_case {
    const char* text;
    std::optional<double> score;  // expected score when the parse succeeds
    std::optional<certainty_failure> failure;
    bool with_options = false;  // pass the QASC-style option texts as context
};

inline const std::vector<std::string>& curated_option_texts() {
    static const std::vector<std::string> options{"eardrum", "Refraction", "death",  "Injury",
                                                  "stop for gas", "a mirror", "echoes", "sound"};
    return options;
}

inline const std::vector<curated_case>& curated_cases() {
    static const std::vector<curated_case> cases{
        // successes across the whole scoring dictionary
        {"a. Very Certain. Washing oneself is the most logical and appropriate response when feeling dirty.",
         1.0, std::nullopt, false},
        {"A. Very certain", 1.0, std::nullopt, false},
        {"I would say very certain, the answer is clearly right.", 1.0, std::nullopt, false},
        {"b. Fairly Certain", 0.8, std::nullopt, false},
        {"I am fairly certain about this one.", 0.8, std::nullopt, false},
        {"Answer: b. fairly certain, because the option dominates.", 0.8, std::nullopt, false},
        {"c. Moderately Certain", 0.6, std::nullopt, false},
        {"Moderately certain; other options are plausible.", 0.6, std::nullopt, false},
        {"d. Somewhat Certain", 0.4, std::nullopt, false},
        {"The answer would be d. somewhat certain. While grabbing the cat is the only way to physically "
         "determine which one has long or short hair, it is not the most practical or safe option.",
         0.4, std::nullopt, false},
        {"Answer: e. Not certain. Glaciers typically have very few plants and animals living in them, but it "
         "is possible that some of the other options could also have fewer plants and animals living in them.",
         0.2, std::nullopt, false},
        {"e. not certain", 0.2, std::nullopt, false},
        {"f. Very Uncertain", 0.0, std::nullopt, false},
        {"E. Very uncertain", 0.0, std::nullopt, false},  // phrase beats the conflicting key letter
        {"My assessment: very uncertain.", 0.0, std::nullopt, false},
        {"I'd go with (b. fairly certain) here.", 0.8, std::nullopt, false},
        {"  c. moderately certain  ", 0.6, std::nullopt, false},
        {"Very Certain!", 1.0, std::nullopt, false},
        // multiple categories
        {"g. Fairly certain, h. Moderately certain, i. Somewhat certain, j. Not certain", std::nullopt,
         certainty_failure::multiple_categories, false},
        {"Either very certain or somewhat certain, hard to say.", std::nullopt,
         certainty_failure::multiple_categories, false},
        {"a. b. one of those", std::nullopt, certainty_failure::multiple_categories, false},
        // option reiteration (needs the original options in context)
        {"Other options were: A. eardrum C. death, D. Injury, E. stop for gas and none of them fit.",
         std::nullopt, certainty_failure::option_reiteration, true},
        {"The choices included death, Injury and stop for gas.", std::nullopt,
         certainty_failure::option_reiteration, true},
        // no category
        {"DNA sequence. because most carcinogens cause cancer by altering the DNA ..", std::nullopt,
         certainty_failure::no_category, false},
        {"Model provided a clear explanation for why F is the correct ..", std::nullopt,
         certainty_failure::no_category, false},
        {"The answer is correct.", std::nullopt, certainty_failure::no_category, false},
        // a single option text is a legitimate restatement, not reiteration
        {"Refraction is simply what happens here.", std::nullopt, certainty_failure::no_category, true},
        // phrasing traps
        {"not certain at all", std::nullopt, certainty_failure::no_category, false},
        {"It is uncertain territory, no stated level.", std::nullopt, certainty_failure::no_category, false},
        {"somewhat certain. i.e. close but not guaranteed", 0.4, std::nullopt, false},
    };
    return cases;
}

}  // namespace confalign::test
