// Regenerates the checked-in test fixtures: golden prompt renderings, the
// recorded replay cache, and the golden report files it reproduces.
// Run from the repository root: build/make_fixtures

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "confalign/backends.hpp"
#include "confalign/report.hpp"
#include "confalign/runner.hpp"

namespace fs = std::filesystem;
using namespace confalign;

namespace {

struct replay_row {
    question q;
    char chosen;
    double internal_confidence;  // dyadic so the pipeline reproduces it exactly
    const char* certainty_reply;
};

// Designed outcomes. Hand-derived statistics frozen in the unit tests:
//   verbal matrix (+=1.0, -=0.8): correct/incorrect = 5/1 and 2/2 -> (50,10,20,20)
//   internal matrix: median 0.828125 -> (50,0,20,30)
//   taxonomy at (0.9, 0.8): CA=3, EO=7
std::vector<replay_row> replay_design() {
    auto mk = [](const char* id, const char* stem, std::vector<const char*> options, char gold) {
        question q;
        q.id = id;
        q.stem = stem;
        char label = 'A';
        for (const char* text : options) q.options.push_back({label++, text});
        q.gold = gold;
        return q;
    };
    return {
        {mk("r01", "What do bees collect from flowers to make honey?",
            {"nectar", "sand", "wool", "ink", "gravel"}, 'A'),
         'A', 0.96875, "a. Very Certain. The answer matches the question directly."},
        {mk("r02", "Which instrument has six strings in its standard form?",
            {"trumpet", "guitar", "drum", "flute", "tuba"}, 'B'),
         'B', 0.9375, "a. Very Certain. The answer matches the question directly."},
        {mk("r03", "What freezes into ice when cooled below zero degrees Celsius?",
            {"sand", "oil", "water", "steel", "glass"}, 'C'),
         'C', 0.90625, "a. Very Certain. The answer matches the question directly."},
        {mk("r04", "Which planet is known for its prominent rings?",
            {"Mars", "Venus", "Mercury", "Saturn", "Pluto"}, 'D'),
         'D', 0.875, "a. Very Certain. The answer matches the question directly."},
        {mk("r05", "Where do penguins mostly live in the wild?",
            {"the Sahara", "rainforests", "coral reefs", "mountain caves", "Antarctica"}, 'E'),
         'E', 0.84375, "a. Very Certain. The answer matches the question directly."},
        {mk("r06", "What organ pumps blood through the human body?",
            {"the heart", "the liver", "the spine", "the skin", "the ear"}, 'A'),
         'A', 0.8125, "b. Fairly Certain. The answer is reasonable given the options."},
        {mk("r07", "Which gas do plants absorb from the air for photosynthesis?",
            {"helium", "carbon dioxide", "neon", "hydrogen", "argon"}, 'B'),
         'B', 0.78125, "b. Fairly Certain. The answer is reasonable given the options."},
        {mk("r08", "Which tool is best for driving a nail into wood?",
            {"a spoon", "scissors", "a screwdriver", "a hammer", "a brush"}, 'D'),
         'C', 0.75, "a. Very Certain. The answer matches the question directly."},
        {mk("r09", "Which ocean is the largest by area?",
            {"Arctic", "Indian", "Atlantic", "Southern", "Pacific"}, 'E'),
         'D', 0.71875, "b. Fairly Certain. The answer is reasonable given the options."},
        {mk("r10", "What is the primary source of energy for Earth's climate system?",
            {"the Sun", "the Moon", "volcanoes", "ocean currents", "city lights"}, 'A'),
         'E', 0.6875, "b. Fairly Certain. The answer is reasonable given the options."},
    };
}

completion answer_completion(const replay_row& row) {
    completion c;
    const std::string* text = row.q.option_text(row.chosen);
    c.text = std::string(1, row.chosen) + ". " + *text;
    c.answer_distribution.kind = score_kind::prob;
    double rest = (1.0 - row.internal_confidence) / static_cast<double>(row.q.options.size() - 1);
    for (const auto& o : row.q.options)
        c.answer_distribution.entries.push_back(
            {std::string(1, o.label), o.label == row.chosen ? row.internal_confidence : rest});
    return c;
}

completion text_completion(const std::string& text) {
    completion c;
    c.text = text;
    c.answer_distribution.kind = score_kind::prob;
    c.answer_distribution.entries.push_back({text.substr(0, 1), 1.0});
    return c;
}

const char* replay_config_text =
    "datasets = [\"tests/data/replay/questions.jsonl\"]\n"
    "backend = \"replay\"\n"
    "backend_id = \"mock-scripted\"\n"
    "model = \"scripted\"\n"
    "variant = \"full\"\n"
    "cache = \"tests/data/replay/cache.jsonl\"\n"
    "cache_mode = \"off\"\n"
    "templates = \"templates\"\n"
    "concurrency = 1\n"
    "out = \"runs/replay\"\n";

void make_replay_fixture() {
    fs::create_directories("tests/data/replay");
    fs::create_directories("tests/data/golden/replay");

    auto rows = replay_design();
    std::vector<question> questions;
    for (const auto& r : rows) questions.push_back(r.q);
    detail::write_file("tests/data/replay/questions.jsonl", serialize_questions(questions));
    detail::write_file("tests/data/replay/config.toml", replay_config_text);

    template_set templates = template_set::load("templates");
    run_config cfg = run_config_from_json(parse_config_text(replay_config_text));
    cfg.backend.kind = "mock";  // record from the scripted mock
    cfg.mode = cache_mode::record;

    scripted_backend scripted;
    for (const auto& row : rows) {
        scripted.script(build_answer_prompt(row.q, templates), answer_completion(row));
        completion ans = answer_completion(row);
        scripted.script(build_cqp(row.q, detail::trim(ans.text), cfg.variant, templates),
                        text_completion(row.certainty_reply));
    }

    fs::remove("tests/data/replay/cache.jsonl");
    completion_cache cache("tests/data/replay/cache.jsonl");
    cached_backend recorder(scripted, cache, cache_mode::record);

    run_result result = run_evaluation(recorder, cfg, templates, &recorder);
    alignment_report rep = build_report(result.records, cfg.thresholds);
    rep.model = scripted.model();
    rep.backend_id = scripted.id();

    detail::write_file("tests/data/golden/replay/records.jsonl", serialize_records(result.records));
    detail::write_file("tests/data/golden/replay/report.json", report_to_json(rep).dump(2) + "\n");
    detail::write_file("tests/data/golden/replay/report.md", report_to_markdown(rep));
    detail::write_file("tests/data/golden/replay/matrices.csv", matrices_to_csv(rep));
    detail::write_file("tests/data/golden/replay/histogram.csv", histograms_to_csv(rep));
    std::printf("replay fixture: %zu interactions recorded\n", cache.size());
}

struct golden_question {
    question q;
    std::string model_answer;
};

std::vector<golden_question> golden_questions() {
    auto mk = [](const char* id, const char* stem, std::vector<const char*> options, char gold,
                 const char* answer) {
        golden_question g;
        g.q.id = id;
        g.q.stem = stem;
        char label = 'A';
        for (const char* text : options) g.q.options.push_back({label++, text});
        g.q.gold = gold;
        g.model_answer = answer;
        return g;
    };
    return {
        mk("atmosphere", "Which of the following is a common element in the atmosphere?",
           {"Oxygen", "Nitrogen", "Gold", "Iron", "Helium"}, 'B', "B. Nitrogen"),
        mk("white_mice", "Where would you expect to find white mice?",
           {"attic", "countryside", "pet store", "fairy tale", "laboratory"}, 'E', "E. laboratory"),
        mk("party", "What is a social benefit of going to party?",
           {"getting drunk", "food", "plan", "having fun", "meeting new people"}, 'E',
           "E. meeting new people"),
    };
}

void make_golden_prompts() {
    fs::create_directories("tests/data/golden/prompts");
    template_set templates = template_set::load("templates");
    auto goldens = golden_questions();

    std::vector<question> questions;
    json answers = json::object();
    for (const auto& g : goldens) {
        questions.push_back(g.q);
        answers[g.q.id] = g.model_answer;
    }
    detail::write_file("tests/data/golden/prompts/questions.jsonl", serialize_questions(questions));
    detail::write_file("tests/data/golden/prompts/model_answers.json", answers.dump(2) + "\n");

    int files = 0;
    for (const auto& g : goldens) {
        detail::write_file("tests/data/golden/prompts/answer_" + g.q.id + ".txt",
                           build_answer_prompt(g.q, templates));
        ++files;
        for (const auto& name : cqp_template_names()) {
            prompt_variant v = prompt_variant::from_name(name);
            detail::write_file("tests/data/golden/prompts/cqp_" + name + "_" + g.q.id + ".txt",
                               build_cqp(g.q, g.model_answer, v, templates));
            ++files;
        }
    }
    std::printf("golden prompts: %d files\n", files);
}

}  // namespace

int main() {
    try {
        make_golden_prompts();
        make_replay_fixture();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "make_fixtures: %s\n", e.what());
        return 1;
    }
    return 0;
}
