// Regenerates the bundled replay fixtures by driving the real per-problem
// loop against scripted completions and recording every request. Run after
// changing prompt templates, the sample corpus, or the loop itself:
//
//   fixturegen <repo-root>
//
// Writes fixtures/*.json including the fixture manifest.

#include "printdbg/errors.hpp"
#include "printdbg/gateway.hpp"
#include "printdbg/oracle.hpp"
#include "printdbg/orchestrator.hpp"

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace printdbg;
using strategies::StrategyKind;

namespace {

gateway::Completion fenced(const std::string& analysis, const std::string& code) {
    gateway::Completion c;
    c.text = analysis + "\n```python\n" + code + "\n```\n";
    return c;
}

corpus::Problem prepared_problem(const fs::path& corpus_dir, const std::string& id,
                                 const sandbox::Sandbox& sb,
                                 const sandbox::ResourceLimits& limits) {
    auto problems = corpus::load_corpus(corpus_dir);
    for (auto& p : problems) {
        if (p.id == id) {
            auto findings = corpus::prepare_problem(p, sb, limits);
            if (!findings.empty()) {
                throw CorpusError("oracle findings while preparing " + id);
            }
            return p;
        }
    }
    throw CorpusError("problem not found: " + id);
}

struct FixtureSpec {
    std::string name;
    std::string problem_id;
    StrategyKind strategy;
    std::vector<gateway::Completion> script;
};

std::vector<FixtureSpec> fixture_specs() {
    std::vector<FixtureSpec> specs;

    // solved immediately at round 0
    specs.push_back(
        {"solved_round0", "sum-of-unique-elements", StrategyKind::print_debug,
         {fenced("Count occurrences, then add up the values that occur exactly once.",
                 "def sum_of_unique_elements(nums):\n"
                 "    counts = {}\n"
                 "    for x in nums:\n"
                 "        counts[x] = counts.get(x, 0) + 1\n"
                 "    return sum(x for x, c in counts.items() if c == 1)")}});

    // one full print-debugging cycle: buggy attempt, two inserted prints,
    // analysis of the traced run, fixed code
    const std::string buggy = "def prefix_common_array(a, b):\n"
                              "    common_elements = set()\n"
                              "    common_array = []\n"
                              "    for i in range(len(a)):\n"
                              "        if a[i] == b[i]:\n"
                              "            common_elements.add(a[i])\n"
                              "        common_array.append(len(common_elements))\n"
                              "    return common_array";
    const std::string instrumented =
        "def prefix_common_array(a, b):\n"
        "    common_elements = set()\n"
        "    common_array = []\n"
        "    for i in range(len(a)):\n"
        "        print(f\"i={i} a_i={a[i]} b_i={b[i]} common_elements={common_elements}\")\n"
        "        if a[i] == b[i]:\n"
        "            common_elements.add(a[i])\n"
        "        common_array.append(len(common_elements))\n"
        "        print(f\"common_array={common_array}\")\n"
        "    return common_array";
    const std::string fixed = "def prefix_common_array(a, b):\n"
                              "    seen_a = set()\n"
                              "    seen_b = set()\n"
                              "    common_array = []\n"
                              "    for i in range(len(a)):\n"
                              "        seen_a.add(a[i])\n"
                              "        seen_b.add(b[i])\n"
                              "        common_array.append(len(seen_a & seen_b))\n"
                              "    return common_array";
    specs.push_back(
        {"print_debug_cycle", "prefix-common-array", StrategyKind::print_debug,
         {fenced("Track values that match position by position and count them.", buggy),
          fenced("I will add print statements in two places: one at the beginning of the loop "
                 "body to show i, a[i], b[i] and the common elements so far, and one at the end "
                 "of the loop body to show the common array being built.",
                 instrumented),
          fenced("Explanation of the test case, step by step: for a = [1,3,2,4] and "
                 "b = [3,1,2,4], at index 0 the prefixes {1} and {3} share nothing, so c[0] = 0; "
                 "at index 1 the prefixes {1,3} and {3,1} contain the same two values, so "
                 "c[1] = 2; at index 2 both prefixes also contain 2, so c[2] = 3; at index 3 "
                 "both contain 4, so c[3] = 4.\n"
                 "Explanation of the log, line by line: line 1 shows common_elements is empty at "
                 "i=0; line 2 shows common_array=[0]; line 3 shows common_elements is still "
                 "empty at i=1 even though 1 and 3 appear in both prefixes; line 4 shows "
                 "common_array=[0, 0].\n"
                 "The inconsistency is at index 1: the test case expects c[1] = 2 but the log "
                 "shows the code counted nothing, because the condition `if a[i] == b[i]` only "
                 "collects values that match at the same position. The fix is to track the "
                 "values seen in each prefix separately and count the intersection.",
                 fixed)}});

    // fixes that never change the pass count: spends the whole budget
    const std::string wrong = "def running_maximum(nums):\n"
                              "    return nums";
    specs.push_back({"budget_exhausted", "running-maximum", StrategyKind::simple_feedback,
                     {fenced("Return the list as is.", wrong),
                      fenced("Maybe the indexing is off; returning the list again.", wrong),
                      fenced("Perhaps the input needs copying first.", wrong),
                      fenced("Trying the same approach once more.", wrong)}});
    return specs;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: fixturegen <repo-root>\n";
        return 1;
    }
    const fs::path root = argv[1];
    const fs::path corpus_dir = root / "sample-corpus";
    const fs::path fixtures_dir = root / "fixtures";
    fs::create_directories(fixtures_dir);

    orchestrator::ExperimentConfig config;
    config.generation.model_name = "fixture-model";
    sandbox::Sandbox sb;
    auto prompts = strategies::PromptFactory(
        strategies::TemplateStore::load(root / "assets" / "templates"), config.language_tag);

    nlohmann::json manifest;
    manifest["fixtures"] = nlohmann::json::array();
    for (const auto& spec : fixture_specs()) {
        config.strategy = spec.strategy;
        auto problem = prepared_problem(corpus_dir, spec.problem_id, sb, config.limits);

        auto scripted = std::make_shared<gateway::ScriptedBackend>(spec.script);
        auto recorder = std::make_shared<gateway::RecordingBackend>(scripted);
        gateway::Gateway gw(recorder);
        auto transcript = orchestrator::solve_problem(problem, config, gw, sb, prompts);
        if (transcript.final_status == orchestrator::FinalStatus::harness_fault) {
            std::cerr << spec.name << ": harness fault: "
                      << transcript.fault_message.value_or("") << "\n";
            return 1;
        }

        auto fixture = recorder->fixture();
        fixture.recorded_at = "2024-01-01T00:00:00Z"; // fixed: fixtures are versioned files
        const fs::path file = fixtures_dir / (spec.name + ".json");
        fixture.save(file);
        manifest["fixtures"].push_back(
            {{"name", spec.name},
             {"file", spec.name + ".json"},
             {"problem_id", spec.problem_id},
             {"strategy", strategies::to_string(spec.strategy)},
             {"final_status", orchestrator::to_string(transcript.final_status)},
             {"rounds", transcript.rounds.size()},
             {"entries", fixture.entries.size()}});
        std::cout << spec.name << ": " << orchestrator::to_string(transcript.final_status)
                  << " after " << transcript.rounds.size() << " rounds, "
                  << fixture.entries.size() << " fixture entries\n";
    }
    std::ofstream out(fixtures_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    return 0;
}
