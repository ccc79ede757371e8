#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "printdbg/errors.hpp"
#include "printdbg/oracle.hpp"
#include "printdbg/orchestrator.hpp"

#include <cstdlib>
#include <fstream>

#include <unistd.h>

using namespace printdbg;
using namespace printdbg::orchestrator;
using strategies::StrategyKind;
namespace fs = std::filesystem;

namespace {

const fs::path kAssets{PRINTDBG_ASSETS_DIR};
const fs::path kSampleCorpus{PRINTDBG_SAMPLE_CORPUS_DIR};

fs::path make_temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("printdbg-orc-" + tag + "-" +
                                                std::to_string(::getpid()) + "-" +
                                                std::to_string(std::rand()));
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig test_config(StrategyKind strategy) {
    ExperimentConfig config;
    config.strategy = strategy;
    config.generation.model_name = "test-model";
    config.limits.wall_clock_timeout = std::chrono::milliseconds(5000);
    return config;
}

strategies::PromptFactory make_factory() {
    return strategies::PromptFactory(strategies::TemplateStore::load(kAssets), "python3");
}

corpus::Problem prepared(const std::string& id, const sandbox::Sandbox& sb,
                         const ExperimentConfig& config) {
    auto problems = corpus::load_corpus(kSampleCorpus);
    for (auto& p : problems) {
        if (p.id == id) {
            auto findings = corpus::prepare_problem(p, sb, config.limits);
            REQUIRE(findings.empty());
            return p;
        }
    }
    FAIL("missing sample problem " << id);
    return {};
}

gateway::Completion fenced(const std::string& analysis, const std::string& code) {
    gateway::Completion c;
    c.text = analysis + "\n```python\n" + code + "\n```\n";
    return c;
}

const std::string kCorrectRunningMax = "def running_maximum(nums):\n"
                                       "    best = None\n"
                                       "    out = []\n"
                                       "    for x in nums:\n"
                                       "        best = x if best is None or x > best else best\n"
                                       "        out.append(best)\n"
                                       "    return out";

const std::string kWrongRunningMax = "def running_maximum(nums):\n"
                                     "    return nums";

} // namespace

TEST_CASE("which_failing_case returns the case the judge revealed") {
    corpus::Problem p;
    p.test_cases = {{{StructuredValue(0)}, StructuredValue(0), corpus::CaseOrigin::example},
                    {{StructuredValue(1)}, StructuredValue(1), corpus::CaseOrigin::example},
                    {{StructuredValue(2)}, StructuredValue(2), corpus::CaseOrigin::example},
                    {{StructuredValue(3)}, StructuredValue(3), corpus::CaseOrigin::example}};
    judge::JudgeVerdict verdict;
    verdict.all_passed = false;
    judge::FailureDetail failure;
    failure.case_index = 0;
    verdict.first_failure = failure;
    CHECK(which_failing_case(p, verdict).input[0] == StructuredValue(0));

    verdict.first_failure->case_index = 3;
    CHECK(which_failing_case(p, verdict).input[0] == StructuredValue(3));

    judge::JudgeVerdict passing;
    passing.all_passed = true;
    CHECK_THROWS_AS(which_failing_case(p, passing), std::logic_error);
}

TEST_CASE("correct on first try: one round, solved at round 0") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::print_debug);
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();

    auto backend = std::make_shared<gateway::ScriptedBackend>(
        std::vector<gateway::Completion>{fenced("Track the best so far.", kCorrectRunningMax)});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::solved);
    REQUIRE(transcript.solved_at_round.has_value());
    CHECK(*transcript.solved_at_round == 0);
    REQUIRE(transcript.rounds.size() == 1);
    CHECK(transcript.rounds[0].verdict.all_passed);
    CHECK_FALSE(transcript.rounds[0].instrumented_code.has_value());
    CHECK_FALSE(transcript.rounds[0].log.has_value());
}

TEST_CASE("never-improving fixes exhaust the budget after exactly 1 + 3 rounds") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::simple_feedback);
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();

    std::vector<gateway::Completion> script;
    script.push_back(fenced("First try.", kWrongRunningMax));
    for (int i = 0; i < 3; ++i) {
        script.push_back(fenced("Attempt " + std::to_string(i + 1) + ".", kWrongRunningMax));
    }
    auto backend = std::make_shared<gateway::ScriptedBackend>(script);
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::exhausted);
    CHECK_FALSE(transcript.solved_at_round.has_value());
    REQUIRE(transcript.rounds.size() == 4); // round 0 + 3 non-improving rounds
    for (std::size_t i = 1; i < transcript.rounds.size(); ++i) {
        CHECK_FALSE(transcript.rounds[i].improvement);
    }
    CHECK(backend->calls() == 4);
}

TEST_CASE("print debugging cycle: instrument, execute, analyse, fix, solve") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::print_debug);
    auto problem = prepared("prefix-common-array", sb, config);
    auto factory = make_factory();

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

    auto backend = std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{
        fenced("Count elements present at equal positions.", buggy),
        fenced("Adding prints at the loop head and tail.", instrumented),
        fenced("The test case expects c[1]=2 because 1 and 3 appear in both prefixes, but the "
               "log shows common_elements is still empty at i=1. The condition a[i] == b[i] "
               "only counts equal positions. Tracking both prefixes as sets fixes it.",
               fixed)});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::solved);
    REQUIRE(transcript.solved_at_round.has_value());
    CHECK(*transcript.solved_at_round == 1);
    REQUIRE(transcript.rounds.size() == 2);

    const RoundRecord& debug_round = transcript.rounds[1];
    REQUIRE(debug_round.instrumented_code.has_value());
    REQUIRE(debug_round.instrumentation_report.has_value());
    CHECK(debug_round.instrumentation_report->valid);
    CHECK(debug_round.instrumentation_report->inserted_print_count == 2);
    CHECK_FALSE(debug_round.instrumentation_fallback);
    REQUIRE(debug_round.log.has_value());
    // two prints per loop iteration over the 4-element failing case
    CHECK(debug_round.log->lines.size() == 8);
    CHECK(debug_round.log->lines[0].find("i=0") != std::string::npos);
    CHECK(debug_round.improvement);
    CHECK(debug_round.verdict.all_passed);
    CHECK(backend->calls() == 3);
}

TEST_CASE("invalid instrumentation triggers one corrective re-prompt, then a flagged fallback") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::print_debug);
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();

    const std::string tampered = "def running_maximum(nums):\n"
                                 "    print('tracing')\n"
                                 "    return [max(nums[:i+1]) for i in range(len(nums))]";

    auto backend = std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{
        fenced("First try.", kWrongRunningMax),
        fenced("Instrumenting.", tampered), // edits the code instead of inserting prints
        fenced("Still instrumenting.", tampered), // the corrective retry also fails
        fenced("Fixing.", kCorrectRunningMax)});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::solved);
    REQUIRE(transcript.rounds.size() == 2);
    const RoundRecord& round = transcript.rounds[1];
    CHECK(round.instrumentation_fallback);
    REQUIRE(round.instrumentation_report.has_value());
    CHECK_FALSE(round.instrumentation_report->valid);
    REQUIRE(round.log.has_value()); // executed as-is
    CHECK(backend->calls() == 4);
    // exchanges: instrument, instrument_retry, analyze_fix
    REQUIRE(round.exchanges.size() == 3);
    CHECK(round.exchanges[1].purpose == "instrument_retry");
}

TEST_CASE("a fix reply without code keeps the previous candidate and counts as non-improving") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::simple_feedback);
    config.no_improvement_budget = 1;
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();

    auto backend = std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{
        fenced("First try.", kWrongRunningMax),
        gateway::Completion{"I think the code is fine."},
        gateway::Completion{"Still no code here."}});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::exhausted);
    REQUIRE(transcript.rounds.size() == 2);
    const RoundRecord& round = transcript.rounds[1];
    CHECK(round.candidate_code.text() == kWrongRunningMax);
    CHECK_FALSE(round.improvement);
    REQUIRE(round.exchanges.size() == 2);
    CHECK(round.exchanges[1].purpose == "feedback_retry");
}

TEST_CASE("length-truncated completions are treated as parse failures") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::no_debug);
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();

    gateway::Completion cut = fenced("Partial.", kCorrectRunningMax);
    cut.finish_reason = gateway::FinishReason::length;
    auto backend = std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{
        cut, fenced("Here is the complete version.", kCorrectRunningMax)});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::solved);
    REQUIRE(transcript.rounds.size() == 1);
    REQUIRE(transcript.rounds[0].exchanges.size() == 2);
    CHECK(transcript.rounds[0].exchanges[1].purpose == "initial_retry");
}

TEST_CASE("no_debug stops after round 0 even when wrong") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::no_debug);
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();
    auto backend = std::make_shared<gateway::ScriptedBackend>(
        std::vector<gateway::Completion>{fenced("Try.", kWrongRunningMax)});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::exhausted);
    CHECK(transcript.rounds.size() == 1);
    CHECK(backend->calls() == 1);
}

TEST_CASE("gateway exhaustion mid-run is a harness fault with the transcript preserved") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::simple_feedback);
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();
    auto backend = std::make_shared<gateway::ScriptedBackend>(
        std::vector<gateway::Completion>{fenced("Try.", kWrongRunningMax)});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::harness_fault);
    REQUIRE(transcript.fault_message.has_value());
    CHECK(transcript.fault_message->find("gateway") != std::string::npos);
    CHECK(transcript.rounds.size() == 1); // round 0 survived
}

TEST_CASE("best-so-far pass count is non-decreasing and improvement is strict increase") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::simple_feedback);
    config.no_improvement_budget = 2;
    auto problem = prepared("running-maximum", sb, config);
    auto factory = make_factory();

    // passes exactly the single-element and duplicate-tail cases
    const std::string partial = "def running_maximum(nums):\n"
                                "    if len(nums) <= 1:\n"
                                "        return nums\n"
                                "    return nums";
    auto backend = std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{
        fenced("Give up early.", "def running_maximum(nums):\n    return []"),
        fenced("Handle singletons.", partial), // improves: passes one case
        fenced("No new idea.", partial),       // same pass count: not an improvement
        fenced("Full fix.", kCorrectRunningMax)});
    gateway::Gateway gw(backend);

    auto transcript = solve_problem(problem, config, gw, sb, factory);
    CHECK(transcript.final_status == FinalStatus::solved);
    REQUIRE(transcript.rounds.size() == 4);
    CHECK_FALSE(transcript.rounds[0].improvement); // zero passes
    CHECK(transcript.rounds[1].improvement);
    CHECK_FALSE(transcript.rounds[2].improvement);
    CHECK(transcript.rounds[3].improvement);

    std::size_t best = 0;
    for (const auto& round : transcript.rounds) {
        CHECK(std::max(best, round.verdict.passed_count) >= best);
        best = std::max(best, round.verdict.passed_count);
    }
    CHECK(best == transcript.rounds.back().verdict.passed_count);
}

TEST_CASE("record then replay reproduces a byte-identical transcript") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::print_debug);
    auto problem = prepared("prefix-common-array", sb, config);
    auto factory = make_factory();

    const std::string buggy = "def prefix_common_array(a, b):\n"
                              "    return [0] * len(a)";
    const std::string instrumented = "def prefix_common_array(a, b):\n"
                                     "    print('inputs', a, b)\n"
                                     "    return [0] * len(a)";
    const std::string fixed = "def prefix_common_array(a, b):\n"
                              "    seen_a = set()\n"
                              "    seen_b = set()\n"
                              "    out = []\n"
                              "    for i in range(len(a)):\n"
                              "        seen_a.add(a[i])\n"
                              "        seen_b.add(b[i])\n"
                              "        out.append(len(seen_a & seen_b))\n"
                              "    return out";
    const std::vector<gateway::Completion> script{fenced("All zeros first.", buggy),
                                                  fenced("Tracing inputs.", instrumented),
                                                  fenced("Count both prefixes.", fixed)};

    auto recorder =
        std::make_shared<gateway::RecordingBackend>(std::make_shared<gateway::ScriptedBackend>(script));
    gateway::Gateway record_gw(recorder);
    auto recorded_transcript = solve_problem(problem, config, record_gw, sb, factory);
    CHECK(recorded_transcript.final_status == FinalStatus::solved);

    auto replay = std::make_shared<gateway::ReplayBackend>(recorder->fixture());
    gateway::Gateway replay_gw(replay);
    auto replayed_transcript = solve_problem(problem, config, replay_gw, sb, factory);

    CHECK(transcript_to_json(replayed_transcript).dump(2) ==
          transcript_to_json(recorded_transcript).dump(2));
}

TEST_CASE("transcripts round-trip through their file format") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::print_debug);
    auto problem = prepared("prefix-common-array", sb, config);
    auto factory = make_factory();
    auto backend = std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{
        fenced("Try.", "def prefix_common_array(a, b):\n    return []"),
        fenced("Prints.", "def prefix_common_array(a, b):\n"
                          "    print('tracing', a, b)\n"
                          "    return []"),
        gateway::Completion{"no code"}, gateway::Completion{"still no code"},
    });
    gateway::Gateway gw(backend);
    auto config2 = config;
    config2.no_improvement_budget = 1;
    auto transcript = solve_problem(problem, config2, gw, sb, factory);

    const fs::path dir = make_temp_dir("roundtrip");
    const fs::path file = dir / "t.json";
    save_transcript(transcript, file);
    auto loaded = load_transcript(file);
    CHECK(transcript_to_json(loaded) == transcript_to_json(transcript));
    fs::remove_all(dir);
}

TEST_CASE("run_experiment: per-level tallies, persistence, resume skips finished work") {
    sandbox::Sandbox sb;
    auto config = test_config(StrategyKind::print_debug);
    auto factory = make_factory();

    auto problems = corpus::load_corpus(kSampleCorpus);
    std::vector<corpus::Problem> subset;
    for (auto& p : problems) {
        if (p.id == "running-maximum" || p.id == "sum-of-unique-elements" ||
            p.id == "longest-unique-substring") {
            auto findings = corpus::prepare_problem(p, sb, config.limits);
            REQUIRE(findings.empty());
            subset.push_back(p);
        }
    }
    REQUIRE(subset.size() == 3);

    const std::string correct_sum =
        "def sum_of_unique_elements(nums):\n"
        "    counts = {}\n"
        "    for x in nums:\n"
        "        counts[x] = counts.get(x, 0) + 1\n"
        "    return sum(x for x, c in counts.items() if c == 1)";
    const std::string correct_lus =
        "def longest_unique_substring(s):\n"
        "    last = {}\n"
        "    start = 0\n"
        "    best = 0\n"
        "    for i, ch in enumerate(s):\n"
        "        if ch in last and last[ch] >= start:\n"
        "            start = last[ch] + 1\n"
        "        last[ch] = i\n"
        "        best = max(best, i - start + 1)\n"
        "    return best";

    const fs::path out = make_temp_dir("experiment");
    {
        // three trivially-solved problems: 100% for every represented level
        auto backend = std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{
            fenced("Sliding window.", correct_lus), fenced("Track the best.", kCorrectRunningMax),
            fenced("Count.", correct_sum)});
        gateway::Gateway gw(backend);
        auto result = run_experiment(subset, config, gw, sb, factory, out, false);
        REQUIRE(result.transcripts.size() == 3);
        for (const auto& [level, tally] : result.per_level) {
            CHECK(tally.solved == tally.total);
        }
        CHECK(result.per_level[corpus::Level::easy].total == 2);
        CHECK(result.per_level[corpus::Level::medium].total == 1);
        CHECK(fs::exists(out / "print_debug" / "running-maximum.json"));
        CHECK(fs::exists(out / "print_debug" / "sum-of-unique-elements.json"));
    }
    {
        // resume: nothing left to do, so a no-response backend suffices
        auto backend =
            std::make_shared<gateway::ScriptedBackend>(std::vector<gateway::Completion>{});
        gateway::Gateway gw(backend);
        auto result = run_experiment(subset, config, gw, sb, factory, out, true);
        CHECK(result.per_level[corpus::Level::easy].solved == 2);
        CHECK(backend->calls() == 0);
    }
    {
        // deleting one transcript re-runs only that problem
        fs::remove(out / "print_debug" / "running-maximum.json");
        auto backend = std::make_shared<gateway::ScriptedBackend>(
            std::vector<gateway::Completion>{fenced("Again.", kCorrectRunningMax)});
        gateway::Gateway gw(backend);
        auto result = run_experiment(subset, config, gw, sb, factory, out, true);
        CHECK(result.per_level[corpus::Level::easy].solved == 2);
        CHECK(backend->calls() == 1);
    }
    {
        // a harness fault in one problem does not stop the experiment
        fs::remove_all(out);
        auto backend = std::make_shared<gateway::ScriptedBackend>(
            std::vector<gateway::Completion>{fenced("Only one reply.", kWrongRunningMax)});
        gateway::Gateway gw(backend);
        auto result = run_experiment(subset, config, gw, sb, factory, out, false);
        REQUIRE(result.transcripts.size() == 3);
        int faults = 0;
        for (const auto& t : result.transcripts) {
            faults += t.final_status == FinalStatus::harness_fault ? 1 : 0;
        }
        CHECK(faults >= 1);
    }
    fs::remove_all(out);
}
