#pragma once

#include "printdbg/corpus.hpp"
#include "printdbg/gateway.hpp"
#include "printdbg/judge.hpp"
#include "printdbg/sandbox.hpp"
#include "printdbg/strategies.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace printdbg::orchestrator {

struct PromptExchange {
    std::string purpose; // "initial", "instrument", "analyze_fix", "feedback", "*_retry"
    gateway::Conversation prompt;
    gateway::Completion completion;
};

/// One full iteration: round 0 is the initial attempt; later rounds carry the
/// debugging scaffold. improvement means this round strictly raised the
/// best-seen passed-case count.
struct RoundRecord {
    int round_index{0};
    std::vector<PromptExchange> exchanges;
    SourceCode candidate_code;
    std::optional<SourceCode> instrumented_code;
    std::optional<strategies::InstrumentationReport> instrumentation_report;
    bool instrumentation_fallback{false}; // still invalid after the corrective re-prompt
    std::optional<sandbox::LogText> log;
    judge::JudgeVerdict verdict;
    bool improvement{false};
};

enum class FinalStatus { solved, exhausted, harness_fault };

std::string to_string(FinalStatus status);
FinalStatus final_status_from_string(const std::string& s);

struct ProblemTranscript {
    std::string problem_id;
    corpus::Level level{corpus::Level::easy};
    strategies::StrategyKind strategy{strategies::StrategyKind::print_debug};
    std::vector<RoundRecord> rounds;
    FinalStatus final_status{FinalStatus::exhausted};
    std::optional<int> solved_at_round;
    std::optional<std::string> fault_message;
};

nlohmann::json transcript_to_json(const ProblemTranscript& t);
ProblemTranscript transcript_from_json(const nlohmann::json& j);
void save_transcript(const ProblemTranscript& t, const std::filesystem::path& file);
ProblemTranscript load_transcript(const std::filesystem::path& file);

struct ExperimentConfig {
    strategies::StrategyKind strategy{strategies::StrategyKind::print_debug};
    gateway::GenerationParams generation{};
    sandbox::ResourceLimits limits{};
    sandbox::TruncationPolicy truncation{};
    int no_improvement_budget{3};
    int max_total_rounds{10}; // debug rounds; round 0 comes on top
    judge::ComparePolicy compare{};
    std::string language_tag{"python3"};
};

/// Called after every completed round with the transcript so far
/// (write-ahead persistence); also called once when the final status is set.
using Checkpoint = std::function<void(const ProblemTranscript&)>;

/// Runs the full per-problem loop: initial attempt, judging, then
/// strategy-specific debug rounds until all tests pass, the no-improvement
/// budget is spent, or the round cap is hit. Gateway and sandbox faults end
/// the transcript with harness_fault, keeping everything recorded so far.
ProblemTranscript solve_problem(const corpus::Problem& problem, const ExperimentConfig& config,
                                gateway::Gateway& gw, const sandbox::Sandbox& sb,
                                const strategies::PromptFactory& prompts,
                                const Checkpoint& checkpoint = {});

/// The case the judge revealed: test_cases[verdict.first_failure.case_index].
/// Throws std::logic_error on a passing verdict.
const corpus::TestCase& which_failing_case(const corpus::Problem& problem,
                                           const judge::JudgeVerdict& verdict);

struct LevelTally {
    int solved{0};
    int total{0};
};

struct ExperimentResult {
    std::vector<ProblemTranscript> transcripts;
    strategies::StrategyKind strategy{strategies::StrategyKind::print_debug};
    std::map<corpus::Level, LevelTally> per_level;
};

/// Solves every problem in order, persisting one transcript file per problem
/// under <out_dir>/<strategy>/<problem-id>.json. With resume, problems whose
/// transcript file already exists are loaded, not re-run. A harness fault in
/// one problem never stops the others.
ExperimentResult run_experiment(const std::vector<corpus::Problem>& problems,
                                const ExperimentConfig& config, gateway::Gateway& gw,
                                const sandbox::Sandbox& sb,
                                const strategies::PromptFactory& prompts,
                                const std::filesystem::path& out_dir, bool resume = false);

} // namespace printdbg::orchestrator
