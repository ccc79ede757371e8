#include "printdbg/orchestrator.hpp"

#include "printdbg/errors.hpp"

#include <algorithm>
#include <fstream>

namespace printdbg::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;
using strategies::StrategyKind;

std::string to_string(FinalStatus status) {
    switch (status) {
    case FinalStatus::solved: return "solved";
    case FinalStatus::exhausted: return "exhausted";
    case FinalStatus::harness_fault: return "harness_fault";
    }
    return "exhausted";
}

FinalStatus final_status_from_string(const std::string& s) {
    if (s == "solved") return FinalStatus::solved;
    if (s == "exhausted") return FinalStatus::exhausted;
    if (s == "harness_fault") return FinalStatus::harness_fault;
    throw ConfigError("unknown final status: " + s);
}

const corpus::TestCase& which_failing_case(const corpus::Problem& problem,
                                           const judge::JudgeVerdict& verdict) {
    if (verdict.all_passed || !verdict.first_failure) {
        throw std::logic_error("which_failing_case called on a passing verdict");
    }
    return problem.test_cases.at(verdict.first_failure->case_index);
}

// ---------------------------------------------------------------------------
// Transcript serialization
// ---------------------------------------------------------------------------

namespace {

json conversation_to_json(const gateway::Conversation& conv) {
    json j = json::array();
    for (const auto& m : conv.messages) {
        j.push_back(json{{"role", gateway::to_string(m.role)}, {"content", m.content}});
    }
    return j;
}

gateway::Conversation conversation_from_json(const json& j) {
    gateway::Conversation conv;
    for (const auto& jm : j) {
        conv.add(gateway::role_from_string(jm.at("role").get<std::string>()),
                 jm.at("content").get<std::string>());
    }
    return conv;
}

json source_to_json(const SourceCode& code) {
    return json{{"language_tag", code.language_tag}, {"lines", code.lines}};
}

SourceCode source_from_json(const json& j) {
    SourceCode code;
    code.language_tag = j.at("language_tag").get<std::string>();
    code.lines = j.at("lines").get<std::vector<std::string>>();
    return code;
}

json log_to_json(const sandbox::LogText& log) {
    return json{{"lines", log.lines},
                {"truncated", log.truncated},
                {"original_line_count", log.original_line_count}};
}

sandbox::LogText log_from_json(const json& j) {
    sandbox::LogText log;
    log.lines = j.at("lines").get<std::vector<std::string>>();
    log.truncated = j.at("truncated").get<bool>();
    log.original_line_count = j.at("original_line_count").get<std::size_t>();
    return log;
}

json verdict_to_json(const judge::JudgeVerdict& verdict) {
    json j;
    j["passed_count"] = verdict.passed_count;
    j["total_count"] = verdict.total_count;
    j["all_passed"] = verdict.all_passed;
    json per_case = json::array();
    for (const auto result : verdict.per_case) {
        per_case.push_back(judge::to_string(result));
    }
    j["per_case"] = std::move(per_case);
    if (verdict.first_failure) {
        const auto& f = *verdict.first_failure;
        json jf;
        jf["case_index"] = f.case_index;
        jf["input"] = f.input;
        if (f.wrong_answer) {
            jf["wrong_answer"] = *f.wrong_answer;
        }
        jf["expected_answer"] = f.expected_answer;
        if (f.error_message) {
            jf["error_message"] = *f.error_message;
        }
        jf["failure_kind"] = judge::to_string(f.failure_kind);
        j["first_failure"] = std::move(jf);
    }
    return j;
}

judge::JudgeVerdict verdict_from_json(const json& j) {
    judge::JudgeVerdict verdict;
    verdict.passed_count = j.at("passed_count").get<std::size_t>();
    verdict.total_count = j.at("total_count").get<std::size_t>();
    verdict.all_passed = j.at("all_passed").get<bool>();
    for (const auto& jc : j.at("per_case")) {
        verdict.per_case.push_back(judge::case_result_from_string(jc.get<std::string>()));
    }
    if (j.contains("first_failure")) {
        const auto& jf = j.at("first_failure");
        judge::FailureDetail f;
        f.case_index = jf.at("case_index").get<std::size_t>();
        for (const auto& v : jf.at("input")) {
            f.input.push_back(v);
        }
        if (jf.contains("wrong_answer")) {
            f.wrong_answer = jf.at("wrong_answer");
        }
        f.expected_answer = jf.at("expected_answer");
        if (jf.contains("error_message")) {
            f.error_message = jf.at("error_message").get<std::string>();
        }
        f.failure_kind = judge::case_result_from_string(jf.at("failure_kind").get<std::string>());
        verdict.first_failure = std::move(f);
    }
    return verdict;
}

json report_to_json(const strategies::InstrumentationReport& report) {
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back(json{{"line_number", v.line_number}, {"description", v.description}});
    }
    return json{{"valid", report.valid},
                {"inserted_print_count", report.inserted_print_count},
                {"violations", std::move(violations)}};
}

strategies::InstrumentationReport report_from_json(const json& j) {
    strategies::InstrumentationReport report;
    report.valid = j.at("valid").get<bool>();
    report.inserted_print_count = j.at("inserted_print_count").get<std::size_t>();
    for (const auto& jv : j.at("violations")) {
        report.violations.push_back({jv.at("line_number").get<std::size_t>(),
                                     jv.at("description").get<std::string>()});
    }
    return report;
}

} // namespace

json transcript_to_json(const ProblemTranscript& t) {
    json j;
    j["problem_id"] = t.problem_id;
    j["level"] = corpus::to_string(t.level);
    j["strategy"] = strategies::to_string(t.strategy);
    j["final_status"] = to_string(t.final_status);
    if (t.solved_at_round) {
        j["solved_at_round"] = *t.solved_at_round;
    }
    if (t.fault_message) {
        j["fault_message"] = *t.fault_message;
    }
    j["rounds"] = json::array();
    for (const auto& round : t.rounds) {
        json jr;
        jr["round_index"] = round.round_index;
        jr["exchanges"] = json::array();
        for (const auto& exchange : round.exchanges) {
            jr["exchanges"].push_back(
                json{{"purpose", exchange.purpose},
                     {"prompt", conversation_to_json(exchange.prompt)},
                     {"completion", gateway::completion_to_json(exchange.completion)}});
        }
        jr["candidate_code"] = source_to_json(round.candidate_code);
        if (round.instrumented_code) {
            jr["instrumented_code"] = source_to_json(*round.instrumented_code);
        }
        if (round.instrumentation_report) {
            jr["instrumentation_report"] = report_to_json(*round.instrumentation_report);
        }
        if (round.instrumentation_fallback) {
            jr["instrumentation_fallback"] = true;
        }
        if (round.log) {
            jr["log"] = log_to_json(*round.log);
        }
        jr["verdict"] = verdict_to_json(round.verdict);
        jr["improvement"] = round.improvement;
        j["rounds"].push_back(std::move(jr));
    }
    return j;
}

ProblemTranscript transcript_from_json(const json& j) {
    ProblemTranscript t;
    t.problem_id = j.at("problem_id").get<std::string>();
    t.level = corpus::level_from_string(j.at("level").get<std::string>());
    t.strategy = strategies::strategy_from_string(j.at("strategy").get<std::string>());
    t.final_status = final_status_from_string(j.at("final_status").get<std::string>());
    if (j.contains("solved_at_round")) {
        t.solved_at_round = j.at("solved_at_round").get<int>();
    }
    if (j.contains("fault_message")) {
        t.fault_message = j.at("fault_message").get<std::string>();
    }
    for (const auto& jr : j.at("rounds")) {
        RoundRecord round;
        round.round_index = jr.at("round_index").get<int>();
        for (const auto& je : jr.at("exchanges")) {
            round.exchanges.push_back({je.at("purpose").get<std::string>(),
                                       conversation_from_json(je.at("prompt")),
                                       gateway::completion_from_json(je.at("completion"))});
        }
        round.candidate_code = source_from_json(jr.at("candidate_code"));
        if (jr.contains("instrumented_code")) {
            round.instrumented_code = source_from_json(jr.at("instrumented_code"));
        }
        if (jr.contains("instrumentation_report")) {
            round.instrumentation_report = report_from_json(jr.at("instrumentation_report"));
        }
        round.instrumentation_fallback = jr.value("instrumentation_fallback", false);
        if (jr.contains("log")) {
            round.log = log_from_json(jr.at("log"));
        }
        round.verdict = verdict_from_json(jr.at("verdict"));
        round.improvement = jr.at("improvement").get<bool>();
        t.rounds.push_back(std::move(round));
    }
    return t;
}

void save_transcript(const ProblemTranscript& t, const fs::path& file) {
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) {
            throw HarnessFault("cannot write transcript file: " + file.string());
        }
        out << transcript_to_json(t).dump(2) << '\n';
    }
    fs::rename(tmp, file);
}

ProblemTranscript load_transcript(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw HarnessFault("cannot open transcript file: " + file.string());
    }
    json j;
    in >> j;
    return transcript_from_json(j);
}

// ---------------------------------------------------------------------------
// The per-problem loop
// ---------------------------------------------------------------------------

namespace {

struct CodeRequest {
    SourceCode code;
    bool parsed_ok = false;
};

// One model call expected to yield code; retries once with a corrective
// prompt when the reply has no code block or was cut off at the token limit.
CodeRequest request_code(gateway::Gateway& gw, const ExperimentConfig& config,
                         const strategies::PromptFactory& prompts,
                         gateway::Conversation conversation, const std::string& purpose,
                         std::vector<PromptExchange>& exchanges) {
    gateway::Completion completion = gw.complete(conversation, config.generation);
    exchanges.push_back({purpose, conversation, completion});

    auto usable = [&](const gateway::Completion& c) -> std::optional<SourceCode> {
        if (c.finish_reason == gateway::FinishReason::length) {
            return std::nullopt; // truncated completion: partial code is worse than none
        }
        auto parsed = strategies::parse_completion(c.text, config.language_tag);
        if (parsed.code) {
            SourceCode code = *parsed.code;
            code.language_tag = config.language_tag;
            return code;
        }
        return std::nullopt;
    };

    if (auto code = usable(completion)) {
        return {*code, true};
    }
    gateway::Conversation retry = prompts.build_no_code_retry(conversation, completion);
    gateway::Completion second = gw.complete(retry, config.generation);
    exchanges.push_back({purpose + "_retry", retry, second});
    if (auto code = usable(second)) {
        return {*code, true};
    }
    return {SourceCode{{}, config.language_tag}, false};
}

} // namespace

ProblemTranscript solve_problem(const corpus::Problem& problem, const ExperimentConfig& config,
                                gateway::Gateway& gw, const sandbox::Sandbox& sb,
                                const strategies::PromptFactory& prompts,
                                const Checkpoint& checkpoint) {
    ProblemTranscript transcript;
    transcript.problem_id = problem.id;
    transcript.level = problem.level;
    transcript.strategy = config.strategy;

    const auto matcher = strategies::PrintMatcher::for_language(config.language_tag);
    auto save_point = [&]() {
        if (checkpoint) {
            checkpoint(transcript);
        }
    };

    std::size_t best_passed = 0;
    int stale_rounds = 0;
    SourceCode candidate;

    try {
        // round 0: initial attempt from the problem statement alone
        {
            RoundRecord round;
            round.round_index = 0;
            CodeRequest request =
                request_code(gw, config, prompts, prompts.build_initial_prompt(problem),
                             "initial", round.exchanges);
            candidate = request.code;
            round.candidate_code = candidate;
            round.verdict = judge::judge(candidate, problem, sb, config.limits, config.compare);
            round.improvement = round.verdict.passed_count > 0;
            best_passed = round.verdict.passed_count;
            transcript.rounds.push_back(std::move(round));
            save_point();
        }

        while (true) {
            const judge::JudgeVerdict& verdict = transcript.rounds.back().verdict;
            if (verdict.all_passed) {
                transcript.final_status = FinalStatus::solved;
                transcript.solved_at_round = transcript.rounds.back().round_index;
                break;
            }
            const int debug_rounds_done = static_cast<int>(transcript.rounds.size()) - 1;
            if (config.strategy == StrategyKind::no_debug ||
                stale_rounds >= config.no_improvement_budget ||
                debug_rounds_done >= config.max_total_rounds) {
                transcript.final_status = FinalStatus::exhausted;
                break;
            }

            RoundRecord round;
            round.round_index = debug_rounds_done + 1;

            if (strategies::is_print_debug_family(config.strategy)) {
                std::optional<SourceCode> instrumented;
                std::optional<sandbox::LogText> log;

                if (config.strategy != StrategyKind::print_debug_case_only) {
                    // step 1: add print statements
                    gateway::Conversation conv =
                        prompts.build_instrumentation_prompt(problem, candidate, verdict);
                    CodeRequest request =
                        request_code(gw, config, prompts, conv, "instrument", round.exchanges);
                    SourceCode instr = request.parsed_ok ? request.code : candidate;
                    auto report = strategies::validate_instrumentation(candidate, instr, matcher);
                    if (!report.valid) {
                        // one corrective re-prompt quoting the violations
                        gateway::Conversation retry = prompts.build_instrumentation_retry(
                            round.exchanges.back().prompt, round.exchanges.back().completion,
                            report);
                        gateway::Completion second = gw.complete(retry, config.generation);
                        round.exchanges.push_back({"instrument_retry", retry, second});
                        auto reparsed =
                            strategies::parse_completion(second.text, config.language_tag);
                        if (second.finish_reason != gateway::FinishReason::length &&
                            reparsed.code) {
                            instr = *reparsed.code;
                            instr.language_tag = config.language_tag;
                            report =
                                strategies::validate_instrumentation(candidate, instr, matcher);
                        }
                        if (!report.valid) {
                            // execute the instrumented code as-is but flag the round
                            round.instrumentation_fallback = true;
                        }
                    }
                    round.instrumentation_report = report;
                    instrumented = instr;
                    round.instrumented_code = instrumented;

                    // step 2: execute on the first failing case, keep the log
                    const corpus::TestCase& failing = which_failing_case(problem, verdict);
                    const sandbox::ExecutionResult exec = sb.execute(
                        *instrumented, problem.function_signature, failing, config.limits);
                    if (exec.kind == sandbox::OutcomeKind::harness_error) {
                        throw HarnessFault("sandbox failure executing instrumented code: " +
                                           exec.error_message);
                    }
                    log = sandbox::truncate_log(exec.raw_log, config.truncation);
                    round.log = log;
                }

                // step 3: analyse and fix
                const SourceCode& shown =
                    instrumented && config.strategy != StrategyKind::print_debug_case_only
                        ? *instrumented
                        : candidate;
                gateway::Conversation conv = prompts.build_analysis_fix_prompt(
                    problem, shown, verdict, log, config.strategy);
                CodeRequest request =
                    request_code(gw, config, prompts, conv, "analyze_fix", round.exchanges);
                if (request.parsed_ok) {
                    candidate = request.code;
                }
                // on parse failure the previous candidate is retained and the
                // round can only be non-improving
            } else {
                gateway::Conversation conv =
                    prompts.build_baseline_prompt(problem, candidate, verdict, config.strategy);
                CodeRequest request =
                    request_code(gw, config, prompts, conv, "feedback", round.exchanges);
                if (request.parsed_ok) {
                    candidate = request.code;
                }
            }

            round.candidate_code = candidate;
            round.verdict = judge::judge(candidate, problem, sb, config.limits, config.compare);
            round.improvement = round.verdict.passed_count > best_passed;
            if (round.improvement) {
                best_passed = round.verdict.passed_count;
                stale_rounds = 0;
            } else {
                ++stale_rounds;
            }
            transcript.rounds.push_back(std::move(round));
            save_point();
        }
    } catch (const GatewayError& e) {
        transcript.final_status = FinalStatus::harness_fault;
        transcript.fault_message = std::string("gateway: ") + e.what();
    } catch (const HarnessFault& e) {
        transcript.final_status = FinalStatus::harness_fault;
        transcript.fault_message = std::string("harness: ") + e.what();
    }
    save_point();
    return transcript;
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const std::vector<corpus::Problem>& problems,
                                const ExperimentConfig& config, gateway::Gateway& gw,
                                const sandbox::Sandbox& sb,
                                const strategies::PromptFactory& prompts,
                                const fs::path& out_dir, bool resume) {
    ExperimentResult result;
    result.strategy = config.strategy;
    const fs::path strategy_dir = out_dir / strategies::to_string(config.strategy);
    fs::create_directories(strategy_dir);

    for (const auto& problem : problems) {
        const fs::path file = strategy_dir / (problem.id + ".json");
        ProblemTranscript transcript;
        if (resume && fs::exists(file)) {
            transcript = load_transcript(file);
        } else {
            transcript = solve_problem(problem, config, gw, sb, prompts,
                                       [&](const ProblemTranscript& t) {
                                           save_transcript(t, file);
                                       });
        }
        auto& tally = result.per_level[problem.level];
        ++tally.total;
        if (transcript.final_status == FinalStatus::solved) {
            ++tally.solved;
        }
        result.transcripts.push_back(std::move(transcript));
    }
    return result;
}

} // namespace printdbg::orchestrator
