#include "printdbg/judge.hpp"

#include "printdbg/errors.hpp"

namespace printdbg::judge {

std::string to_string(CaseResult r) {
    switch (r) {
    case CaseResult::pass: return "pass";
    case CaseResult::wrong_answer: return "wrong_answer";
    case CaseResult::runtime_error: return "runtime_error";
    case CaseResult::timeout: return "timeout";
    }
    return "wrong_answer";
}

CaseResult case_result_from_string(const std::string& s) {
    if (s == "pass") return CaseResult::pass;
    if (s == "wrong_answer") return CaseResult::wrong_answer;
    if (s == "runtime_error") return CaseResult::runtime_error;
    if (s == "timeout") return CaseResult::timeout;
    throw ConfigError("unknown case result: " + s);
}

JudgeVerdict judge(const SourceCode& code, const corpus::Problem& problem,
                   const sandbox::Sandbox& sb, const sandbox::ResourceLimits& limits,
                   const ComparePolicy& policy) {
    if (problem.test_cases.empty()) {
        throw HarnessFault("problem '" + problem.id + "' has no test cases to judge");
    }
    const ComparePolicy effective = problem.compare_override.value_or(policy);

    JudgeVerdict verdict;
    verdict.total_count = problem.test_cases.size();
    for (std::size_t i = 0; i < problem.test_cases.size(); ++i) {
        const auto& tc = problem.test_cases[i];
        const sandbox::ExecutionResult exec =
            sb.execute(code, problem.function_signature, tc, limits);

        CaseResult outcome = CaseResult::pass;
        std::optional<StructuredValue> wrong;
        std::optional<std::string> error;
        switch (exec.kind) {
        case sandbox::OutcomeKind::returned:
            if (compare_values(exec.value, tc.expected_output, effective)) {
                outcome = CaseResult::pass;
            } else {
                outcome = CaseResult::wrong_answer;
                wrong = exec.value;
            }
            break;
        case sandbox::OutcomeKind::runtime_error:
            outcome = CaseResult::runtime_error;
            error = exec.error_class.empty() ? exec.error_message
                                             : exec.error_class + ": " + exec.error_message;
            // the interpreter's message usually already starts with the class
            if (!exec.error_class.empty() &&
                exec.error_message.rfind(exec.error_class + ":", 0) == 0) {
                error = exec.error_message;
            }
            break;
        case sandbox::OutcomeKind::timeout:
            outcome = CaseResult::timeout;
            error = "time limit exceeded: " + exec.error_message;
            break;
        case sandbox::OutcomeKind::harness_error:
            throw HarnessFault("sandbox failure while judging '" + problem.id + "' case " +
                               std::to_string(i) + ": " + exec.error_message);
        }

        verdict.per_case.push_back(outcome);
        if (outcome == CaseResult::pass) {
            ++verdict.passed_count;
        } else if (!verdict.first_failure) {
            FailureDetail detail;
            detail.case_index = i;
            detail.input = tc.input;
            detail.wrong_answer = wrong;
            detail.expected_answer = tc.expected_output;
            detail.error_message = error;
            detail.failure_kind = outcome;
            verdict.first_failure = std::move(detail);
        }
    }
    verdict.all_passed = verdict.passed_count == verdict.total_count;
    return verdict;
}

} // namespace printdbg::judge
