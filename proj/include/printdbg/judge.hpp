#pragma once

#include "printdbg/compare.hpp"
#include "printdbg/corpus.hpp"
#include "printdbg/sandbox.hpp"

#include <optional>
#include <string>
#include <vector>

namespace printdbg::judge {

enum class CaseResult { pass, wrong_answer, runtime_error, timeout };

std::string to_string(CaseResult r);
CaseResult case_result_from_string(const std::string& s);

/// The first failing case, mirroring what an online judging system reveals:
/// input, wrong answer (when there is one), error message (when there is
/// one), and the expected answer.
struct FailureDetail {
    std::size_t case_index{0};
    std::vector<StructuredValue> input;
    std::optional<StructuredValue> wrong_answer; // present iff wrong_answer kind
    StructuredValue expected_answer;
    std::optional<std::string> error_message; // present iff runtime_error/timeout
    CaseResult failure_kind{CaseResult::wrong_answer};
};

struct JudgeVerdict {
    std::size_t passed_count{0};
    std::size_t total_count{0};
    bool all_passed{false};
    std::optional<FailureDetail> first_failure;
    std::vector<CaseResult> per_case;
};

/// Evaluates every test case in corpus order and reports the verdict.
/// All cases are evaluated (no early stop) so pass counts are complete;
/// first_failure still identifies the lowest failing index. Throws
/// HarnessFault if the sandbox itself fails; that is never the
/// candidate's wrong answer.
JudgeVerdict judge(const SourceCode& code, const corpus::Problem& problem,
                   const sandbox::Sandbox& sb, const sandbox::ResourceLimits& limits,
                   const ComparePolicy& policy);

} // namespace printdbg::judge
