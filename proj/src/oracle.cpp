#include "printdbg/oracle.hpp"

#include "printdbg/compare.hpp"
#include "printdbg/errors.hpp"

#include <sstream>

namespace printdbg::corpus {

OracleDerivation derive_oracle_cases(const Problem& p,
                                     const std::vector<std::vector<StructuredValue>>& extra_inputs,
                                     const sandbox::Sandbox& sb,
                                     const sandbox::ResourceLimits& limits) {
    const judge::ComparePolicy policy = p.compare_override.value_or(judge::ComparePolicy{});

    // precondition: the reference must pass its own example-origin cases
    for (std::size_t i = 0; i < p.test_cases.size(); ++i) {
        const auto& tc = p.test_cases[i];
        if (tc.origin != CaseOrigin::example) {
            continue;
        }
        const auto exec = sb.execute(p.reference_solution, p.function_signature, tc, limits);
        if (exec.kind != sandbox::OutcomeKind::returned ||
            !judge::compare_values(exec.value, tc.expected_output, policy)) {
            std::ostringstream os;
            os << "corpus defect in '" << p.id << "': reference solution fails example case " << i;
            if (exec.kind != sandbox::OutcomeKind::returned) {
                os << " (" << sandbox::to_string(exec.kind) << ": " << exec.error_message << ")";
            }
            throw CorpusError(os.str());
        }
    }

    OracleDerivation result;
    for (std::size_t i = 0; i < extra_inputs.size(); ++i) {
        const auto& input = extra_inputs[i];
        TestCase probe{input, StructuredValue{}, CaseOrigin::oracle_derived};
        const auto exec = sb.execute(p.reference_solution, p.function_signature, probe, limits);
        switch (exec.kind) {
        case sandbox::OutcomeKind::returned:
            result.cases.push_back({input, exec.value, CaseOrigin::oracle_derived});
            break;
        case sandbox::OutcomeKind::timeout: {
            std::ostringstream os;
            os << p.id << ": oracle timeout on extra input " << i << "; input rejected";
            result.findings.push_back(os.str());
            break;
        }
        case sandbox::OutcomeKind::runtime_error: {
            std::ostringstream os;
            os << p.id << ": oracle error on extra input " << i << " (" << exec.error_message
               << "); input rejected";
            result.findings.push_back(os.str());
            break;
        }
        case sandbox::OutcomeKind::harness_error:
            throw HarnessFault("sandbox failure deriving oracle case " + std::to_string(i) +
                               " of '" + p.id + "': " + exec.error_message);
        }
    }
    return result;
}

std::vector<std::string> prepare_problem(Problem& p, const sandbox::Sandbox& sb,
                                         const sandbox::ResourceLimits& limits) {
    if (p.extra_inputs.empty()) {
        return {};
    }
    OracleDerivation derivation = derive_oracle_cases(p, p.extra_inputs, sb, limits);
    for (auto& tc : derivation.cases) {
        p.test_cases.push_back(std::move(tc));
    }
    p.extra_inputs.clear();
    return std::move(derivation.findings);
}

} // namespace printdbg::corpus
