#pragma once

#include "printdbg/corpus.hpp"
#include "printdbg/sandbox.hpp"

#include <string>
#include <vector>

namespace printdbg::corpus {

struct OracleDerivation {
    std::vector<TestCase> cases;        // origin = oracle_derived
    std::vector<std::string> findings;  // rejected inputs, never silently dropped
};

/// Runs the reference solution on each extra input and freezes its output as
/// the expected answer. The reference must first pass all example-origin
/// cases (a corpus defect otherwise; throws CorpusError). An input on which
/// the reference errors or times out is rejected with a finding.
OracleDerivation derive_oracle_cases(const Problem& p,
                                     const std::vector<std::vector<StructuredValue>>& extra_inputs,
                                     const sandbox::Sandbox& sb,
                                     const sandbox::ResourceLimits& limits);

/// Extends p.test_cases with the derivation of p.extra_inputs. Findings are
/// returned so callers can surface them.
std::vector<std::string> prepare_problem(Problem& p, const sandbox::Sandbox& sb,
                                         const sandbox::ResourceLimits& limits);

} // namespace printdbg::corpus
