#pragma once

#include "printdbg/compare.hpp"
#include "printdbg/source_code.hpp"
#include "printdbg/values.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace printdbg::corpus {

enum class Level { easy, medium, hard };

std::string to_string(Level level);
Level level_from_string(const std::string& s);

struct Parameter {
    std::string name;
    std::string type; // declared semantic type, e.g. "int[]"; informational

    bool operator==(const Parameter&) const = default;
};

struct FunctionSignature {
    std::string function_name;
    std::vector<Parameter> parameters;
    std::string return_type;

    std::size_t arity() const { return parameters.size(); }
    bool operator==(const FunctionSignature&) const = default;
};

struct Example {
    std::vector<StructuredValue> input;
    StructuredValue expected_output;
    std::optional<std::string> explanation;

    bool operator==(const Example&) const = default;
};

enum class CaseOrigin { example, oracle_derived };

std::string to_string(CaseOrigin origin);
CaseOrigin case_origin_from_string(const std::string& s);

struct TestCase {
    std::vector<StructuredValue> input;
    StructuredValue expected_output;
    CaseOrigin origin{CaseOrigin::example};

    bool operator==(const TestCase&) const = default;
};

/// One programming task: statement, published examples, a reference solution
/// known to pass everything, and the judge-ready test cases. `extra_inputs`
/// are corpus-supplied inputs whose expected outputs are derived from the
/// reference solution (see oracle.hpp); until derived they are not judged.
struct Problem {
    std::string id;
    std::string url;           // informational
    std::string released_time; // informational, YYYY-MM-DD
    Level level{Level::easy};
    std::string title;
    std::string description;
    std::vector<Example> examples;
    std::string constraints;
    FunctionSignature function_signature;
    SourceCode reference_solution;
    std::vector<TestCase> test_cases;

    std::vector<std::vector<StructuredValue>> extra_inputs;
    std::optional<judge::ComparePolicy> compare_override;
    StructuredValue metadata; // opaque pass-through, never interpreted

    bool operator==(const Problem&) const = default;
};

struct ValidationReport {
    std::vector<std::string> findings;

    bool ok() const { return findings.empty(); }
};

/// Checks every Problem invariant: level range, non-empty examples, unique
/// parameter names, arity agreement between signature and every example and
/// test case, non-null expected outputs. Findings are data, not failures.
ValidationReport validate_problem(const Problem& p);

/// Loads every problem file in a corpus directory, validates each one, and
/// returns them sorted by id. Throws CorpusError naming the offending file
/// and field on malformed input, duplicate ids, or validation findings.
std::vector<Problem> load_corpus(const std::filesystem::path& dir);

nlohmann::json problem_to_json(const Problem& p);
Problem problem_from_json(const nlohmann::json& j, const std::string& origin_hint);

void save_problem(const Problem& p, const std::filesystem::path& file);

/// Writes `<dir>/<id>.json` per problem plus the `manifest.json` id/level
/// index. Used by tooling and round-trip tests.
void save_corpus(const std::vector<Problem>& problems, const std::filesystem::path& dir);

} // namespace printdbg::corpus
