#pragma once

#include "printdbg/corpus.hpp"
#include "printdbg/gateway.hpp"
#include "printdbg/judge.hpp"
#include "printdbg/sandbox.hpp"
#include "printdbg/source_code.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace printdbg::strategies {

enum class StrategyKind {
    no_debug,
    simple_feedback,
    ut_feedback,
    rubber_duck,
    print_debug,
    print_debug_case_only,
    print_debug_log_only,
};

std::string to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& s);

/// print_debug family: the strategies that run the instrument/execute/fix
/// cycle rather than a single feedback prompt.
bool is_print_debug_family(StrategyKind kind);

/// A text template with {{name}} placeholders. Everything else, including
/// single braces inside embedded code, passes through verbatim.
struct PromptTemplate {
    std::string name;
    std::string text;
    std::set<std::string> required_placeholders;

    static PromptTemplate from_text(std::string name, std::string text);

    /// Throws TemplateError naming the first unbound placeholder.
    std::string render(const std::map<std::string, std::string>& bindings) const;
};

/// Loads the template assets from a directory: one .txt file per template
/// (initial_solve, instrument, analyze_fix_full, analyze_fix_case_only,
/// analyze_fix_log_only, simple_feedback, ut_feedback, rubber_duck) plus the
/// shared one-shot demonstration block.
class TemplateStore {
public:
    static TemplateStore load(const std::filesystem::path& dir);

    const PromptTemplate& get(const std::string& name) const;
    const std::string& demonstration() const { return demonstration_; }

private:
    std::map<std::string, PromptTemplate> templates_;
    std::string demonstration_;
};

/// Decides whether one source line is a standalone print statement. The rule
/// is data: the line's first non-whitespace token must be one of the
/// configured call prefixes and the call must be the whole statement;
/// a print glued to another statement on the same line does not count.
struct PrintMatcher {
    std::string language_tag;
    std::vector<std::string> call_prefixes;

    bool matches(std::string_view line) const;

    static PrintMatcher for_language(const std::string& language_tag);
};

struct Violation {
    std::size_t line_number; // 1-based within the instrumented code
    std::string description;

    bool operator==(const Violation&) const = default;
};

struct InstrumentationReport {
    bool valid{false};
    std::size_t inserted_print_count{0};
    std::vector<Violation> violations;
};

/// Valid iff deleting every matcher-positive line from the instrumented code
/// yields exactly the original lines, in order, whitespace-exact. Edits,
/// deletions, reorderings, and non-print insertions are violations.
InstrumentationReport validate_instrumentation(const SourceCode& original,
                                               const SourceCode& instrumented,
                                               const PrintMatcher& matcher);

std::size_t count_print_statements(const SourceCode& instrumented, const PrintMatcher& matcher);

struct ParsedCompletion {
    std::optional<std::string> analysis_text;
    std::optional<SourceCode> code; // last fenced block wins
    std::map<std::string, std::string> sections;
};

/// Extracts the last fenced code block as the code and everything before it
/// as analysis text. Fences without a language tag are accepted; an
/// unterminated fence runs to the end of the text.
ParsedCompletion parse_completion(const std::string& text,
                                  const std::string& default_language = "python3");

/// Renders every prompt the experiment needs. All builders return a fresh
/// single-message conversation; rounds are stateless one-shot calls.
class PromptFactory {
public:
    PromptFactory(TemplateStore store, std::string language_tag);

    gateway::Conversation build_initial_prompt(const corpus::Problem& problem) const;

    gateway::Conversation build_instrumentation_prompt(const corpus::Problem& problem,
                                                       const SourceCode& buggy_code,
                                                       const judge::JudgeVerdict& verdict) const;

    gateway::Conversation build_analysis_fix_prompt(const corpus::Problem& problem,
                                                    const SourceCode& buggy_code,
                                                    const judge::JudgeVerdict& verdict,
                                                    const std::optional<sandbox::LogText>& log,
                                                    StrategyKind strategy) const;

    gateway::Conversation build_baseline_prompt(const corpus::Problem& problem,
                                                const SourceCode& code,
                                                const judge::JudgeVerdict& verdict,
                                                StrategyKind strategy) const;

    /// Corrective re-prompt when a completion had no usable code block.
    gateway::Conversation build_no_code_retry(const gateway::Conversation& previous,
                                              const gateway::Completion& reply) const;

    /// Corrective re-prompt quoting instrumentation violations.
    gateway::Conversation
    build_instrumentation_retry(const gateway::Conversation& previous,
                                const gateway::Completion& reply,
                                const InstrumentationReport& report) const;

    const std::string& language_tag() const { return language_tag_; }

private:
    std::map<std::string, std::string> problem_bindings(const corpus::Problem& problem) const;
    void bind_failure(std::map<std::string, std::string>& bindings,
                      const corpus::Problem& problem, const judge::JudgeVerdict& verdict) const;

    TemplateStore store_;
    std::string language_tag_;
};

/// "a = [1,3,2,4], b = [3,1,2,4]", inputs named by the signature parameters.
std::string format_input(const corpus::FunctionSignature& signature,
                         const std::vector<StructuredValue>& input);

} // namespace printdbg::strategies
