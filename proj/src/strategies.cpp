#include "printdbg/strategies.hpp"

#include "printdbg/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace printdbg::strategies {

std::string to_string(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::no_debug: return "no_debug";
    case StrategyKind::simple_feedback: return "simple_feedback";
    case StrategyKind::ut_feedback: return "ut_feedback";
    case StrategyKind::rubber_duck: return "rubber_duck";
    case StrategyKind::print_debug: return "print_debug";
    case StrategyKind::print_debug_case_only: return "print_debug_case_only";
    case StrategyKind::print_debug_log_only: return "print_debug_log_only";
    }
    return "print_debug";
}

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "no_debug") return StrategyKind::no_debug;
    if (s == "simple_feedback") return StrategyKind::simple_feedback;
    if (s == "ut_feedback") return StrategyKind::ut_feedback;
    if (s == "rubber_duck") return StrategyKind::rubber_duck;
    if (s == "print_debug") return StrategyKind::print_debug;
    if (s == "print_debug_case_only") return StrategyKind::print_debug_case_only;
    if (s == "print_debug_log_only") return StrategyKind::print_debug_log_only;
    throw ConfigError("unknown strategy: " + s);
}

bool is_print_debug_family(StrategyKind kind) {
    return kind == StrategyKind::print_debug || kind == StrategyKind::print_debug_case_only ||
           kind == StrategyKind::print_debug_log_only;
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

namespace {

bool is_placeholder_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// {{name}} spans; single braces pass through untouched
std::vector<std::pair<std::size_t, std::string>> scan_placeholders(const std::string& text) {
    std::vector<std::pair<std::size_t, std::string>> found;
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string::npos) {
        const std::size_t name_begin = pos + 2;
        std::size_t cursor = name_begin;
        while (cursor < text.size() && is_placeholder_char(text[cursor])) {
            ++cursor;
        }
        if (cursor > name_begin && cursor + 1 < text.size() && text[cursor] == '}' &&
            text[cursor + 1] == '}') {
            found.emplace_back(pos, text.substr(name_begin, cursor - name_begin));
            pos = cursor + 2;
        } else {
            pos = name_begin;
        }
    }
    return found;
}

} // namespace

PromptTemplate PromptTemplate::from_text(std::string name, std::string text) {
    PromptTemplate tmpl;
    tmpl.name = std::move(name);
    tmpl.text = std::move(text);
    for (const auto& [pos, placeholder] : scan_placeholders(tmpl.text)) {
        tmpl.required_placeholders.insert(placeholder);
    }
    return tmpl;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    for (const auto& placeholder : required_placeholders) {
        if (bindings.find(placeholder) == bindings.end()) {
            throw TemplateError("template '" + name + "': placeholder '{{" + placeholder +
                                "}}' is not bound");
        }
    }
    std::string out;
    out.reserve(text.size());
    std::size_t last = 0;
    for (const auto& [pos, placeholder] : scan_placeholders(text)) {
        out.append(text, last, pos - last);
        out += bindings.at(placeholder);
        last = pos + placeholder.size() + 4;
    }
    out.append(text, last, text.size() - last);
    return out;
}

namespace {

const std::vector<std::string> kTemplateNames = {
    "initial_solve",       "instrument",  "analyze_fix_full", "analyze_fix_case_only",
    "analyze_fix_log_only", "simple_feedback", "ut_feedback",  "rubber_duck",
};

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw TemplateError("cannot open template asset: " + file.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
    TemplateStore store;
    for (const auto& name : kTemplateNames) {
        store.templates_.emplace(name,
                                 PromptTemplate::from_text(name, read_file(dir / (name + ".txt"))));
    }
    store.demonstration_ = read_file(dir / "demonstration.txt");
    return store;
}

const PromptTemplate& TemplateStore::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw TemplateError("no template named '" + name + "'");
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Print matcher and instrumentation validation
// ---------------------------------------------------------------------------

namespace {

std::string_view strip_leading_ws(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
        ++i;
    }
    return line.substr(i);
}

// Walks a call starting at the opening parenthesis; returns the index one
// past the matching close, or npos. String literals are honored so a ')'
// inside quotes does not close the call.
std::size_t skip_balanced_call(std::string_view text, std::size_t open) {
    int depth = 0;
    char quote = '\0';
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (quote != '\0') {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = '\0';
            }
            continue;
        }
        if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == '(' || c == '[' || c == '{') {
            ++depth;
        } else if (c == ')' || c == ']' || c == '}') {
            --depth;
            if (depth == 0) {
                return i + 1;
            }
        }
    }
    return std::string_view::npos;
}

} // namespace

bool PrintMatcher::matches(std::string_view line) const {
    const std::string_view stripped = strip_leading_ws(line);
    for (const auto& prefix : call_prefixes) {
        if (stripped.substr(0, prefix.size()) != prefix) {
            continue;
        }
        const std::size_t open = stripped.find('(');
        if (open == std::string_view::npos) {
            return false;
        }
        const std::size_t end = skip_balanced_call(stripped, open);
        if (end == std::string_view::npos) {
            return false; // call spans lines; not a standalone print line
        }
        // a print glued to another statement on the same line is not a pᵢ
        std::string_view rest = stripped.substr(end);
        while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) {
            rest.remove_prefix(1);
        }
        return rest.empty() || rest.front() == '#';
    }
    return false;
}

PrintMatcher PrintMatcher::for_language(const std::string& language_tag) {
    if (language_tag == "python3" || language_tag == "python") {
        return PrintMatcher{language_tag, {"print(", "print ("}};
    }
    throw ConfigError("no print matcher configured for language_tag '" + language_tag + "'");
}

InstrumentationReport validate_instrumentation(const SourceCode& original,
                                               const SourceCode& instrumented,
                                               const PrintMatcher& matcher) {
    InstrumentationReport report;
    std::size_t orig_index = 0;
    for (std::size_t i = 0; i < instrumented.lines.size(); ++i) {
        const std::string& line = instrumented.lines[i];
        if (matcher.matches(line)) {
            ++report.inserted_print_count;
            continue;
        }
        if (orig_index < original.lines.size() && line == original.lines[orig_index]) {
            ++orig_index;
            continue;
        }
        std::ostringstream os;
        if (orig_index < original.lines.size()) {
            os << "line " << (i + 1) << " is neither a print statement nor the expected original "
               << "line " << (orig_index + 1) << " (`" << original.lines[orig_index] << "`)";
        } else {
            os << "line " << (i + 1) << " appears after all original lines and is not a print "
               << "statement";
        }
        report.violations.push_back({i + 1, os.str()});
    }
    if (orig_index < original.lines.size()) {
        std::ostringstream os;
        os << "original lines from " << (orig_index + 1) << " onward are missing";
        if (matcher.matches(original.lines[orig_index])) {
            os << " (original line " << (orig_index + 1)
               << " is itself a print statement and cannot be told apart from instrumentation)";
        }
        report.violations.push_back({instrumented.lines.size(), os.str()});
    }
    report.valid = report.violations.empty();
    return report;
}

std::size_t count_print_statements(const SourceCode& instrumented, const PrintMatcher& matcher) {
    std::size_t count = 0;
    for (const auto& line : instrumented.lines) {
        if (matcher.matches(line)) {
            ++count;
        }
    }
    return count;
}

// ---------------------------------------------------------------------------
// Completion parsing
// ---------------------------------------------------------------------------

ParsedCompletion parse_completion(const std::string& text, const std::string& default_language) {
    ParsedCompletion parsed;

    struct Block {
        std::string tag;
        std::vector<std::string> lines;
        std::size_t start_offset; // offset of the opening fence line
    };
    std::vector<Block> blocks;

    std::size_t pos = 0;
    std::optional<Block> open_block;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t line_end = nl == std::string::npos ? text.size() : nl;
        std::string_view line(text.data() + pos, line_end - pos);
        std::string_view stripped = strip_leading_ws(line);
        if (stripped.substr(0, 3) == "```") {
            if (!open_block) {
                Block block;
                block.start_offset = pos;
                std::string_view tag = stripped.substr(3);
                while (!tag.empty() && (tag.back() == ' ' || tag.back() == '\r')) {
                    tag.remove_suffix(1);
                }
                block.tag = std::string(tag);
                open_block = std::move(block);
            } else {
                blocks.push_back(std::move(*open_block));
                open_block.reset();
            }
        } else if (open_block) {
            std::string content(line);
            if (!content.empty() && content.back() == '\r') {
                content.pop_back();
            }
            open_block->lines.push_back(std::move(content));
        }
        if (nl == std::string::npos) {
            break;
        }
        pos = nl + 1;
    }
    if (open_block) {
        // unterminated fence: models drop the closing fence often enough
        // that the content is worth keeping
        blocks.push_back(std::move(*open_block));
    }

    if (!blocks.empty()) {
        const Block& last = blocks.back();
        SourceCode code;
        code.lines = last.lines;
        code.language_tag = last.tag.empty() ? default_language : last.tag;
        parsed.code = std::move(code);
        std::string before = text.substr(0, last.start_offset);
        while (!before.empty() && std::isspace(static_cast<unsigned char>(before.back()))) {
            before.pop_back();
        }
        if (!before.empty()) {
            parsed.analysis_text = before;
        }
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            std::string key = blocks[i].tag.empty() ? "code" : blocks[i].tag;
            if (blocks.size() > 1) {
                key += "-" + std::to_string(i + 1);
            }
            SourceCode block_code;
            block_code.lines = blocks[i].lines;
            parsed.sections[key] = block_code.text();
        }
    } else if (!text.empty()) {
        parsed.analysis_text = text;
    }
    if (parsed.analysis_text) {
        parsed.sections["analysis"] = *parsed.analysis_text;
    }
    return parsed;
}

// ---------------------------------------------------------------------------
// Prompt factory
// ---------------------------------------------------------------------------

std::string format_input(const corpus::FunctionSignature& signature,
                         const std::vector<StructuredValue>& input) {
    std::ostringstream os;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (i > 0) {
            os << ", ";
        }
        if (i < signature.parameters.size()) {
            os << signature.parameters[i].name << " = ";
        }
        os << input[i].dump();
    }
    return os.str();
}

PromptFactory::PromptFactory(TemplateStore store, std::string language_tag)
    : store_(std::move(store)), language_tag_(std::move(language_tag)) {}

std::map<std::string, std::string>
PromptFactory::problem_bindings(const corpus::Problem& problem) const {
    std::map<std::string, std::string> bindings;
    bindings["demonstration"] = store_.demonstration();
    bindings["language"] = language_tag_;
    bindings["title"] = problem.title;
    bindings["description"] = problem.description;
    bindings["constraints"] = problem.constraints;
    bindings["function_name"] = problem.function_signature.function_name;
    bindings["return_type"] = problem.function_signature.return_type;
    {
        std::ostringstream os;
        const auto& params = problem.function_signature.parameters;
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (i > 0) {
                os << ", ";
            }
            os << params[i].name;
            if (!params[i].type.empty()) {
                os << ": " << params[i].type;
            }
        }
        bindings["parameters"] = os.str();
    }
    {
        std::ostringstream os;
        for (std::size_t i = 0; i < problem.examples.size(); ++i) {
            const auto& ex = problem.examples[i];
            if (i > 0) {
                os << "\n";
            }
            os << "Example " << (i + 1) << ":\n";
            os << "  Input: " << format_input(problem.function_signature, ex.input) << "\n";
            os << "  Output: " << ex.expected_output.dump() << "\n";
            if (ex.explanation) {
                os << "  Explanation: " << *ex.explanation << "\n";
            }
        }
        bindings["examples"] = os.str();
    }
    return bindings;
}

void PromptFactory::bind_failure(std::map<std::string, std::string>& bindings,
                                 const corpus::Problem& problem,
                                 const judge::JudgeVerdict& verdict) const {
    if (!verdict.first_failure) {
        throw std::logic_error("cannot build a debugging prompt from a passing verdict");
    }
    const auto& failure = *verdict.first_failure;
    bindings["failing_input"] = format_input(problem.function_signature, failure.input);
    bindings["expected_answer"] = failure.expected_answer.dump();
    std::ostringstream os;
    if (failure.wrong_answer) {
        os << "Wrong answer: " << failure.wrong_answer->dump() << "\n";
    }
    if (failure.error_message) {
        os << "Error message: " << *failure.error_message << "\n";
    }
    bindings["failure_summary"] = os.str();
}

gateway::Conversation PromptFactory::build_initial_prompt(const corpus::Problem& problem) const {
    auto bindings = problem_bindings(problem);
    return gateway::Conversation::from_user(store_.get("initial_solve").render(bindings));
}

gateway::Conversation
PromptFactory::build_instrumentation_prompt(const corpus::Problem& problem,
                                            const SourceCode& buggy_code,
                                            const judge::JudgeVerdict& verdict) const {
    if (verdict.all_passed) {
        throw std::logic_error("instrumentation prompt requires a failing verdict");
    }
    auto bindings = problem_bindings(problem);
    bind_failure(bindings, problem, verdict);
    bindings["code"] = buggy_code.text();
    return gateway::Conversation::from_user(store_.get("instrument").render(bindings));
}

gateway::Conversation PromptFactory::build_analysis_fix_prompt(
    const corpus::Problem& problem, const SourceCode& buggy_code,
    const judge::JudgeVerdict& verdict, const std::optional<sandbox::LogText>& log,
    StrategyKind strategy) const {
    if (!is_print_debug_family(strategy)) {
        throw std::logic_error("analysis/fix prompt is only for the print debugging family");
    }
    const bool wants_log = strategy != StrategyKind::print_debug_case_only;
    if (wants_log && !log) {
        throw std::logic_error("strategy '" + to_string(strategy) + "' requires a log");
    }
    auto bindings = problem_bindings(problem);
    bind_failure(bindings, problem, verdict);
    bindings["code"] = buggy_code.text();
    std::string template_name = "analyze_fix_full";
    if (strategy == StrategyKind::print_debug_case_only) {
        template_name = "analyze_fix_case_only";
    } else if (strategy == StrategyKind::print_debug_log_only) {
        template_name = "analyze_fix_log_only";
    }
    if (wants_log) {
        std::ostringstream os;
        if (log->lines.empty()) {
            os << "(the print statements produced no output)";
        }
        for (std::size_t i = 0; i < log->lines.size(); ++i) {
            if (i > 0) {
                os << "\n";
            }
            os << log->lines[i];
        }
        bindings["log"] = os.str();
    }
    return gateway::Conversation::from_user(store_.get(template_name).render(bindings));
}

gateway::Conversation PromptFactory::build_baseline_prompt(const corpus::Problem& problem,
                                                           const SourceCode& code,
                                                           const judge::JudgeVerdict& verdict,
                                                           StrategyKind strategy) const {
    std::string template_name;
    switch (strategy) {
    case StrategyKind::simple_feedback: template_name = "simple_feedback"; break;
    case StrategyKind::ut_feedback: template_name = "ut_feedback"; break;
    case StrategyKind::rubber_duck: template_name = "rubber_duck"; break;
    default:
        throw std::logic_error("baseline prompt is only for feedback strategies");
    }
    auto bindings = problem_bindings(problem);
    bindings["code"] = code.text();
    if (strategy != StrategyKind::simple_feedback) {
        bind_failure(bindings, problem, verdict);
    }
    return gateway::Conversation::from_user(store_.get(template_name).render(bindings));
}

gateway::Conversation PromptFactory::build_no_code_retry(const gateway::Conversation& previous,
                                                         const gateway::Completion& reply) const {
    gateway::Conversation conv = previous;
    conv.add(gateway::Role::assistant, reply.text);
    conv.add(gateway::Role::user,
             "Your reply did not contain a usable fenced code block. Reply again with the "
             "complete " +
                 language_tag_ + " solution in a single fenced code block.");
    return conv;
}

gateway::Conversation
PromptFactory::build_instrumentation_retry(const gateway::Conversation& previous,
                                           const gateway::Completion& reply,
                                           const InstrumentationReport& report) const {
    std::ostringstream os;
    os << "The instrumented code you returned changed the original code. Violations:\n";
    for (const auto& violation : report.violations) {
        os << "- line " << violation.line_number << ": " << violation.description << "\n";
    }
    os << "Return the code again: insert whole-line print statements only and keep every "
          "original line byte-for-byte unchanged, in order. Reply with a single fenced code "
          "block.";
    gateway::Conversation conv = previous;
    conv.add(gateway::Role::assistant, reply.text);
    conv.add(gateway::Role::user, os.str());
    return conv;
}

} // namespace printdbg::strategies
