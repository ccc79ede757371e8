#pragma once

#include "printdbg/corpus.hpp"
#include "printdbg/source_code.hpp"
#include "printdbg/values.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace printdbg::sandbox {

struct ResourceLimits {
    std::chrono::milliseconds wall_clock_timeout{10'000};
    std::size_t max_log_bytes{1u << 20};     // candidate stdout kept for the log
    std::size_t max_output_bytes{8u << 20};  // tail kept to recover the return value

    bool valid() const {
        return wall_clock_timeout.count() > 0 && max_log_bytes > 0 && max_output_bytes > 0;
    }
};

/// Captured print output. `truncated == false` implies
/// `original_line_count == lines.size()`.
struct LogText {
    std::vector<std::string> lines;
    bool truncated{false};
    std::size_t original_line_count{0};

    static LogText from_lines(std::vector<std::string> lines);

    bool operator==(const LogText&) const = default;
};

/// Head/tail log truncation. `elision_marker` may contain `{omitted}`,
/// replaced by the number of elided lines. A valid policy satisfies
/// head_lines + tail_lines + 1 <= max_lines.
struct TruncationPolicy {
    std::size_t max_lines{101};
    std::size_t head_lines{80};
    std::size_t tail_lines{20};
    std::size_t max_line_chars{512};
    std::string elision_marker{"... ({omitted} lines omitted) ..."};

    bool valid() const {
        return max_lines > 0 && head_lines > 0 && tail_lines > 0 && max_line_chars > 0 &&
               head_lines + tail_lines + 1 <= max_lines;
    }
};

/// Keeps at most max_lines lines: first head_lines, a marker line carrying
/// the omitted count, then the last tail_lines. Every line is clipped to
/// max_line_chars. Idempotent; preserves original_line_count.
LogText truncate_log(const LogText& log, const TruncationPolicy& policy);

enum class OutcomeKind {
    returned,      // function completed; value decoded from the return channel
    runtime_error, // the candidate's own fault: exception, bad exit, signal
    timeout,       // wall clock exceeded; process group killed
    harness_error, // sandbox-level failure, never attributed to the candidate
};

std::string to_string(OutcomeKind kind);

/// Outcome of one execution. raw_log is populated in every variant: the log
/// written before an error or kill survives it.
struct ExecutionResult {
    OutcomeKind kind{OutcomeKind::harness_error};
    StructuredValue value;     // returned only
    std::string error_class;   // runtime_error only, e.g. "IndexError"
    std::string error_message; // runtime_error / timeout / harness_error
    LogText raw_log;
    std::chrono::milliseconds elapsed{0};
};

/// Driver program appended after the candidate: decodes the inputs, calls the
/// solution function, and emits the JSON-encoded return value between two
/// copies of a per-execution random sentinel so it never collides with print
/// output.
struct BuiltDriver {
    SourceCode code;
    std::string sentinel;
};

std::string make_sentinel();

/// Throws HarnessFault for an unsupported language_tag or an arity mismatch
/// between signature and test input.
BuiltDriver build_driver(const corpus::FunctionSignature& signature,
                         const corpus::TestCase& test, const std::string& language_tag,
                         std::string sentinel = make_sentinel());

/// Splits a captured stdout stream into the candidate's own output and the
/// sentinel-delimited return payload, if present.
struct SplitStdout {
    std::string log_text;
    std::optional<std::string> return_json;
};

SplitStdout split_return_channel(std::string_view stdout_bytes, const std::string& sentinel);

/// '\n'-separated lines; a trailing terminator does not create an empty line,
/// but print("") does.
std::vector<std::string> split_log_lines(std::string_view text);

struct SandboxConfig {
    // language_tag -> command template; {file} is replaced by the program path.
    std::map<std::string, std::string> runtimes{{"python3", "python3 -u {file}"}};
    std::filesystem::path scratch_dir; // empty: <system temp>/printdbg-scratch
};

/// Runs candidate code against a single test case in a child process group.
/// Safe for unlimited concurrent execute() calls; each spawns its own child.
class Sandbox {
public:
    Sandbox() = default;
    explicit Sandbox(SandboxConfig config);

    /// Never throws for candidate faults; those come back as runtime_error /
    /// timeout outcomes. Sandbox-level failures come back as harness_error.
    ExecutionResult execute(const SourceCode& code, const corpus::FunctionSignature& signature,
                            const corpus::TestCase& test, const ResourceLimits& limits) const;

    const SandboxConfig& config() const { return config_; }

private:
    SandboxConfig config_;
};

} // namespace printdbg::sandbox
