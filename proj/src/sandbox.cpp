#include "printdbg/sandbox.hpp"

#include "printdbg/errors.hpp"

#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace printdbg::sandbox {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string to_string(OutcomeKind kind) {
    switch (kind) {
    case OutcomeKind::returned: return "returned";
    case OutcomeKind::runtime_error: return "runtime_error";
    case OutcomeKind::timeout: return "timeout";
    case OutcomeKind::harness_error: return "harness_error";
    }
    return "harness_error";
}

LogText LogText::from_lines(std::vector<std::string> lines) {
    LogText log;
    log.original_line_count = lines.size();
    log.lines = std::move(lines);
    return log;
}

// ---------------------------------------------------------------------------
// Truncation
// ---------------------------------------------------------------------------

namespace {

std::string clip_line(const std::string& line, std::size_t max_chars) {
    if (line.size() <= max_chars) {
        return line;
    }
    return line.substr(0, max_chars);
}

std::string render_marker(const std::string& marker, std::size_t omitted) {
    std::string out = marker;
    const std::string token = "{omitted}";
    if (auto pos = out.find(token); pos != std::string::npos) {
        out.replace(pos, token.size(), std::to_string(omitted));
    }
    return out;
}

} // namespace

LogText truncate_log(const LogText& log, const TruncationPolicy& policy) {
    if (!policy.valid()) {
        throw HarnessFault("invalid truncation policy: head + tail + 1 must not exceed max_lines");
    }
    LogText out;
    out.truncated = log.truncated;
    out.original_line_count = log.original_line_count;
    if (log.lines.size() <= policy.max_lines) {
        out.lines.reserve(log.lines.size());
        for (const auto& line : log.lines) {
            out.lines.push_back(clip_line(line, policy.max_line_chars));
        }
        return out;
    }
    const std::size_t omitted = log.lines.size() - policy.head_lines - policy.tail_lines;
    out.truncated = true;
    out.lines.reserve(policy.head_lines + 1 + policy.tail_lines);
    for (std::size_t i = 0; i < policy.head_lines; ++i) {
        out.lines.push_back(clip_line(log.lines[i], policy.max_line_chars));
    }
    out.lines.push_back(render_marker(policy.elision_marker, omitted));
    for (std::size_t i = log.lines.size() - policy.tail_lines; i < log.lines.size(); ++i) {
        out.lines.push_back(clip_line(log.lines[i], policy.max_line_chars));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Driver generation and return-channel decoding
// ---------------------------------------------------------------------------

std::string make_sentinel() {
    static std::atomic<std::uint64_t> counter{0};
    std::random_device rd;
    std::mt19937_64 rng(static_cast<std::uint64_t>(rd()) ^
                        (static_cast<std::uint64_t>(rd()) << 32) ^
                        counter.fetch_add(0x9e3779b97f4a7c15ull));
    static constexpr char hex[] = "0123456789abcdef";
    std::string token = "@@RET:";
    for (int i = 0; i < 32; ++i) {
        token.push_back(hex[rng() & 0x0f]);
    }
    token += "@@";
    return token;
}

namespace {

std::string base64_encode(std::string_view data) {
    static constexpr char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= data.size()) {
        unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                     (static_cast<unsigned char>(data[i + 1]) << 8) |
                     static_cast<unsigned char>(data[i + 2]);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
        i += 3;
    }
    if (i + 1 == data.size()) {
        unsigned v = static_cast<unsigned char>(data[i]) << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == data.size()) {
        unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                     (static_cast<unsigned char>(data[i + 1]) << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

bool is_python_tag(const std::string& tag) {
    return tag == "python3" || tag == "python";
}

} // namespace

BuiltDriver build_driver(const corpus::FunctionSignature& signature, const corpus::TestCase& test,
                         const std::string& language_tag, std::string sentinel) {
    if (!is_python_tag(language_tag)) {
        throw HarnessFault("no driver generator for language_tag '" + language_tag + "'");
    }
    if (signature.arity() != test.input.size()) {
        std::ostringstream os;
        os << "test input arity " << test.input.size() << " does not match signature arity "
           << signature.arity() << " of '" << signature.function_name << "'";
        throw HarnessFault(os.str());
    }
    nlohmann::json args = nlohmann::json::array();
    for (const auto& v : test.input) {
        args.push_back(v);
    }
    const std::string args_b64 = base64_encode(args.dump());
    const std::string& fn = signature.function_name;

    SourceCode driver;
    driver.language_tag = language_tag;
    auto& ln = driver.lines;
    ln.push_back("");
    ln.push_back("import sys as _pd_sys, json as _pd_json, base64 as _pd_b64");
    ln.push_back("def _pd_main():");
    ln.push_back("    args = _pd_json.loads(_pd_b64.b64decode(\"" + args_b64 +
                 "\").decode(\"utf-8\"))");
    ln.push_back("    g = globals()");
    ln.push_back("    fn = None");
    ln.push_back("    if callable(g.get(\"" + fn + "\")):");
    ln.push_back("        fn = g[\"" + fn + "\"]");
    ln.push_back("    elif \"Solution\" in g and hasattr(g[\"Solution\"], \"" + fn + "\"):");
    ln.push_back("        fn = getattr(g[\"Solution\"](), \"" + fn + "\")");
    ln.push_back("    if fn is None:");
    ln.push_back("        _pd_sys.stderr.write(\"SolutionNotFound: no callable named '" + fn +
                 "'\\n\")");
    ln.push_back("        _pd_sys.exit(3)");
    ln.push_back("    ret = fn(*args)");
    ln.push_back("    try:");
    ln.push_back("        payload = _pd_json.dumps(ret, allow_nan=False)");
    ln.push_back("    except (TypeError, ValueError) as e:");
    ln.push_back("        _pd_sys.stderr.write(\"ReturnEncodingError: %s\\n\" % e)");
    ln.push_back("        _pd_sys.exit(4)");
    ln.push_back("    _pd_sys.stdout.flush()");
    ln.push_back("    _pd_sys.stdout.write(\"\\n" + sentinel + "\" + payload + \"" + sentinel +
                 "\\n\")");
    ln.push_back("    _pd_sys.stdout.flush()");
    ln.push_back("_pd_main()");
    return BuiltDriver{std::move(driver), std::move(sentinel)};
}

SplitStdout split_return_channel(std::string_view stdout_bytes, const std::string& sentinel) {
    SplitStdout out;
    const std::size_t close_pos = stdout_bytes.rfind(sentinel);
    if (close_pos == std::string_view::npos || close_pos == 0) {
        out.log_text.assign(stdout_bytes);
        return out;
    }
    const std::size_t open_pos = stdout_bytes.rfind(sentinel, close_pos - 1);
    if (open_pos == std::string_view::npos || open_pos == close_pos) {
        out.log_text.assign(stdout_bytes);
        return out;
    }
    const std::size_t payload_begin = open_pos + sentinel.size();
    out.return_json = std::string(stdout_bytes.substr(payload_begin, close_pos - payload_begin));
    // the driver emits "\n" + sentinel; that newline is not a log line
    std::size_t log_end = open_pos;
    if (log_end > 0 && stdout_bytes[log_end - 1] == '\n') {
        --log_end;
    }
    out.log_text.assign(stdout_bytes.substr(0, log_end));
    return out;
}

std::vector<std::string> split_log_lines(std::string_view text) {
    std::vector<std::string> lines;
    if (text.empty()) {
        return lines;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) {
                lines.emplace_back(text.substr(start));
            }
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

// ---------------------------------------------------------------------------
// Process execution
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kExecFailedMarker = "__pd_exec_failed__";
constexpr std::chrono::milliseconds kDrainGrace{500};

// Head is kept within a byte budget for the log; the tail is a rolling
// window so the sentinel block at stream end stays recoverable even after
// huge output.
struct CaptureBuffer {
    std::string head;
    std::string tail;
    std::size_t head_cap;
    std::size_t tail_cap;
    std::size_t total = 0;
    std::size_t newline_total = 0;
    char last_byte = '\0';

    CaptureBuffer(std::size_t head_cap, std::size_t tail_cap)
        : head_cap(head_cap), tail_cap(tail_cap) {}

    void append(const char* data, std::size_t n) {
        if (n == 0) {
            return;
        }
        total += n;
        for (std::size_t i = 0; i < n; ++i) {
            if (data[i] == '\n') {
                ++newline_total;
            }
        }
        last_byte = data[n - 1];
        if (head.size() < head_cap) {
            head.append(data, std::min(n, head_cap - head.size()));
        }
        tail.append(data, n);
        if (tail.size() > 2 * tail_cap) {
            tail.erase(0, tail.size() - tail_cap);
        }
    }

    void finish() {
        if (tail.size() > tail_cap) {
            tail.erase(0, tail.size() - tail_cap);
        }
    }

    bool head_complete() const { return total == head.size(); }
    bool tail_complete() const { return total == tail.size(); }
};

std::vector<std::string> split_command(const std::string& tmpl) {
    std::vector<std::string> parts;
    std::istringstream is(tmpl);
    std::string part;
    while (is >> part) {
        parts.push_back(part);
    }
    return parts;
}

// Reads both pipes until EOF or the deadline. On deadline the whole process
// group is killed and whatever was already flushed is drained within a short
// grace window. Returns true when the deadline fired.
bool pump_child(pid_t pid, int out_fd, int err_fd, Clock::time_point deadline, CaptureBuffer& out,
                CaptureBuffer& err) {
    bool timed_out = false;
    char buf[16384];
    std::array<pollfd, 2> fds{{{out_fd, POLLIN, 0}, {err_fd, POLLIN, 0}}};
    int open_fds = 2;
    std::optional<Clock::time_point> drain_deadline;
    while (open_fds > 0) {
        const auto now = Clock::now();
        const Clock::time_point effective = drain_deadline ? *drain_deadline : deadline;
        if (now >= effective) {
            if (!drain_deadline) {
                timed_out = true;
                kill(-pid, SIGKILL);
                drain_deadline = Clock::now() + kDrainGrace;
                continue;
            }
            break;
        }
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(effective - now).count();
        const int rc =
            poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(remaining + 1, 1000)));
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        if (rc == 0) {
            continue;
        }
        for (auto& pfd : fds) {
            if (pfd.fd < 0 || !(pfd.revents & (POLLIN | POLLHUP | POLLERR))) {
                continue;
            }
            const ssize_t n = read(pfd.fd, buf, sizeof buf);
            if (n > 0) {
                (pfd.fd == out_fd ? out : err).append(buf, static_cast<std::size_t>(n));
            } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
                close(pfd.fd);
                pfd.fd = -1;
                --open_fds;
            }
        }
    }
    for (auto& pfd : fds) {
        if (pfd.fd >= 0) {
            close(pfd.fd);
        }
    }
    out.finish();
    err.finish();
    return timed_out;
}

std::string last_nonempty_line(const std::string& text) {
    std::size_t end = text.size();
    while (end > 0) {
        std::size_t start = text.rfind('\n', end - 1);
        std::size_t begin = (start == std::string::npos) ? 0 : start + 1;
        std::string line = text.substr(begin, end - begin);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (!line.empty()) {
            return line;
        }
        if (begin == 0) {
            break;
        }
        end = begin - 1;
    }
    return {};
}

std::string classify_error(const std::string& line) {
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos || colon == 0) {
        return "RuntimeError";
    }
    const std::string head = line.substr(0, colon);
    for (char c : head) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) {
            return "RuntimeError";
        }
    }
    return head;
}

struct AssembledStdout {
    LogText log;
    std::optional<std::string> return_json;
    bool overflowed_tail = false;
};

// Recovers the candidate's log and the return payload from a captured
// stream, honoring the log byte cap.
AssembledStdout assemble_stdout(const CaptureBuffer& cap, const std::string& sentinel,
                                std::size_t max_log_bytes) {
    AssembledStdout out;
    std::string_view stream;
    bool complete = false;
    if (cap.tail_complete()) {
        stream = cap.tail;
        complete = true;
    } else if (cap.head_complete()) {
        stream = cap.head;
        complete = true;
    } else {
        stream = cap.tail;
        out.overflowed_tail = true;
    }
    const SplitStdout split = split_return_channel(stream, sentinel);
    out.return_json = split.return_json;
    if (complete) {
        if (split.log_text.size() <= max_log_bytes) {
            out.log.lines = split_log_lines(split.log_text);
            out.log.original_line_count = out.log.lines.size();
        } else {
            out.log.lines =
                split_log_lines(std::string_view(split.log_text).substr(0, max_log_bytes));
            out.log.truncated = true;
            out.log.original_line_count = split_log_lines(split.log_text).size();
        }
        return out;
    }
    // Byte caps were exceeded; the head window holds the first part of the
    // log. The line count is reconstructed from the stream-wide newline
    // tally (within one line when the stream ended mid-line).
    out.log.lines = split_log_lines(cap.head);
    out.log.truncated = true;
    std::size_t count = cap.newline_total;
    if (out.return_json) {
        count = count >= 2 ? count - 2 : 0; // the driver's own two newlines
    } else if (cap.total > 0 && cap.last_byte != '\n') {
        ++count;
    }
    out.log.original_line_count = count;
    return out;
}

std::atomic<std::uint64_t> g_file_counter{0};

} // namespace

Sandbox::Sandbox(SandboxConfig config) : config_(std::move(config)) {}

ExecutionResult Sandbox::execute(const SourceCode& code, const corpus::FunctionSignature& signature,
                                 const corpus::TestCase& test,
                                 const ResourceLimits& limits) const {
    const auto started = Clock::now();
    auto finish = [&](ExecutionResult r) {
        r.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
        return r;
    };
    auto harness = [&](const std::string& msg, LogText log = {}) {
        ExecutionResult r;
        r.kind = OutcomeKind::harness_error;
        r.error_message = msg;
        r.raw_log = std::move(log);
        return finish(r);
    };

    if (!limits.valid()) {
        return harness("resource limits must be strictly positive");
    }
    const auto runtime = config_.runtimes.find(code.language_tag);
    if (runtime == config_.runtimes.end()) {
        return harness("no runtime configured for language_tag '" + code.language_tag + "'");
    }

    BuiltDriver driver;
    try {
        driver = build_driver(signature, test, code.language_tag);
    } catch (const HarnessFault& e) {
        return harness(e.what());
    }

    const fs::path scratch = config_.scratch_dir.empty()
                                 ? fs::temp_directory_path() / "printdbg-scratch"
                                 : config_.scratch_dir;
    std::error_code ec;
    fs::create_directories(scratch, ec);
    if (ec) {
        return harness("cannot create scratch directory " + scratch.string());
    }
    std::ostringstream name;
    name << "pd_" << getpid() << "_" << g_file_counter.fetch_add(1) << ".py";
    const fs::path program_path = scratch / name.str();
    {
        std::ofstream program(program_path);
        if (!program) {
            return harness("cannot write program file " + program_path.string());
        }
        program << code.text() << '\n' << driver.code.text() << '\n';
    }

    std::vector<std::string> argv_strings = split_command(runtime->second);
    if (argv_strings.empty()) {
        fs::remove(program_path, ec);
        return harness("empty runtime command for '" + code.language_tag + "'");
    }
    for (auto& arg : argv_strings) {
        const std::string token = "{file}";
        if (auto pos = arg.find(token); pos != std::string::npos) {
            arg.replace(pos, token.size(), program_path.string());
        }
    }
    std::vector<char*> argv;
    argv.reserve(argv_strings.size() + 1);
    for (auto& s : argv_strings) {
        argv.push_back(s.data());
    }
    argv.push_back(nullptr);

    int out_pipe[2];
    int err_pipe[2];
    if (pipe(out_pipe) != 0) {
        fs::remove(program_path, ec);
        return harness("pipe() failed");
    }
    if (pipe(err_pipe) != 0) {
        close(out_pipe[0]);
        close(out_pipe[1]);
        fs::remove(program_path, ec);
        return harness("pipe() failed");
    }

    const pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
            close(fd);
        }
        fs::remove(program_path, ec);
        return harness("fork() failed");
    }
    if (pid == 0) {
        // child: own process group so a timeout kill reaps descendants too
        setpgid(0, 0);
        const int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) {
            dup2(devnull, STDIN_FILENO);
            if (devnull != STDIN_FILENO) {
                close(devnull);
            }
        }
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
            close(fd);
        }
        execvp(argv[0], argv.data());
        const std::string msg = std::string(kExecFailedMarker) + ": " + std::strerror(errno) + "\n";
        (void)!write(STDERR_FILENO, msg.data(), msg.size());
        _exit(127);
    }

    setpgid(pid, pid); // parent side too, closing the setpgid/exec race
    close(out_pipe[1]);
    close(err_pipe[1]);

    CaptureBuffer out_cap(limits.max_log_bytes, limits.max_output_bytes);
    CaptureBuffer err_cap(64 * 1024, 64 * 1024);
    const auto deadline = started + limits.wall_clock_timeout;
    bool timed_out = pump_child(pid, out_pipe[0], err_pipe[0], deadline, out_cap, err_cap);

    // The pipes may close while the process lives on (candidate closed
    // stdout); never block past the deadline waiting for it.
    int status = 0;
    while (true) {
        const pid_t reaped = waitpid(pid, &status, WNOHANG);
        if (reaped == pid || reaped < 0) {
            break;
        }
        if (Clock::now() >= deadline) {
            timed_out = true;
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            break;
        }
        usleep(2000);
    }
    fs::remove(program_path, ec);

    AssembledStdout assembled =
        assemble_stdout(out_cap, driver.sentinel, limits.max_log_bytes);

    ExecutionResult result;
    result.raw_log = std::move(assembled.log);

    if (timed_out) {
        result.kind = OutcomeKind::timeout;
        result.error_message = "wall clock timeout of " +
                               std::to_string(limits.wall_clock_timeout.count()) + " ms exceeded";
        return finish(result);
    }

    const std::string err_line = last_nonempty_line(err_cap.head);
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127 &&
        err_cap.head.find(kExecFailedMarker) != std::string::npos) {
        return harness("runtime not available: " + runtime->second + " (" + err_line + ")",
                       result.raw_log);
    }
    if (WIFSIGNALED(status)) {
        result.kind = OutcomeKind::runtime_error;
        result.error_class = "Signal";
        result.error_message = "terminated by signal " + std::to_string(WTERMSIG(status));
        return finish(result);
    }

    const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (exit_code == 0) {
        if (!assembled.return_json) {
            if (assembled.overflowed_tail) {
                return harness("return value exceeds max_output_bytes", result.raw_log);
            }
            result.kind = OutcomeKind::runtime_error;
            result.error_class = "NoResult";
            result.error_message = "process exited without producing a return value";
            return finish(result);
        }
        try {
            result.value = nlohmann::json::parse(*assembled.return_json);
        } catch (const nlohmann::json::exception& e) {
            return harness(std::string("return channel decode failed: ") + e.what(),
                           result.raw_log);
        }
        result.kind = OutcomeKind::returned;
        return finish(result);
    }

    result.kind = OutcomeKind::runtime_error;
    result.error_message =
        err_line.empty() ? "exit code " + std::to_string(exit_code) : err_line;
    result.error_class = err_line.empty() ? "NonZeroExit" : classify_error(err_line);
    return finish(result);
}

} // namespace printdbg::sandbox
