#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "printdbg/corpus.hpp"
#include "printdbg/errors.hpp"
#include "printdbg/sandbox.hpp"

#include <chrono>
#include <dirent.h>
#include <fstream>
#include <random>
#include <set>
#include <thread>
#include <unistd.h>

using namespace printdbg;
using namespace printdbg::sandbox;

namespace {

const corpus::FunctionSignature kUnary{"solve", {{"x", "int"}}, "int"};
const corpus::TestCase kCaseOne{{StructuredValue(1)}, StructuredValue(0),
                                corpus::CaseOrigin::example};

ResourceLimits quick_limits(int timeout_ms = 5000) {
    ResourceLimits limits;
    limits.wall_clock_timeout = std::chrono::milliseconds(timeout_ms);
    return limits;
}

ExecutionResult run(const std::string& code_text, const corpus::FunctionSignature& sig,
                    const corpus::TestCase& tc, const ResourceLimits& limits = quick_limits()) {
    Sandbox sb;
    return sb.execute(SourceCode::from_text(code_text), sig, tc, limits);
}

// children of this process still alive, per /proc
std::set<pid_t> live_children() {
    std::set<pid_t> children;
    DIR* proc = opendir("/proc");
    if (!proc) {
        return children;
    }
    const pid_t self = getpid();
    while (dirent* entry = readdir(proc)) {
        pid_t pid = 0;
        char* end = nullptr;
        pid = static_cast<pid_t>(std::strtol(entry->d_name, &end, 10));
        if (pid <= 0 || (end && *end != '\0')) {
            continue;
        }
        std::ifstream stat("/proc/" + std::string(entry->d_name) + "/stat");
        std::string content((std::istreambuf_iterator<char>(stat)),
                            std::istreambuf_iterator<char>());
        const auto close_paren = content.rfind(')');
        if (close_paren == std::string::npos) {
            continue;
        }
        std::istringstream rest(content.substr(close_paren + 1));
        std::string state;
        pid_t ppid = 0;
        rest >> state >> ppid;
        if (ppid == self && state != "Z") {
            children.insert(pid);
        }
    }
    closedir(proc);
    return children;
}

} // namespace

// ---------------------------------------------------------------------------
// execute
// ---------------------------------------------------------------------------

TEST_CASE("correct prefix-common-array code returns the brute-forced value with empty log") {
    // brute force from the definition fixes the expected value
    auto brute = [](std::vector<int> a, std::vector<int> b) {
        std::vector<int> c;
        for (std::size_t i = 0; i < a.size(); ++i) {
            int count = 0;
            for (int v = 1; v <= static_cast<int>(a.size()); ++v) {
                bool in_a = false;
                bool in_b = false;
                for (std::size_t k = 0; k <= i; ++k) {
                    in_a |= a[k] == v;
                    in_b |= b[k] == v;
                }
                count += in_a && in_b ? 1 : 0;
            }
            c.push_back(count);
        }
        return c;
    };
    REQUIRE(brute({1, 3, 2, 4}, {3, 1, 2, 4}) == std::vector<int>{0, 2, 3, 4});

    const corpus::FunctionSignature sig{
        "prefix_common_array", {{"a", "int[]"}, {"b", "int[]"}}, "int[]"};
    const corpus::TestCase tc{{StructuredValue({1, 3, 2, 4}), StructuredValue({3, 1, 2, 4})},
                              StructuredValue({0, 2, 3, 4}),
                              corpus::CaseOrigin::example};
    auto result = run("def prefix_common_array(a, b):\n"
                      "    seen_a = set()\n"
                      "    seen_b = set()\n"
                      "    out = []\n"
                      "    for i in range(len(a)):\n"
                      "        seen_a.add(a[i])\n"
                      "        seen_b.add(b[i])\n"
                      "        out.append(len(seen_a & seen_b))\n"
                      "    return out",
                      sig, tc);
    REQUIRE(result.kind == OutcomeKind::returned);
    CHECK(result.value == StructuredValue({0, 2, 3, 4}));
    CHECK(result.raw_log.lines.empty());
    CHECK(result.raw_log.original_line_count == 0);
    CHECK_FALSE(result.raw_log.truncated);
}

TEST_CASE("log survives a runtime error: prints before an index error are kept") {
    auto result = run("def solve(x):\n"
                      "    print('first')\n"
                      "    print('second')\n"
                      "    return [1, 2][5]",
                      kUnary, kCaseOne);
    REQUIRE(result.kind == OutcomeKind::runtime_error);
    CHECK(result.error_class == "IndexError");
    REQUIRE(result.raw_log.lines.size() == 2);
    CHECK(result.raw_log.lines[0] == "first");
    CHECK(result.raw_log.lines[1] == "second");
    CHECK_FALSE(result.raw_log.truncated);
}

TEST_CASE("log-before-error holds for k prints then a raise, k in {0, 1, 5, 50}") {
    for (int k : {0, 1, 5, 50}) {
        auto result = run("def solve(x):\n"
                          "    for i in range(" +
                              std::to_string(k) +
                              "):\n"
                              "        print('line', i)\n"
                              "    raise ValueError('boom')",
                          kUnary, kCaseOne);
        REQUIRE(result.kind == OutcomeKind::runtime_error);
        CHECK(result.error_class == "ValueError");
        CHECK(result.raw_log.lines.size() == static_cast<std::size_t>(k));
        CHECK(result.raw_log.original_line_count == static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            CHECK(result.raw_log.lines[i] == "line " + std::to_string(i));
        }
    }
}

TEST_CASE("infinite printing loop: timeout with a non-empty capped log, within grace") {
    const auto limits = quick_limits(1000);
    const auto started = std::chrono::steady_clock::now();
    auto result = run("def solve(x):\n"
                      "    i = 0\n"
                      "    while True:\n"
                      "        print('tick', i)\n"
                      "        i += 1",
                      kUnary, kCaseOne, limits);
    const auto elapsed = std::chrono::steady_clock::now() - started;
    REQUIRE(result.kind == OutcomeKind::timeout);
    CHECK_FALSE(result.raw_log.lines.empty());
    CHECK(elapsed < limits.wall_clock_timeout + std::chrono::milliseconds(2000));
    // capped: stored log never exceeds the byte budget by construction
    std::size_t bytes = 0;
    for (const auto& line : result.raw_log.lines) {
        bytes += line.size() + 1;
    }
    CHECK(bytes <= limits.max_log_bytes + 1);
}

TEST_CASE("silent infinite loop still times out with an empty log") {
    auto result = run("def solve(x):\n"
                      "    while True:\n"
                      "        pass",
                      kUnary, kCaseOne, quick_limits(800));
    REQUIRE(result.kind == OutcomeKind::timeout);
    CHECK(result.raw_log.lines.empty());
}

TEST_CASE("zero-argument signature returning a constant") {
    const corpus::FunctionSignature sig{"solve", {}, "int"};
    const corpus::TestCase tc{{}, StructuredValue(7), corpus::CaseOrigin::example};
    auto result = run("def solve():\n    return 7", sig, tc);
    REQUIRE(result.kind == OutcomeKind::returned);
    CHECK(result.value == StructuredValue(7));
}

TEST_CASE("nested lists and nulls decode to the corpus values") {
    const corpus::FunctionSignature sig{"solve", {{"x", "any"}}, "any"};
    StructuredValue nested = nlohmann::json::parse(R"([[1, [2, null]], {"k": [3.5, "s"]}, null])");
    const corpus::TestCase tc{{nested}, nested, corpus::CaseOrigin::example};
    auto result = run("def solve(x):\n    return x", sig, tc);
    REQUIRE(result.kind == OutcomeKind::returned);
    CHECK(result.value == nested);
}

TEST_CASE("candidate printing sentinel-shaped text does not confuse decoding") {
    // the adversarial print mimics the sentinel format; the real sentinel is
    // random per execution, so the return value still decodes
    auto result = run("def solve(x):\n"
                      "    print('@@RET:0123456789abcdef0123456789abcdef@@')\n"
                      "    return 42",
                      kUnary, kCaseOne);
    REQUIRE(result.kind == OutcomeKind::returned);
    CHECK(result.value == StructuredValue(42));
    REQUIRE(result.raw_log.lines.size() == 1);
    CHECK(result.raw_log.lines[0] == "@@RET:0123456789abcdef0123456789abcdef@@");
}

TEST_CASE("missing function is the candidate's runtime error, not a harness fault") {
    auto result = run("def other_name(x):\n    return x", kUnary, kCaseOne);
    REQUIRE(result.kind == OutcomeKind::runtime_error);
    CHECK(result.error_class == "SolutionNotFound");
}

TEST_CASE("unencodable return value is a runtime error") {
    auto result = run("def solve(x):\n    return {1, 2}", kUnary, kCaseOne);
    REQUIRE(result.kind == OutcomeKind::runtime_error);
    CHECK(result.error_class == "ReturnEncodingError");
}

TEST_CASE("missing runtime is a harness error") {
    SandboxConfig config;
    config.runtimes["python3"] = "definitely-not-a-real-interpreter-4e1 {file}";
    Sandbox sb(config);
    auto result = sb.execute(SourceCode::from_text("x = 1", "python3"), kUnary, kCaseOne,
                             quick_limits());
    REQUIRE(result.kind == OutcomeKind::harness_error);
    CHECK(result.error_message.find("runtime not available") != std::string::npos);
}

TEST_CASE("unconfigured language tag is a harness error") {
    auto result = run("x = 1", kUnary, kCaseOne);
    CHECK(result.kind != OutcomeKind::harness_error); // python3 is configured
    Sandbox sb;
    auto missing = sb.execute(SourceCode::from_text("x", "cobol"), kUnary, kCaseOne,
                              quick_limits());
    REQUIRE(missing.kind == OutcomeKind::harness_error);
    CHECK(missing.error_message.find("cobol") != std::string::npos);
}

TEST_CASE("arity mismatch between signature and case is a harness error") {
    const corpus::TestCase two_args{{StructuredValue(1), StructuredValue(2)}, StructuredValue(0),
                                    corpus::CaseOrigin::example};
    auto result = run("def solve(x):\n    return x", kUnary, two_args);
    REQUIRE(result.kind == OutcomeKind::harness_error);
    CHECK(result.error_message.find("arity") != std::string::npos);
}

TEST_CASE("solution classes are found through the class fallback") {
    auto result = run("class Solution:\n"
                      "    def solve(self, x):\n"
                      "        return x * 2",
                      kUnary, kCaseOne);
    REQUIRE(result.kind == OutcomeKind::returned);
    CHECK(result.value == StructuredValue(2));
}

TEST_CASE("no orphan children remain after executions, including timeouts") {
    const auto before = live_children();
    run("def solve(x):\n    return x", kUnary, kCaseOne);
    run("def solve(x):\n"
        "    while True:\n"
        "        pass",
        kUnary, kCaseOne, quick_limits(500));
    // allow the reaper a moment in case of scheduling noise
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    const auto after = live_children();
    for (pid_t pid : after) {
        CHECK(before.count(pid) > 0);
    }
}

TEST_CASE("concurrent executions never interleave logs or results") {
    constexpr int kThreads = 8;
    std::vector<std::thread> threads;
    std::vector<ExecutionResult> results(kThreads);
    for (int t = 0; t < kThreads; ++t) {
        threads.emplace_back([&results, t]() {
            const std::string tag = "worker-" + std::to_string(t);
            results[t] = run("def solve(x):\n"
                             "    for i in range(20):\n"
                             "        print('" +
                                 tag +
                                 "', i)\n"
                                 "    return x + " +
                                 std::to_string(t),
                             kUnary, kCaseOne);
        });
    }
    for (auto& thread : threads) {
        thread.join();
    }
    for (int t = 0; t < kThreads; ++t) {
        const std::string tag = "worker-" + std::to_string(t);
        REQUIRE(results[t].kind == OutcomeKind::returned);
        CHECK(results[t].value == StructuredValue(1 + t));
        REQUIRE(results[t].raw_log.lines.size() == 20);
        for (const auto& line : results[t].raw_log.lines) {
            CHECK(line.find(tag) == 0);
        }
    }
}

// ---------------------------------------------------------------------------
// truncate_log
// ---------------------------------------------------------------------------

namespace {

LogText numbered_log(std::size_t n) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < n; ++i) {
        lines.push_back("line-" + std::to_string(i));
    }
    return LogText::from_lines(std::move(lines));
}

TruncationPolicy policy_80_20() {
    TruncationPolicy policy;
    policy.max_lines = 120;
    policy.head_lines = 80;
    policy.tail_lines = 20;
    return policy;
}

} // namespace

TEST_CASE("12-line log under a 100-line limit passes through unchanged") {
    TruncationPolicy policy;
    policy.max_lines = 100;
    policy.head_lines = 70;
    policy.tail_lines = 20;
    auto log = numbered_log(12);
    auto out = truncate_log(log, policy);
    CHECK(out == log);
    CHECK_FALSE(out.truncated);
}

TEST_CASE("150-line log with head 80 / tail 20 becomes 101 lines with the count in the marker") {
    auto out = truncate_log(numbered_log(150), policy_80_20());
    REQUIRE(out.lines.size() == 101);
    CHECK(out.truncated);
    CHECK(out.original_line_count == 150);
    for (std::size_t i = 0; i < 80; ++i) {
        CHECK(out.lines[i] == "line-" + std::to_string(i));
    }
    CHECK(out.lines[80].find("50") != std::string::npos); // 150 - 80 - 20 omitted
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(out.lines[81 + i] == "line-" + std::to_string(130 + i));
    }
}

TEST_CASE("truncation is idempotent") {
    const auto policy = policy_80_20();
    std::mt19937 rng(20240817);
    for (int trial = 0; trial < 50; ++trial) {
        auto log = numbered_log(rng() % 400);
        auto once = truncate_log(log, policy);
        auto twice = truncate_log(once, policy);
        CHECK(twice == once);
    }
}

TEST_CASE("truncation properties: bound, prefix/suffix preservation, no fabricated lines") {
    const auto policy = policy_80_20();
    std::mt19937 rng(987654);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = rng() % 500;
        auto log = numbered_log(n);
        auto out = truncate_log(log, policy);

        CHECK(out.lines.size() <= policy.max_lines);
        CHECK(out.original_line_count == n);
        if (n <= policy.max_lines) {
            CHECK(out.lines.size() == n);
            CHECK_FALSE(out.truncated);
        } else {
            REQUIRE(out.lines.size() == policy.head_lines + 1 + policy.tail_lines);
            CHECK(out.truncated);
            // every non-marker line is an input line in original order
            for (std::size_t i = 0; i < policy.head_lines; ++i) {
                CHECK(out.lines[i] == log.lines[i]);
            }
            for (std::size_t i = 0; i < policy.tail_lines; ++i) {
                CHECK(out.lines[policy.head_lines + 1 + i] ==
                      log.lines[n - policy.tail_lines + i]);
            }
        }
    }
}

TEST_CASE("over-long lines are clipped to max_line_chars") {
    TruncationPolicy policy;
    policy.max_line_chars = 8;
    auto log = LogText::from_lines({"short", "exactly8", "this one is too long"});
    auto out = truncate_log(log, policy);
    CHECK(out.lines[0] == "short");
    CHECK(out.lines[1] == "exactly8");
    CHECK(out.lines[2] == "this one");
    CHECK_FALSE(out.truncated); // clipping alone does not change the line count
    CHECK(out.original_line_count == 3);
}

TEST_CASE("invalid truncation policy is rejected") {
    TruncationPolicy policy;
    policy.max_lines = 100;
    policy.head_lines = 80;
    policy.tail_lines = 20; // 80 + 20 + 1 > 100
    CHECK_FALSE(policy.valid());
    CHECK_THROWS_AS(truncate_log(numbered_log(5), policy), HarnessFault);
}

// ---------------------------------------------------------------------------
// return channel plumbing
// ---------------------------------------------------------------------------

TEST_CASE("split_return_channel recovers payload and exact log text") {
    const std::string sentinel = "@@RET:feedfacefeedfacefeedfacefeedface@@";
    SUBCASE("normal stream") {
        const std::string stream = "a\nb\n\n" + sentinel + "[1,2]" + sentinel + "\n";
        auto split = split_return_channel(stream, sentinel);
        REQUIRE(split.return_json.has_value());
        CHECK(*split.return_json == "[1,2]");
        CHECK(split.log_text == "a\nb\n");
        CHECK(split_log_lines(split.log_text) == std::vector<std::string>{"a", "b"});
    }
    SUBCASE("no trailing newline in candidate output") {
        const std::string stream = "abc\n" + sentinel + "7" + sentinel + "\n";
        auto split = split_return_channel(stream, sentinel);
        REQUIRE(split.return_json.has_value());
        CHECK(*split.return_json == "7");
        CHECK(split_log_lines(split.log_text) == std::vector<std::string>{"abc"});
    }
    SUBCASE("empty candidate output") {
        const std::string stream = "\n" + sentinel + "null" + sentinel + "\n";
        auto split = split_return_channel(stream, sentinel);
        REQUIRE(split.return_json.has_value());
        CHECK(split.log_text.empty());
    }
    SUBCASE("no sentinel at all") {
        auto split = split_return_channel("plain output\n", sentinel);
        CHECK_FALSE(split.return_json.has_value());
        CHECK(split.log_text == "plain output\n");
    }
}

TEST_CASE("split_log_lines keeps empty printed lines but not the trailing terminator") {
    CHECK(split_log_lines("a\n\n") == std::vector<std::string>{"a", ""});
    CHECK(split_log_lines("a\nb") == std::vector<std::string>{"a", "b"});
    CHECK(split_log_lines("") == std::vector<std::string>{});
    CHECK(split_log_lines("\n") == std::vector<std::string>{""});
}

TEST_CASE("sentinels are unique per call") {
    std::set<std::string> seen;
    for (int i = 0; i < 200; ++i) {
        seen.insert(make_sentinel());
    }
    CHECK(seen.size() == 200);
}
