#pragma once

#include "printdbg/orchestrator.hpp"
#include "printdbg/sandbox.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace printdbg::metrics {

/// strategy -> level -> accuracy percent, rounded to one decimal.
struct AccuracyTable {
    std::map<std::string, std::map<std::string, double>> rows;
    std::map<std::string, int> level_totals;
};

AccuracyTable accuracy(const std::vector<orchestrator::ExperimentResult>& results);

double round_one_decimal(double x);

/// Cumulative solved count per round: the point at round r counts transcripts
/// with solved_at_round <= r.
struct RoundsCurve {
    std::vector<std::pair<int, int>> points;
};

RoundsCurve rounds_curve(const orchestrator::ExperimentResult& result, int max_round);

struct DistributionSummary {
    std::map<long, long> histogram; // value -> count
    double mean{0.0};
    std::optional<double> overflow_fraction;
    long n{0};
};

/// Pools inserted print counts over every debug round that instrumented code,
/// across all given transcripts. Callers filter by level beforehand.
DistributionSummary print_statement_stats(const std::vector<orchestrator::ProblemTranscript>& ts);

/// Histogram over original line counts of non-truncated logs; rounds whose
/// log overflowed the policy are excluded from the histogram but counted in
/// overflow_fraction.
DistributionSummary log_length_stats(const std::vector<orchestrator::ProblemTranscript>& ts,
                                     const sandbox::TruncationPolicy& policy);

struct ExportedFile {
    std::string path; // relative to the export directory
    std::string sha256;
};

struct ExportManifest {
    std::vector<ExportedFile> files;
};

/// Writes delimiter-separated tables plus a structured summary document and a
/// manifest listing every file with its checksum. Deterministic: identical
/// inputs produce byte-identical files.
ExportManifest export_report(const AccuracyTable& table,
                             const std::map<std::string, RoundsCurve>& curves,
                             const std::map<std::string, DistributionSummary>& distributions,
                             const std::filesystem::path& out_dir,
                             const std::vector<std::string>& formats = {"csv", "json"});

} // namespace printdbg::metrics
