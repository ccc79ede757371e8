#include "printdbg/metrics.hpp"

#include "printdbg/digest.hpp"
#include "printdbg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace printdbg::metrics {

namespace fs = std::filesystem;
using nlohmann::json;

double round_one_decimal(double x) {
    return std::round(x * 10.0) / 10.0;
}

AccuracyTable accuracy(const std::vector<orchestrator::ExperimentResult>& results) {
    AccuracyTable table;
    for (const auto& result : results) {
        auto& row = table.rows[strategies::to_string(result.strategy)];
        for (const auto& [level, tally] : result.per_level) {
            const std::string level_name = corpus::to_string(level);
            row[level_name] = tally.total == 0
                                  ? 0.0
                                  : round_one_decimal(100.0 * tally.solved / tally.total);
            table.level_totals[level_name] = tally.total;
        }
    }
    return table;
}

RoundsCurve rounds_curve(const orchestrator::ExperimentResult& result, int max_round) {
    RoundsCurve curve;
    for (int r = 0; r <= max_round; ++r) {
        int solved = 0;
        for (const auto& t : result.transcripts) {
            if (t.solved_at_round && *t.solved_at_round <= r) {
                ++solved;
            }
        }
        curve.points.emplace_back(r, solved);
    }
    return curve;
}

DistributionSummary
print_statement_stats(const std::vector<orchestrator::ProblemTranscript>& ts) {
    DistributionSummary summary;
    double sum = 0.0;
    for (const auto& t : ts) {
        for (const auto& round : t.rounds) {
            if (!round.instrumentation_report) {
                continue;
            }
            const long count = static_cast<long>(round.instrumentation_report->inserted_print_count);
            ++summary.histogram[count];
            sum += static_cast<double>(count);
            ++summary.n;
        }
    }
    summary.mean = summary.n == 0 ? 0.0 : sum / static_cast<double>(summary.n);
    return summary;
}

DistributionSummary log_length_stats(const std::vector<orchestrator::ProblemTranscript>& ts,
                                     const sandbox::TruncationPolicy&) {
    DistributionSummary summary;
    long rounds_with_log = 0;
    long overflowed = 0;
    double sum = 0.0;
    for (const auto& t : ts) {
        for (const auto& round : t.rounds) {
            if (!round.log) {
                continue;
            }
            ++rounds_with_log;
            if (round.log->truncated) {
                // overflowed logs stay out of the histogram
                ++overflowed;
                continue;
            }
            const long lines = static_cast<long>(round.log->original_line_count);
            ++summary.histogram[lines];
            sum += static_cast<double>(lines);
            ++summary.n;
        }
    }
    summary.mean = summary.n == 0 ? 0.0 : sum / static_cast<double>(summary.n);
    if (rounds_with_log > 0) {
        summary.overflow_fraction =
            static_cast<double>(overflowed) / static_cast<double>(rounds_with_log);
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

std::string format_decimal(double value, int places) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, value);
    return buf;
}

void write_file(const fs::path& file, const std::string& content) {
    std::ofstream out(file);
    if (!out) {
        throw ConfigError("cannot write report file: " + file.string());
    }
    out << content;
}

} // namespace

ExportManifest export_report(const AccuracyTable& table,
                             const std::map<std::string, RoundsCurve>& curves,
                             const std::map<std::string, DistributionSummary>& distributions,
                             const fs::path& out_dir, const std::vector<std::string>& formats) {
    for (const auto& format : formats) {
        if (format != "csv" && format != "json") {
            throw ConfigError("unknown export format: " + format);
        }
    }
    const bool csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
    const bool structured = std::find(formats.begin(), formats.end(), "json") != formats.end();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw ConfigError("cannot create report directory: " + out_dir.string());
    }

    std::map<std::string, std::string> files; // name -> content, written sorted

    if (csv) {
        {
            // column set is the union over strategies, ordered by difficulty
            std::vector<std::string> levels;
            for (const std::string candidate : {"easy", "medium", "hard"}) {
                for (const auto& [strategy, row] : table.rows) {
                    if (row.count(candidate)) {
                        levels.push_back(candidate);
                        break;
                    }
                }
            }
            std::ostringstream os;
            os << "strategy";
            for (const auto& level : levels) {
                os << "," << level;
            }
            os << "\n";
            for (const auto& [strategy, row] : table.rows) {
                os << strategy;
                for (const auto& level : levels) {
                    auto it = row.find(level);
                    os << ",";
                    if (it != row.end()) {
                        os << format_decimal(it->second, 1);
                    }
                }
                os << "\n";
            }
            files["accuracy.csv"] = os.str();
        }
        {
            std::ostringstream os;
            os << "strategy,round,cumulative_solved\n";
            for (const auto& [strategy, curve] : curves) {
                for (const auto& [round, solved] : curve.points) {
                    os << strategy << "," << round << "," << solved << "\n";
                }
            }
            files["rounds_curve.csv"] = os.str();
        }
        for (const auto& [name, dist] : distributions) {
            std::ostringstream os;
            os << "value,count\n";
            for (const auto& [value, count] : dist.histogram) {
                os << value << "," << count << "\n";
            }
            files[name + ".csv"] = os.str();
        }
    }

    if (structured) {
        json j;
        j["accuracy"] = json::object();
        for (const auto& [strategy, row] : table.rows) {
            for (const auto& [level, pct] : row) {
                j["accuracy"][strategy][level] = pct;
            }
        }
        j["level_totals"] = table.level_totals;
        j["rounds_curve"] = json::object();
        for (const auto& [strategy, curve] : curves) {
            json points = json::array();
            for (const auto& [round, solved] : curve.points) {
                points.push_back(json{{"round", round}, {"solved", solved}});
            }
            j["rounds_curve"][strategy] = std::move(points);
        }
        j["distributions"] = json::object();
        for (const auto& [name, dist] : distributions) {
            json jd;
            jd["histogram"] = json::object();
            for (const auto& [value, count] : dist.histogram) {
                jd["histogram"][std::to_string(value)] = count;
            }
            jd["mean"] = dist.mean;
            jd["n"] = dist.n;
            if (dist.overflow_fraction) {
                jd["overflow_fraction"] = *dist.overflow_fraction;
            }
            j["distributions"][name] = std::move(jd);
        }
        files["summary.json"] = j.dump(2) + "\n";
    }

    ExportManifest manifest;
    for (const auto& [name, content] : files) {
        write_file(out_dir / name, content);
        manifest.files.push_back({name, sha256_hex(content)});
    }
    {
        json jm;
        jm["files"] = json::array();
        for (const auto& f : manifest.files) {
            jm["files"].push_back(json{{"path", f.path}, {"sha256", f.sha256}});
        }
        const std::string content = jm.dump(2) + "\n";
        write_file(out_dir / "manifest.json", content);
        manifest.files.push_back({"manifest.json", sha256_hex(content)});
    }
    return manifest;
}

} // namespace printdbg::metrics
