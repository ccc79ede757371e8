// Command-line front end: run experiments, aggregate reports, validate
// corpora, and judge single solutions against the local test cases.

#include "printdbg/config.hpp"
#include "printdbg/errors.hpp"
#include "printdbg/metrics.hpp"
#include "printdbg/oracle.hpp"
#include "printdbg/orchestrator.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace printdbg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCorpusOrConfig = 2;
constexpr int kExitHarnessFault = 3;

struct RunOptions {
    std::string corpus_path;
    std::string strategy;
    std::string config_file;
    std::string backend;
    std::string fixture;
    std::string out_dir{"out"};
    std::string levels;
    std::string problems;
    std::string templates_dir;
    bool resume = false;
};

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        const std::string token =
            csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!token.empty()) {
            tokens.push_back(token);
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return tokens;
}

std::vector<corpus::Level> parse_levels(const std::string& csv) {
    std::vector<corpus::Level> levels;
    for (const auto& token : split_csv(csv)) {
        levels.push_back(corpus::level_from_string(token));
    }
    return levels;
}

config::HarnessConfig effective_config(const RunOptions& opts) {
    config::HarnessConfig cfg =
        opts.config_file.empty() ? config::default_config() : config::load_config(opts.config_file);
    if (!opts.strategy.empty()) {
        cfg.experiment.strategy = strategies::strategy_from_string(opts.strategy);
    }
    if (!opts.backend.empty()) {
        cfg.backend = config::backend_kind_from_string(opts.backend);
    }
    if (!opts.fixture.empty()) {
        cfg.fixture = opts.fixture;
    }
    if (!opts.templates_dir.empty()) {
        cfg.templates_dir = opts.templates_dir;
    }
    return cfg;
}

std::shared_ptr<gateway::ModelBackend> make_backend(config::HarnessConfig& cfg) {
    switch (cfg.backend) {
    case config::BackendKind::replay: {
        if (cfg.fixture.empty()) {
            throw ConfigError("replay backend requires a fixture path");
        }
        auto fixture = gateway::ReplayFixture::load(cfg.fixture);
        // request digests include the model name, so a replay run must use
        // the name recorded in the fixture
        if (!fixture.model_name.empty() &&
            fixture.model_name != cfg.experiment.generation.model_name) {
            std::cerr << "note: using fixture model name '" << fixture.model_name << "'\n";
            cfg.experiment.generation.model_name = fixture.model_name;
        }
        return std::make_shared<gateway::ReplayBackend>(std::move(fixture));
    }
    case config::BackendKind::record: {
        if (cfg.fixture.empty()) {
            throw ConfigError("record backend requires a fixture path to write");
        }
        auto live = std::make_shared<gateway::HttpBackend>(cfg.http);
        return std::make_shared<gateway::RecordingBackend>(live, cfg.fixture);
    }
    case config::BackendKind::http:
        return std::make_shared<gateway::HttpBackend>(cfg.http);
    }
    throw ConfigError("unreachable backend kind");
}

std::vector<corpus::Problem> load_and_prepare(const fs::path& corpus_path,
                                              const config::HarnessConfig& cfg,
                                              const sandbox::Sandbox& sb,
                                              const std::vector<corpus::Level>& levels,
                                              const std::vector<std::string>& ids) {
    auto problems = corpus::load_corpus(corpus_path);
    std::vector<corpus::Problem> selected;
    for (auto& p : problems) {
        if (!levels.empty() &&
            std::find(levels.begin(), levels.end(), p.level) == levels.end()) {
            continue;
        }
        if (!ids.empty() && std::find(ids.begin(), ids.end(), p.id) == ids.end()) {
            continue;
        }
        auto findings = corpus::prepare_problem(p, sb, cfg.experiment.limits);
        for (const auto& finding : findings) {
            std::cerr << "warning: " << finding << "\n";
        }
        selected.push_back(std::move(p));
    }
    return selected;
}

int cmd_run(const RunOptions& opts) {
    config::HarnessConfig cfg = effective_config(opts);
    sandbox::Sandbox sb(cfg.sandbox);
    auto prompts = strategies::PromptFactory(strategies::TemplateStore::load(cfg.templates_dir),
                                             cfg.experiment.language_tag);
    auto problems =
        load_and_prepare(opts.corpus_path, cfg, sb,
                         opts.levels.empty() ? std::vector<corpus::Level>{}
                                             : parse_levels(opts.levels),
                         split_csv(opts.problems));
    if (problems.empty()) {
        std::cerr << "no problems selected\n";
        return kExitCorpusOrConfig;
    }

    std::shared_ptr<gateway::ResponseCache> cache;
    if (!cfg.cache_dir.empty() && cfg.backend != config::BackendKind::replay) {
        cache = std::make_shared<gateway::ResponseCache>(cfg.cache_dir);
    }
    auto backend = make_backend(cfg); // may pin the model name for replay
    gateway::Gateway gw(std::move(backend), cache);

    const fs::path out_dir(opts.out_dir);
    fs::create_directories(out_dir);
    {
        std::ofstream cfg_out(out_dir / "config.json");
        cfg_out << config::config_to_json(cfg).dump(2) << '\n';
    }
    auto result = orchestrator::run_experiment(problems, cfg.experiment, gw, sb, prompts,
                                               out_dir, opts.resume);

    int faults = 0;
    for (const auto& t : result.transcripts) {
        if (t.final_status == orchestrator::FinalStatus::harness_fault) {
            ++faults;
            std::cerr << "harness fault on " << t.problem_id << ": "
                      << t.fault_message.value_or("") << "\n";
        }
    }
    for (const auto& [level, tally] : result.per_level) {
        const double pct =
            tally.total == 0 ? 0.0
                             : metrics::round_one_decimal(100.0 * tally.solved / tally.total);
        std::cout << corpus::to_string(level) << ": " << tally.solved << "/" << tally.total
                  << " solved (" << pct << "%)\n";
    }
    return faults > 0 ? kExitHarnessFault : kExitOk;
}

int cmd_report(const std::string& transcripts_dir, const std::string& out_dir,
               const std::string& level_filter, int max_round) {
    std::map<std::string, orchestrator::ExperimentResult> by_strategy;
    if (!fs::is_directory(transcripts_dir)) {
        throw ConfigError("not a transcript directory: " + transcripts_dir);
    }
    for (const auto& strategy_entry : fs::directory_iterator(transcripts_dir)) {
        if (!strategy_entry.is_directory()) {
            continue;
        }
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(strategy_entry.path())) {
            if (entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            auto t = orchestrator::load_transcript(file);
            auto& result = by_strategy[strategies::to_string(t.strategy)];
            result.strategy = t.strategy;
            auto& tally = result.per_level[t.level];
            ++tally.total;
            if (t.final_status == orchestrator::FinalStatus::solved) {
                ++tally.solved;
            }
            result.transcripts.push_back(std::move(t));
        }
    }
    if (by_strategy.empty()) {
        throw ConfigError("no transcripts found under " + transcripts_dir);
    }

    std::vector<orchestrator::ExperimentResult> results;
    std::map<std::string, metrics::RoundsCurve> curves;
    std::vector<orchestrator::ProblemTranscript> filtered;
    const corpus::Level level = corpus::level_from_string(level_filter);
    for (auto& [name, result] : by_strategy) {
        curves[name] = metrics::rounds_curve(result, max_round);
        for (const auto& t : result.transcripts) {
            if (t.level == level && strategies::is_print_debug_family(t.strategy)) {
                filtered.push_back(t);
            }
        }
        results.push_back(std::move(result));
    }
    auto table = metrics::accuracy(results);
    std::map<std::string, metrics::DistributionSummary> dists;
    dists["print_statements"] = metrics::print_statement_stats(filtered);
    dists["log_lines"] = metrics::log_length_stats(filtered, sandbox::TruncationPolicy{});

    auto manifest = metrics::export_report(table, curves, dists, out_dir);
    for (const auto& f : manifest.files) {
        std::cout << f.sha256 << "  " << f.path << "\n";
    }
    return kExitOk;
}

int cmd_validate(const std::string& corpus_path) {
    auto problems = corpus::load_corpus(corpus_path);
    sandbox::Sandbox sb;
    sandbox::ResourceLimits limits;
    int findings_total = 0;
    for (auto& p : problems) {
        auto report = corpus::validate_problem(p);
        for (const auto& finding : report.findings) {
            std::cout << p.id << ": " << finding << "\n";
            ++findings_total;
        }
        auto findings = corpus::prepare_problem(p, sb, limits);
        for (const auto& finding : findings) {
            std::cout << finding << "\n";
            ++findings_total;
        }
    }
    std::cout << problems.size() << " problems, " << findings_total << " findings\n";
    return findings_total == 0 ? kExitOk : kExitCorpusOrConfig;
}

int cmd_judge(const std::string& corpus_path, const std::string& problem_id,
              const std::string& code_file) {
    auto problems = corpus::load_corpus(corpus_path);
    sandbox::Sandbox sb;
    sandbox::ResourceLimits limits;
    for (auto& p : problems) {
        if (p.id != problem_id) {
            continue;
        }
        corpus::prepare_problem(p, sb, limits);
        std::ifstream in(code_file);
        if (!in) {
            throw ConfigError("cannot open code file: " + code_file);
        }
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto verdict = judge::judge(SourceCode::from_text(text), p, sb, limits, {});
        std::cout << (verdict.all_passed ? "ACCEPTED" : "REJECTED") << " "
                  << verdict.passed_count << "/" << verdict.total_count << " cases passed\n";
        if (verdict.first_failure) {
            const auto& f = *verdict.first_failure;
            std::cout << "first failure: case " << f.case_index << " ("
                      << judge::to_string(f.failure_kind) << ")\n";
            std::cout << "  input: " << strategies::format_input(p.function_signature, f.input)
                      << "\n";
            if (f.wrong_answer) {
                std::cout << "  wrong answer: " << f.wrong_answer->dump() << "\n";
            }
            if (f.error_message) {
                std::cout << "  error: " << *f.error_message << "\n";
            }
            std::cout << "  expected: " << f.expected_answer.dump() << "\n";
        }
        return kExitOk;
    }
    throw CorpusError("no problem with id '" + problem_id + "' in " + corpus_path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"print-debugging experiment harness"};
    app.require_subcommand(1);

    RunOptions run_opts;
    auto* run = app.add_subcommand("run", "run an experiment over a corpus");
    run->add_option("--corpus", run_opts.corpus_path, "corpus directory")->required();
    run->add_option("--strategy", run_opts.strategy,
                    "no_debug | simple_feedback | ut_feedback | rubber_duck | print_debug | "
                    "print_debug_case_only | print_debug_log_only");
    run->add_option("--config", run_opts.config_file, "JSON config file");
    run->add_option("--backend", run_opts.backend, "http | record | replay");
    run->add_option("--fixture", run_opts.fixture, "fixture file (replay source / record sink)");
    run->add_option("--out", run_opts.out_dir, "output directory for transcripts");
    run->add_option("--levels", run_opts.levels, "comma-separated level filter");
    run->add_option("--problems", run_opts.problems, "comma-separated problem id filter");
    run->add_option("--templates", run_opts.templates_dir, "prompt template directory");
    run->add_flag("--resume", run_opts.resume, "skip problems with existing transcripts");

    std::string transcripts_dir, report_out{"report"}, report_level{"medium"};
    int report_max_round = 10;
    auto* report = app.add_subcommand("report", "aggregate transcripts into report files");
    report->add_option("--transcripts", transcripts_dir, "directory produced by run")->required();
    report->add_option("--out", report_out, "report output directory");
    report->add_option("--level", report_level, "level filter for the distributions");
    report->add_option("--max-round", report_max_round, "last round in the solved-per-round curve");

    std::string validate_corpus_path;
    auto* validate = app.add_subcommand("validate-corpus", "check corpus invariants and oracles");
    validate->add_option("--corpus", validate_corpus_path, "corpus directory")->required();

    std::string judge_corpus, judge_problem, judge_code;
    auto* judge_cmd = app.add_subcommand("judge", "judge one solution file locally");
    judge_cmd->add_option("--corpus", judge_corpus, "corpus directory")->required();
    judge_cmd->add_option("--problem", judge_problem, "problem id")->required();
    judge_cmd->add_option("--code", judge_code, "solution source file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed()) {
            return cmd_run(run_opts);
        }
        if (report->parsed()) {
            return cmd_report(transcripts_dir, report_out, report_level, report_max_round);
        }
        if (validate->parsed()) {
            return cmd_validate(validate_corpus_path);
        }
        if (judge_cmd->parsed()) {
            return cmd_judge(judge_corpus, judge_problem, judge_code);
        }
    } catch (const CorpusError& e) {
        std::cerr << "corpus error: " << e.what() << "\n";
        return kExitCorpusOrConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitCorpusOrConfig;
    } catch (const TemplateError& e) {
        std::cerr << "template error: " << e.what() << "\n";
        return kExitCorpusOrConfig;
    } catch (const GatewayError& e) {
        std::cerr << "gateway error: " << e.what() << "\n";
        return kExitHarnessFault;
    } catch (const HarnessFault& e) {
        std::cerr << "harness fault: " << e.what() << "\n";
        return kExitHarnessFault;
    }
    return kExitUsage;
}
