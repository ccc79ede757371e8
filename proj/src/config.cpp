#include "printdbg/config.hpp"

#include "printdbg/errors.hpp"

#include <fstream>

namespace printdbg::config {

using nlohmann::json;

std::string to_string(BackendKind kind) {
    switch (kind) {
    case BackendKind::http: return "http";
    case BackendKind::record: return "record";
    case BackendKind::replay: return "replay";
    }
    return "replay";
}

BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "http") return BackendKind::http;
    if (s == "record") return BackendKind::record;
    if (s == "replay") return BackendKind::replay;
    throw ConfigError("unknown backend kind: " + s);
}

HarnessConfig default_config() {
    return HarnessConfig{};
}

HarnessConfig config_from_json(const json& j) {
    HarnessConfig c;
    try {
        if (j.contains("strategy")) {
            c.experiment.strategy =
                strategies::strategy_from_string(j.at("strategy").get<std::string>());
        }
        if (j.contains("language_tag")) {
            c.experiment.language_tag = j.at("language_tag").get<std::string>();
        }
        if (j.contains("generation")) {
            const auto& jg = j.at("generation");
            c.experiment.generation.model_name =
                jg.value("model_name", c.experiment.generation.model_name);
            c.experiment.generation.temperature =
                jg.value("temperature", c.experiment.generation.temperature);
            c.experiment.generation.max_tokens =
                jg.value("max_tokens", c.experiment.generation.max_tokens);
        }
        if (j.contains("sandbox")) {
            const auto& js = j.at("sandbox");
            if (js.contains("runtimes")) {
                c.sandbox.runtimes.clear();
                for (const auto& [tag, command] : js.at("runtimes").items()) {
                    c.sandbox.runtimes[tag] = command.get<std::string>();
                }
            }
            if (js.contains("timeout_secs")) {
                c.experiment.limits.wall_clock_timeout =
                    std::chrono::milliseconds(static_cast<long long>(
                        js.at("timeout_secs").get<double>() * 1000.0));
            }
            if (js.contains("max_log_bytes")) {
                c.experiment.limits.max_log_bytes = js.at("max_log_bytes").get<std::size_t>();
            }
            if (js.contains("max_output_bytes")) {
                c.experiment.limits.max_output_bytes =
                    js.at("max_output_bytes").get<std::size_t>();
            }
            if (js.contains("scratch_dir")) {
                c.sandbox.scratch_dir = js.at("scratch_dir").get<std::string>();
            }
        }
        if (j.contains("truncation")) {
            const auto& jt = j.at("truncation");
            auto& policy = c.experiment.truncation;
            policy.max_lines = jt.value("max_lines", policy.max_lines);
            policy.head_lines = jt.value("head_lines", policy.head_lines);
            policy.tail_lines = jt.value("tail_lines", policy.tail_lines);
            policy.max_line_chars = jt.value("max_line_chars", policy.max_line_chars);
            policy.elision_marker = jt.value("elision_marker", policy.elision_marker);
            if (!policy.valid()) {
                throw ConfigError("truncation policy invalid: head_lines + tail_lines + 1 must "
                                  "not exceed max_lines and all fields must be positive");
            }
        }
        if (j.contains("loop")) {
            const auto& jl = j.at("loop");
            c.experiment.no_improvement_budget =
                jl.value("no_improvement_budget", c.experiment.no_improvement_budget);
            c.experiment.max_total_rounds =
                jl.value("max_total_rounds", c.experiment.max_total_rounds);
            if (c.experiment.no_improvement_budget <= 0 || c.experiment.max_total_rounds <= 0) {
                throw ConfigError("loop budgets must be positive");
            }
        }
        if (j.contains("compare")) {
            const auto& jc = j.at("compare");
            c.experiment.compare.float_tolerance =
                jc.value("float_tolerance", c.experiment.compare.float_tolerance);
            if (jc.contains("list_order")) {
                c.experiment.compare.list_order =
                    judge::list_order_from_string(jc.at("list_order").get<std::string>());
            }
        }
        if (j.contains("gateway")) {
            const auto& jg = j.at("gateway");
            if (jg.contains("backend")) {
                c.backend = backend_kind_from_string(jg.at("backend").get<std::string>());
            }
            c.http.base_url = jg.value("base_url", c.http.base_url);
            c.http.path = jg.value("path", c.http.path);
            c.http.api_key_env = jg.value("api_key_env", c.http.api_key_env);
            c.http.auth_header = jg.value("auth_header", c.http.auth_header);
            c.http.retry_attempts = jg.value("retry_attempts", c.http.retry_attempts);
            if (jg.contains("retry_initial_backoff_ms")) {
                c.http.retry_initial_backoff =
                    std::chrono::milliseconds(jg.at("retry_initial_backoff_ms").get<long>());
            }
            if (jg.contains("cache_dir")) {
                c.cache_dir = jg.at("cache_dir").get<std::string>();
            }
            if (jg.contains("fixture")) {
                c.fixture = jg.at("fixture").get<std::string>();
            }
        }
        if (j.contains("templates_dir")) {
            c.templates_dir = j.at("templates_dir").get<std::string>();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.experiment.generation.max_tokens <= 0) {
        throw ConfigError("generation.max_tokens must be positive");
    }
    if (c.experiment.generation.temperature < 0.0) {
        throw ConfigError("generation.temperature must be non-negative");
    }
    return c;
}

HarnessConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot open config file: " + file.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json config_to_json(const HarnessConfig& c) {
    json j;
    j["strategy"] = strategies::to_string(c.experiment.strategy);
    j["language_tag"] = c.experiment.language_tag;
    j["generation"] = json{{"model_name", c.experiment.generation.model_name},
                           {"temperature", c.experiment.generation.temperature},
                           {"max_tokens", c.experiment.generation.max_tokens}};
    json runtimes = json::object();
    for (const auto& [tag, command] : c.sandbox.runtimes) {
        runtimes[tag] = command;
    }
    j["sandbox"] =
        json{{"runtimes", std::move(runtimes)},
             {"timeout_secs", c.experiment.limits.wall_clock_timeout.count() / 1000.0},
             {"max_log_bytes", c.experiment.limits.max_log_bytes},
             {"max_output_bytes", c.experiment.limits.max_output_bytes},
             {"scratch_dir", c.sandbox.scratch_dir.string()}};
    j["truncation"] = json{{"max_lines", c.experiment.truncation.max_lines},
                           {"head_lines", c.experiment.truncation.head_lines},
                           {"tail_lines", c.experiment.truncation.tail_lines},
                           {"max_line_chars", c.experiment.truncation.max_line_chars},
                           {"elision_marker", c.experiment.truncation.elision_marker}};
    j["loop"] = json{{"no_improvement_budget", c.experiment.no_improvement_budget},
                     {"max_total_rounds", c.experiment.max_total_rounds}};
    j["compare"] = json{{"float_tolerance", c.experiment.compare.float_tolerance},
                        {"list_order", judge::to_string(c.experiment.compare.list_order)}};
    j["gateway"] = json{{"backend", to_string(c.backend)},
                        {"base_url", c.http.base_url},
                        {"path", c.http.path},
                        {"api_key_env", c.http.api_key_env},
                        {"auth_header", c.http.auth_header},
                        {"retry_attempts", c.http.retry_attempts},
                        {"retry_initial_backoff_ms", c.http.retry_initial_backoff.count()},
                        {"cache_dir", c.cache_dir.string()},
                        {"fixture", c.fixture.string()}};
    j["templates_dir"] = c.templates_dir.string();
    return j;
}

} // namespace printdbg::config
