#pragma once

#include "printdbg/gateway.hpp"
#include "printdbg/orchestrator.hpp"
#include "printdbg/sandbox.hpp"

#include <filesystem>
#include <string>

namespace printdbg::config {

enum class BackendKind { http, record, replay };

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

/// Everything that drives a run, loadable from one JSON file. Defaults match
/// the documented experiment setup; a config file overrides field by field.
struct HarnessConfig {
    orchestrator::ExperimentConfig experiment;
    sandbox::SandboxConfig sandbox;

    BackendKind backend{BackendKind::replay};
    gateway::HttpBackendConfig http;
    std::filesystem::path cache_dir;  // empty disables the cache
    std::filesystem::path fixture;    // replay source / record sink
    std::filesystem::path templates_dir{"assets/templates"};
};

HarnessConfig default_config();
HarnessConfig load_config(const std::filesystem::path& file);
HarnessConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const HarnessConfig& c);

} // namespace printdbg::config
