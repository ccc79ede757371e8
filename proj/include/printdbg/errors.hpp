#pragma once

#include <stdexcept>
#include <string>

namespace printdbg {

// Corpus files missing, malformed, or violating problem invariants.
struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Prompt template missing a placeholder binding or asset file.
struct TemplateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model backend failure: replay miss, transport exhaustion, provider error.
struct GatewayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Infrastructure failure not attributable to the candidate solution
// (missing runtime, codec failure, unwritable scratch space).
struct HarnessFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace printdbg
