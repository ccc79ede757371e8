#pragma once

#include "json.hpp"

namespace printdbg {

/// Recursive value model shared by corpus files, the judge, and the sandbox
/// return channel: null, boolean, integer, float, string, array, object.
/// JSON is the storage format, so values round-trip losslessly through it.
using StructuredValue = nlohmann::json;

} // namespace printdbg
