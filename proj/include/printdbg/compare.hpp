#pragma once

#include "printdbg/values.hpp"

#include <string>

namespace printdbg::judge {

enum class ListOrder { ordered, unordered };

std::string to_string(ListOrder order);
ListOrder list_order_from_string(const std::string& s);

/// How the judge decides whether an actual value matches the expected one.
/// Most problems use the defaults; a corpus file may override per problem.
struct ComparePolicy {
    double float_tolerance{1e-6};
    ListOrder list_order{ListOrder::ordered};

    bool operator==(const ComparePolicy&) const = default;
};

/// Deep structural equality. Numeric leaves compare within float_tolerance
/// when either side is a float; lists compare as multisets at every nesting
/// level when list_order is unordered.
bool compare_values(const StructuredValue& actual, const StructuredValue& expected,
                    const ComparePolicy& policy);

} // namespace printdbg::judge
