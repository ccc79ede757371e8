#include "printdbg/compare.hpp"

#include "printdbg/errors.hpp"

#include <cmath>
#include <vector>

namespace printdbg::judge {

std::string to_string(ListOrder order) {
    return order == ListOrder::ordered ? "ordered" : "unordered";
}

ListOrder list_order_from_string(const std::string& s) {
    if (s == "ordered") return ListOrder::ordered;
    if (s == "unordered") return ListOrder::unordered;
    throw ConfigError("unknown list_order: " + s);
}

namespace {

bool is_number(const StructuredValue& v) {
    return v.is_number_integer() || v.is_number_unsigned() || v.is_number_float();
}

bool numbers_equal(const StructuredValue& a, const StructuredValue& b, double tolerance) {
    if (a.is_number_float() || b.is_number_float()) {
        return std::abs(a.get<double>() - b.get<double>()) <= tolerance;
    }
    // both integral: exact
    return a.get<long long>() == b.get<long long>();
}

bool equal(const StructuredValue& a, const StructuredValue& b, const ComparePolicy& policy);

bool lists_equal_unordered(const StructuredValue& a, const StructuredValue& b,
                           const ComparePolicy& policy) {
    if (a.size() != b.size()) {
        return false;
    }
    // greedy multiset matching; tolerance makes sorting unreliable
    std::vector<bool> used(b.size(), false);
    for (const auto& x : a) {
        bool matched = false;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (!used[j] && equal(x, b[j], policy)) {
                used[j] = true;
                matched = true;
                break;
            }
        }
        if (!matched) {
            return false;
        }
    }
    return true;
}

bool equal(const StructuredValue& a, const StructuredValue& b, const ComparePolicy& policy) {
    if (is_number(a) && is_number(b)) {
        return numbers_equal(a, b, policy.float_tolerance);
    }
    if (a.type() != b.type()) {
        return false;
    }
    switch (a.type()) {
    case nlohmann::json::value_t::array:
        if (policy.list_order == ListOrder::unordered) {
            return lists_equal_unordered(a, b, policy);
        }
        if (a.size() != b.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!equal(a[i], b[i], policy)) {
                return false;
            }
        }
        return true;
    case nlohmann::json::value_t::object: {
        if (a.size() != b.size()) {
            return false;
        }
        for (auto it = a.begin(); it != a.end(); ++it) {
            auto found = b.find(it.key());
            if (found == b.end() || !equal(it.value(), found.value(), policy)) {
                return false;
            }
        }
        return true;
    }
    default:
        return a == b;
    }
}

} // namespace

bool compare_values(const StructuredValue& actual, const StructuredValue& expected,
                    const ComparePolicy& policy) {
    return equal(actual, expected, policy);
}

} // namespace printdbg::judge
