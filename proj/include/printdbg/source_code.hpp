#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace printdbg {

/// A candidate solution as an ordered sequence of lines. Lines never contain
/// a line terminator; text() joined with '\n' reconstructs the exact source.
struct SourceCode {
    std::vector<std::string> lines;
    std::string language_tag{"python3"};

    static SourceCode from_text(std::string_view text,
                                std::string language_tag = "python3");

    std::string text() const;
    bool empty() const { return lines.empty(); }

    bool operator==(const SourceCode&) const = default;
};

} // namespace printdbg
