#include "printdbg/source_code.hpp"

namespace printdbg {

SourceCode SourceCode::from_text(std::string_view text, std::string language_tag) {
    SourceCode code;
    code.language_tag = std::move(language_tag);
    if (text.empty()) {
        return code;
    }
    std::size_t start = 0;
    while (true) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            code.lines.emplace_back(text.substr(start));
            break;
        }
        code.lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
        if (start == text.size()) {
            // keep the trailing empty segment so join() round-trips exactly
            code.lines.emplace_back();
            break;
        }
    }
    return code;
}

std::string SourceCode::text() const {
    std::string out;
    std::size_t total = 0;
    for (const auto& line : lines) {
        total += line.size() + 1;
    }
    out.reserve(total);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) {
            out.push_back('\n');
        }
        out += lines[i];
    }
    return out;
}

} // namespace printdbg
