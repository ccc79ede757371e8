#include "printdbg/corpus.hpp"

#include "printdbg/errors.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace printdbg::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Level level) {
    switch (level) {
    case Level::easy: return "easy";
    case Level::medium: return "medium";
    case Level::hard: return "hard";
    }
    return "easy";
}

Level level_from_string(const std::string& s) {
    if (s == "easy") return Level::easy;
    if (s == "medium") return Level::medium;
    if (s == "hard") return Level::hard;
    throw CorpusError("unknown level: '" + s + "' (expected easy, medium, or hard)");
}

std::string to_string(CaseOrigin origin) {
    return origin == CaseOrigin::example ? "example" : "oracle_derived";
}

CaseOrigin case_origin_from_string(const std::string& s) {
    if (s == "example") return CaseOrigin::example;
    if (s == "oracle_derived") return CaseOrigin::oracle_derived;
    throw CorpusError("unknown test case origin: '" + s + "'");
}

ValidationReport validate_problem(const Problem& p) {
    ValidationReport report;
    auto add = [&](std::string msg) { report.findings.push_back(std::move(msg)); };

    if (p.id.empty()) {
        add("id must be non-empty");
    }
    if (p.function_signature.function_name.empty()) {
        add("function_name must be non-empty");
    }
    {
        std::set<std::string> names;
        for (const auto& param : p.function_signature.parameters) {
            if (!names.insert(param.name).second) {
                add("duplicate parameter name '" + param.name + "'");
            }
        }
    }
    if (p.examples.empty()) {
        add("examples must be non-empty");
    }
    const std::size_t arity = p.function_signature.arity();
    for (std::size_t i = 0; i < p.examples.size(); ++i) {
        if (p.examples[i].input.size() != arity) {
            std::ostringstream os;
            os << "example " << i << ": input arity " << p.examples[i].input.size()
               << " does not match signature arity " << arity;
            add(os.str());
        }
    }
    for (std::size_t i = 0; i < p.test_cases.size(); ++i) {
        const auto& tc = p.test_cases[i];
        if (tc.input.size() != arity) {
            std::ostringstream os;
            os << "test case " << i << ": input arity " << tc.input.size()
               << " does not match signature arity " << arity;
            add(os.str());
        }
        if (tc.expected_output.is_null()) {
            std::ostringstream os;
            os << "test case " << i << ": expected_output must be non-null";
            add(os.str());
        }
    }
    for (std::size_t i = 0; i < p.extra_inputs.size(); ++i) {
        if (p.extra_inputs[i].size() != arity) {
            std::ostringstream os;
            os << "extra input " << i << ": arity " << p.extra_inputs[i].size()
               << " does not match signature arity " << arity;
            add(os.str());
        }
    }
    if (p.reference_solution.empty()) {
        add("reference_solution must be non-empty");
    }
    return report;
}

namespace {

std::vector<StructuredValue> value_list(const json& j) {
    std::vector<StructuredValue> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        out.push_back(v);
    }
    return out;
}

json source_to_json(const SourceCode& code) {
    return json{{"language_tag", code.language_tag}, {"lines", code.lines}};
}

SourceCode source_from_json(const json& j) {
    SourceCode code;
    code.language_tag = j.at("language_tag").get<std::string>();
    code.lines = j.at("lines").get<std::vector<std::string>>();
    return code;
}

json compare_to_json(const judge::ComparePolicy& policy) {
    return json{{"float_tolerance", policy.float_tolerance},
                {"list_order", judge::to_string(policy.list_order)}};
}

judge::ComparePolicy compare_from_json(const json& j) {
    judge::ComparePolicy policy;
    if (j.contains("float_tolerance")) {
        policy.float_tolerance = j.at("float_tolerance").get<double>();
    }
    if (j.contains("list_order")) {
        policy.list_order = judge::list_order_from_string(j.at("list_order").get<std::string>());
    }
    return policy;
}

} // namespace

json problem_to_json(const Problem& p) {
    json j;
    j["id"] = p.id;
    j["url"] = p.url;
    j["released_time"] = p.released_time;
    j["level"] = to_string(p.level);
    j["title"] = p.title;
    j["description"] = p.description;
    j["examples"] = json::array();
    for (const auto& ex : p.examples) {
        json je{{"input", ex.input}, {"expected_output", ex.expected_output}};
        if (ex.explanation) {
            je["explanation"] = *ex.explanation;
        }
        j["examples"].push_back(std::move(je));
    }
    j["constraints"] = p.constraints;
    json params = json::array();
    for (const auto& param : p.function_signature.parameters) {
        params.push_back(json{{"name", param.name}, {"type", param.type}});
    }
    j["function_signature"] = json{{"function_name", p.function_signature.function_name},
                                   {"parameters", std::move(params)},
                                   {"return_type", p.function_signature.return_type}};
    j["reference_solution"] = source_to_json(p.reference_solution);
    j["test_cases"] = json::array();
    for (const auto& tc : p.test_cases) {
        j["test_cases"].push_back(json{{"input", tc.input},
                                       {"expected_output", tc.expected_output},
                                       {"origin", to_string(tc.origin)}});
    }
    if (!p.extra_inputs.empty()) {
        j["extra_inputs"] = p.extra_inputs;
    }
    if (p.compare_override) {
        j["compare"] = compare_to_json(*p.compare_override);
    }
    if (!p.metadata.is_null()) {
        j["metadata"] = p.metadata;
    }
    return j;
}

Problem problem_from_json(const json& j, const std::string& origin_hint) {
    auto fail = [&](const std::string& field, const std::string& why) -> CorpusError {
        return CorpusError(origin_hint + ": field '" + field + "': " + why);
    };
    Problem p;
    try {
        p.id = j.at("id").get<std::string>();
    } catch (const json::exception& e) {
        throw fail("id", e.what());
    }
    try {
        p.url = j.value("url", std::string{});
        p.released_time = j.value("released_time", std::string{});
        p.level = level_from_string(j.at("level").get<std::string>());
        p.title = j.value("title", std::string{});
        p.description = j.at("description").get<std::string>();
        p.constraints = j.value("constraints", std::string{});

        const json& sig = j.at("function_signature");
        p.function_signature.function_name = sig.at("function_name").get<std::string>();
        for (const auto& param : sig.at("parameters")) {
            p.function_signature.parameters.push_back(
                {param.at("name").get<std::string>(), param.value("type", std::string{})});
        }
        p.function_signature.return_type = sig.value("return_type", std::string{});

        for (const auto& je : j.at("examples")) {
            Example ex;
            ex.input = value_list(je.at("input"));
            ex.expected_output = je.at("expected_output");
            if (je.contains("explanation")) {
                ex.explanation = je.at("explanation").get<std::string>();
            }
            p.examples.push_back(std::move(ex));
        }

        p.reference_solution = source_from_json(j.at("reference_solution"));

        if (j.contains("test_cases")) {
            for (const auto& jc : j.at("test_cases")) {
                TestCase tc;
                tc.input = value_list(jc.at("input"));
                tc.expected_output = jc.at("expected_output");
                tc.origin = case_origin_from_string(jc.value("origin", "example"));
                p.test_cases.push_back(std::move(tc));
            }
        }
        if (p.test_cases.empty()) {
            // judge-ready cases default to the published examples
            for (const auto& ex : p.examples) {
                p.test_cases.push_back({ex.input, ex.expected_output, CaseOrigin::example});
            }
        }

        if (j.contains("extra_inputs")) {
            for (const auto& ji : j.at("extra_inputs")) {
                p.extra_inputs.push_back(value_list(ji));
            }
        }
        if (j.contains("compare")) {
            p.compare_override = compare_from_json(j.at("compare"));
        }
        if (j.contains("metadata")) {
            p.metadata = j.at("metadata");
        }
    } catch (const CorpusError&) {
        throw;
    } catch (const json::exception& e) {
        throw CorpusError(origin_hint + ": " + e.what());
    }

    ValidationReport report = validate_problem(p);
    if (!report.ok()) {
        std::string msg = origin_hint + ": problem '" + p.id + "' invalid:";
        for (const auto& finding : report.findings) {
            msg += "\n  - " + finding;
        }
        throw CorpusError(msg);
    }
    return p;
}

std::vector<Problem> load_corpus(const fs::path& dir) {
    if (!fs::exists(dir)) {
        throw CorpusError("corpus path does not exist: " + dir.string());
    }
    if (!fs::is_directory(dir)) {
        throw CorpusError("corpus path is not a directory: " + dir.string());
    }
    std::vector<Problem> problems;
    std::set<std::string> seen;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") {
            continue;
        }
        if (entry.path().filename() == "manifest.json") {
            continue;
        }
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) {
            throw CorpusError("cannot open corpus file: " + file.string());
        }
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw CorpusError(file.string() + ": " + e.what());
        }
        Problem p = problem_from_json(j, file.string());
        if (!seen.insert(p.id).second) {
            throw CorpusError("duplicate problem id '" + p.id + "' in " + file.string());
        }
        problems.push_back(std::move(p));
    }
    std::sort(problems.begin(), problems.end(),
              [](const Problem& a, const Problem& b) { return a.id < b.id; });
    return problems;
}

void save_problem(const Problem& p, const fs::path& file) {
    std::ofstream out(file);
    if (!out) {
        throw CorpusError("cannot write corpus file: " + file.string());
    }
    out << problem_to_json(p).dump(2) << '\n';
}

void save_corpus(const std::vector<Problem>& problems, const fs::path& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["problems"] = json::array();
    for (const auto& p : problems) {
        save_problem(p, dir / (p.id + ".json"));
        manifest["problems"].push_back(json{{"id", p.id}, {"level", to_string(p.level)}});
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) {
        throw CorpusError("cannot write manifest in " + dir.string());
    }
    out << manifest.dump(2) << '\n';
}

} // namespace printdbg::corpus
