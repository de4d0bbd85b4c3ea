#include <doctest.h>

#include <bit>
#include <fstream>
#include <limits>
#include <sstream>

#include "glu_ntk/io.hpp"
#include "glu_ntk/rng.hpp"
#include "test_support.hpp"

using namespace glu_ntk;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Minimal well-formedness check: balanced elements, quoted attributes,
// known entities, one root element.
bool well_formed_xml(const std::string& doc, std::string& why) {
    std::vector<std::string> stack;
    int roots = 0;
    std::size_t i = 0;
    auto is_name = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == ':' || c == '_'; };
    auto check_text = [&](std::size_t from, std::size_t to) {
        for (std::size_t k = from; k < to; ++k) {
            if (doc[k] != '&') continue;
            const std::size_t semi = doc.find(';', k);
            if (semi == std::string::npos || semi > to) return false;
            const std::string ent = doc.substr(k, semi - k + 1);
            if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") return false;
        }
        return true;
    };
    while (i < doc.size()) {
        const std::size_t lt = doc.find('<', i);
        if (!check_text(i, lt == std::string::npos ? doc.size() : lt)) return why = "bad entity", false;
        if (lt == std::string::npos) break;
        if (doc.compare(lt, 4, "<!--") == 0) {
            const std::size_t end = doc.find("-->", lt);
            if (end == std::string::npos) return why = "open comment", false;
            i = end + 3;
            continue;
        }
        if (doc.compare(lt, 2, "<?") == 0) {
            const std::size_t end = doc.find("?>", lt);
            if (end == std::string::npos) return why = "open declaration", false;
            i = end + 2;
            continue;
        }
        const bool closing = doc[lt + 1] == '/';
        std::size_t k = lt + (closing ? 2 : 1);
        const std::size_t name_start = k;
        while (k < doc.size() && is_name(doc[k])) ++k;
        const std::string name = doc.substr(name_start, k - name_start);
        if (name.empty()) return why = "empty tag name", false;
        bool self_closing = false;
        while (true) {
            while (k < doc.size() && std::isspace(static_cast<unsigned char>(doc[k]))) ++k;
            if (k >= doc.size()) return why = "unterminated tag", false;
            if (doc[k] == '>') break;
            if (doc[k] == '/' && k + 1 < doc.size() && doc[k + 1] == '>') {
                self_closing = true;
                ++k;
                break;
            }
            if (closing) return why = "attributes on closing tag", false;
            const std::size_t attr = k;
            while (k < doc.size() && is_name(doc[k])) ++k;
            if (k == attr || doc[k] != '=') return why = "bad attribute in <" + name + ">", false;
            const char q = doc[k + 1];
            if (q != '"' && q != '\'') return why = "unquoted attribute", false;
            const std::size_t end = doc.find(q, k + 2);
            if (end == std::string::npos || doc.substr(k + 2, end - k - 2).find('<') != std::string::npos)
                return why = "bad attribute value", false;
            if (!check_text(k + 2, end)) return why = "bad entity in attribute", false;
            k = end + 1;
        }
        if (closing) {
            if (stack.empty() || stack.back() != name) return why = "mismatched </" + name + ">", false;
            stack.pop_back();
        } else if (!self_closing) {
            if (stack.empty()) ++roots;
            stack.push_back(name);
        } else if (stack.empty()) {
            ++roots;
        }
        i = k + 1;
    }
    if (!stack.empty()) return why = "unclosed <" + stack.back() + ">", false;
    if (roots != 1) return why = "root count " + std::to_string(roots), false;
    return true;
}

}  // namespace

TEST_CASE("shortest round-trip doubles") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e300) == "1e+300");
    CHECK(format_double(-0.0) == "-0");
    CHECK(std::isnan(parse_double(format_double(std::nan("")))));
    CHECK(parse_double(format_double(std::numeric_limits<double>::infinity())) == std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(parse_double("1.5x"), FormatError);
    CHECK_THROWS_AS(parse_double(""), FormatError);

    Rng rng(3);
    for (int i = 0; i < 100000; ++i) {
        double v = std::bit_cast<double>(rng.raw());
        if (!std::isfinite(v)) continue;
        CHECK(std::bit_cast<std::uint64_t>(parse_double(format_double(v))) == std::bit_cast<std::uint64_t>(v));
    }
    const double sub = std::numeric_limits<double>::denorm_min();
    CHECK(parse_double(format_double(sub)) == sub);
}

TEST_CASE("csv round trip") {
    auto dir = test_support::scratch_dir("csv");
    CsvTable t{"demo.v1", {"name", "value"}, {}};
    t.add({"plain", format_double(1.0 / 3.0)});
    t.add({"with,comma", format_double(-2.5e-310)});
    t.add({"say \"hi\"", format_double(6.02214076e23)});
    t.add({"two\nlines", format_double(0.0)});
    write_csv(dir / "t.csv", t);

    const std::string text = slurp(dir / "t.csv");
    CHECK(text.rfind("# schema: demo.v1", 0) == 0);
    CHECK(text.find("\"with,comma\"") != std::string::npos);
    CHECK(text.find("\"say \"\"hi\"\"\"") != std::string::npos);

    CsvTable back = read_csv(dir / "t.csv");
    CHECK(back.schema == "demo.v1");
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    auto vals = back.numeric_column("value");
    CHECK(vals[0] == 1.0 / 3.0);
    CHECK(vals[1] == -2.5e-310);
    CHECK_THROWS_AS(back.column("missing"), FormatError);
    CHECK_THROWS_AS(t.add({"short"}), DimensionError);
    CHECK_THROWS_AS(read_csv(dir / "absent.csv"), IoError);
}

TEST_CASE("svg charts are well-formed") {
    auto dir = test_support::scratch_dir("svg");
    PlotLabels labels{"loss <plain> & \"gated\"", "step", "loss", false, true};
    Series a{"plain & co", {0, 1, 2, 3}, {1.0, 0.5, 0.25, 0.125}};
    Series b{"gated", {0, 1, 2, 3}, {2.0, 0.4, 0.1, 0.01}};
    write_svg_lines(dir / "lines.svg", labels, {a, b});
    write_svg_scatter(dir / "scatter.svg", PlotLabels{"gap", "train", "gap", true, false}, {a, b});
    write_svg_lines(dir / "empty.svg", PlotLabels{"nothing", "x", "y"}, {});
    for (const char* name : {"lines.svg", "scatter.svg", "empty.svg"}) {
        std::string why;
        CHECK_MESSAGE(well_formed_xml(slurp(dir / name), why), name << ": " << why);
    }
    const std::string lines = slurp(dir / "lines.svg");
    CHECK(lines.find("<svg") != std::string::npos);
    CHECK(lines.find("&amp;") != std::string::npos);
    CHECK(lines.find("step") != std::string::npos);

    std::string why;
    CHECK_FALSE(well_formed_xml("<svg><g></svg>", why));
    CHECK_FALSE(well_formed_xml("<svg a=1></svg>", why));
}

TEST_CASE("manifest round trip") {
    auto dir = test_support::scratch_dir("manifest");
    RunManifest m;
    m.command_line = {"glu-ntk", "spectrum", "-n", "8"};
    m.config = {{"n", 8}, {"arch", "plain"}};
    m.seeds = {{"master", 7}, {"spectrum-data", 18446744073709551615ull}};
    m.version = library_version();
    m.duration_seconds = 1.25;
    m.outputs = {"spectrum.csv"};
    m.tolerances = {{"solver", 1e-10}};
    m.schemas = {{"spectrum.csv", "spectrum.v1"}};
    m.results = {{"kappa", 3.5}};
    write_manifest(dir / "manifest.json", m);

    RunManifest back = read_manifest(dir / "manifest.json");
    CHECK(back.command_line == m.command_line);
    CHECK(back.seeds == m.seeds);
    CHECK(back.version == m.version);
    CHECK(back.outputs == m.outputs);
    CHECK(back.tolerances == m.tolerances);
    CHECK(back.schemas == m.schemas);
    CHECK(back.config == m.config);
    CHECK(back.results == m.results);
    CHECK(back.duration_seconds == 1.25);
    CHECK_FALSE(library_version().empty());
}
