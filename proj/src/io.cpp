#include "glu_ntk/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace glu_ntk {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
    return v;
}

void CsvTable::add(CsvRow row) {
    if (!header.empty() && row.size() != header.size()) {
        throw DimensionError("CSV row has " + std::to_string(row.size()) + " fields, header has " +
                             std::to_string(header.size()));
    }
    rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(parse_double(r[c]));
    return out;
}

namespace {

std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_row(std::ostream& out, const CsvRow& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << quote(row[i]);
    }
    out << "\r\n";
}

// Parses one record starting at pos; advances pos past the line break.
CsvRow parse_record(const std::string& text, std::size_t& pos) {
    CsvRow row;
    std::string field;
    bool quoted = false;
    while (pos < text.size()) {
        const char c = text[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field += '"';
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            ++pos;
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
            ++pos;
            row.push_back(std::move(field));
            return row;
        } else {
            field += c;
        }
        ++pos;
    }
    if (quoted) throw FormatError("CSV ends inside a quoted field");
    row.push_back(std::move(field));
    return row;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# schema: " << table.schema << "\r\n";
    write_row(out, table.header);
    for (const auto& r : table.rows) write_row(out, r);
    if (!out) throw IoError("write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    CsvTable table;
    std::size_t pos = 0;
    const std::string tag = "# schema: ";
    if (text.compare(0, tag.size(), tag) != 0) throw FormatError(path.string() + ": missing schema line");
    const std::size_t eol = text.find_first_of("\r\n");
    table.schema = text.substr(tag.size(), eol - tag.size());
    pos = eol;
    if (pos < text.size() && text[pos] == '\r') ++pos;
    if (pos < text.size() && text[pos] == '\n') ++pos;
    if (pos >= text.size()) throw FormatError(path.string() + ": missing header");
    table.header = parse_record(text, pos);
    while (pos < text.size()) table.add(parse_record(text, pos));
    return table;
}

// ---- SVG ------------------------------------------------------------------

namespace {

constexpr double kWidth = 720, kHeight = 440, kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string tick_label(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;

    double map(double v) const {
        const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
        return std::clamp(t, -0.05, 1.05);
    }
    double value_at(double t) const {
        const double v = lo + t * (hi - lo);
        return log ? std::pow(10.0, v) : v;
    }
};

Axis fit_axis(const std::vector<Series>& series, bool use_y, bool log) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : series) {
        for (double v : use_y ? s.y : s.x) {
            if (!std::isfinite(v) || (log && v <= 0.0)) continue;
            const double t = log ? std::log10(v) : v;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi, log};
}

void write_svg(const std::filesystem::path& path, const PlotLabels& labels, const std::vector<Series>& series,
               bool markers) {
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw DimensionError("series '" + s.name + "' has mismatched x/y lengths");
    }
    const Axis ax = fit_axis(series, false, labels.log_x);
    const Axis ay = fit_axis(series, true, labels.log_y);
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + ax.map(v) * pw; };
    auto py = [&](double v) { return kTop + (1.0 - ay.map(v)) * ph; };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(labels.title) << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double t = i / 4.0;
        const double gx = kLeft + t * pw, gy = kTop + (1.0 - t) * ph;
        o << "<text x=\"" << gx << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
          << tick_label(ax.value_at(t)) << "</text>\n"
          << "<text x=\"" << kLeft - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">"
          << tick_label(ay.value_at(t)) << "</text>\n";
    }
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">"
      << xml_escape(labels.x_label) << (labels.log_x ? " (log)" : "") << "</text>\n"
      << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(labels.y_label) << (labels.log_y ? " (log)" : "") << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % std::size(kPalette)];
        if (markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << color
                  << "\" fill-opacity=\"0.7\"/>\n";
            }
        } else {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                if ((labels.log_x && s.x[i] <= 0) || (labels.log_y && s.y[i] <= 0)) continue;
                o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            }
            o << "\"/>\n";
        }
        const double ly = kTop + 14 + 18.0 * static_cast<double>(si);
        o << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"10\" fill=\""
          << color << "\"/>\n"
          << "<text x=\"" << kWidth - kRight + 30 << "\" y=\"" << ly << "\">" << xml_escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << o.str();
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void write_svg_lines(const std::filesystem::path& path, const PlotLabels& labels, const std::vector<Series>& series) {
    write_svg(path, labels, series, false);
}

void write_svg_scatter(const std::filesystem::path& path, const PlotLabels& labels,
                       const std::vector<Series>& groups) {
    write_svg(path, labels, groups, true);
}

// ---- manifest -------------------------------------------------------------

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["command_line"] = command_line;
    j["config"] = config;
    j["seeds"] = seeds;
    j["version"] = version;
    j["duration_seconds"] = duration_seconds;
    j["outputs"] = outputs;
    j["tolerances"] = tolerances;
    j["schemas"] = schemas;
    j["results"] = results;
    return j;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << manifest.to_json().dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    RunManifest m;
    m.command_line = j.at("command_line").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.version = j.at("version").get<std::string>();
    m.duration_seconds = j.at("duration_seconds").get<double>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
    m.schemas = j.value("schemas", std::map<std::string, std::string>{});
    m.results = j.value("results", nlohmann::json::object());
    return m;
}

std::string library_version() {
    return GLU_NTK_VERSION;
}

}  // namespace glu_ntk
