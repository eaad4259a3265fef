#include "sievehom/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sievehom/util.hpp"

namespace sievehom {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }

namespace {

void check_cell(const std::string& c) {
    require(c.find_first_of(",\n\r") == std::string::npos,
            "csv: cell may not contain commas or line breaks");
}

void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        check_cell(cells[i]);
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
}

}  // namespace

std::string write_csv(const CsvTable& table) {
    require(!table.header.empty(), "csv: missing header");
    std::string out;
    append_line(out, table.header);
    for (const auto& row : table.rows) {
        require(row.size() == table.header.size(), "csv: ragged row");
        append_line(out, row);
    }
    return out;
}

CsvTable read_csv(std::string_view text) {
    CsvTable table;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() && pos >= text.size()) break;
        std::vector<std::string> cells;
        std::size_t f = 0;
        for (;;) {
            std::size_t c = line.find(',', f);
            if (c == std::string_view::npos) {
                cells.emplace_back(line.substr(f));
                break;
            }
            cells.emplace_back(line.substr(f, c - f));
            f = c + 1;
        }
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            require(cells.size() == table.header.size(), "csv: ragged row");
            table.rows.push_back(std::move(cells));
        }
    }
    require(!first, "csv: empty input");
    return table;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

constexpr double kW = 640.0, kH = 480.0;
constexpr double kL = 72.0, kR = 24.0, kT = 44.0, kB = 56.0;
constexpr const char* kColors[] = {"#1f5fa8", "#c23b22", "#2e7d32", "#7b1fa2", "#e69500"};

struct AxisMap {
    double lo = 0.0, hi = 1.0;
    bool log = false;

    double t(double v) const { return log ? std::log10(v) : v; }
    // normalized position in [0, 1]
    double pos(double v) const { return (t(v) - lo) / (hi - lo); }
};

AxisMap fit_axis(const PlotSpec& spec, bool is_x) {
    AxisMap m;
    m.log = is_x ? spec.logx : spec.logy;
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto& s : spec.series) {
        const auto& v = is_x ? s.x : s.y;
        for (double value : v) {
            require(!m.log || value > 0.0, "plot: log axis requires positive data");
            const double t = m.log ? std::log10(value) : value;
            if (!any) {
                lo = hi = t;
                any = true;
            } else {
                lo = std::min(lo, t);
                hi = std::max(hi, t);
            }
        }
    }
    if (!any) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    m.lo = lo - pad;
    m.hi = hi + pad;
    return m;
}

std::vector<double> ticks_for(const AxisMap& m) {
    const double range = m.hi - m.lo;
    double step = std::pow(10.0, std::floor(std::log10(range / 4.0)));
    if (range / step > 8.0) step *= 2.0;
    if (range / step > 8.0) step *= 2.5;
    if (m.log && step < 1.0) step = 1.0;  // decades only
    std::vector<double> out;
    for (double t = std::ceil(m.lo / step) * step; t <= m.hi + 1e-12; t += step)
        out.push_back(t);
    return out;
}

std::string tick_label(double t, bool log) {
    if (!log) return format_double(std::abs(t) < 1e-12 ? 0.0 : t);
    return "1e" + format_double(t);
}

void xml_escape(std::string& out, const std::string& s) {
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    const AxisMap ax = fit_axis(spec, true);
    const AxisMap ay = fit_axis(spec, false);
    auto X = [&](double v) { return kL + ax.pos(v) * (kW - kL - kR); };
    auto Y = [&](double v) { return kH - kB - ay.pos(v) * (kH - kT - kB); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
    s += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    s += "<rect x=\"" + format_double(kL) + "\" y=\"" + format_double(kT) + "\" width=\"" +
         format_double(kW - kL - kR) + "\" height=\"" + format_double(kH - kT - kB) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (double t : ticks_for(ax)) {
        const double px = kL + (t - ax.lo) / (ax.hi - ax.lo) * (kW - kL - kR);
        s += "<line x1=\"" + format_double(px) + "\" y1=\"" + format_double(kH - kB) +
             "\" x2=\"" + format_double(px) + "\" y2=\"" + format_double(kH - kB + 5) +
             "\" stroke=\"#444\"/>\n";
        s += "<text x=\"" + format_double(px) + "\" y=\"" + format_double(kH - kB + 18) +
             "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"monospace\">" +
             tick_label(t, ax.log) + "</text>\n";
    }
    for (double t : ticks_for(ay)) {
        const double py = kH - kB - (t - ay.lo) / (ay.hi - ay.lo) * (kH - kT - kB);
        s += "<line x1=\"" + format_double(kL - 5) + "\" y1=\"" + format_double(py) +
             "\" x2=\"" + format_double(kL) + "\" y2=\"" + format_double(py) +
             "\" stroke=\"#444\"/>\n";
        s += "<text x=\"" + format_double(kL - 8) + "\" y=\"" + format_double(py + 4) +
             "\" font-size=\"11\" text-anchor=\"end\" font-family=\"monospace\">" +
             tick_label(t, ay.log) + "</text>\n";
    }

    int color = 0;
    for (const auto& series : spec.series) {
        require(series.x.size() == series.y.size(), "plot: series length mismatch");
        if (series.x.empty()) continue;
        std::string pts;
        for (std::size_t i = 0; i < series.x.size(); ++i) {
            if (i) pts += ' ';
            pts += format_double(X(series.x[i])) + "," + format_double(Y(series.y[i]));
        }
        const char* c = kColors[color % 5];
        s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + c +
             "\" stroke-width=\"1.5\"/>\n";
        for (std::size_t i = 0; i < series.x.size(); ++i)
            s += "<circle cx=\"" + format_double(X(series.x[i])) + "\" cy=\"" +
                 format_double(Y(series.y[i])) + "\" r=\"2.5\" fill=\"" + c + "\"/>\n";
        std::string label;
        xml_escape(label, series.label);
        s += "<text x=\"" + format_double(kW - kR - 6) + "\" y=\"" +
             format_double(kT + 16 + 14 * color) +
             "\" font-size=\"11\" text-anchor=\"end\" font-family=\"monospace\" fill=\"" + c +
             "\">" + label + "</text>\n";
        ++color;
    }

    std::string title, xlab, ylab;
    xml_escape(title, spec.title);
    xml_escape(xlab, spec.xlabel);
    xml_escape(ylab, spec.ylabel);
    s += "<text x=\"320\" y=\"24\" font-size=\"14\" text-anchor=\"middle\" "
         "font-family=\"monospace\">" +
         title + "</text>\n";
    s += "<text x=\"" + format_double((kL + kW - kR) / 2.0) + "\" y=\"" +
         format_double(kH - 12) +
         "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"monospace\">" + xlab +
         "</text>\n";
    s += "<text x=\"16\" y=\"" + format_double((kT + kH - kB) / 2.0) +
         "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"monospace\" "
         "transform=\"rotate(-90 16 " +
         format_double((kT + kH - kB) / 2.0) + ")\">" + ylab + "</text>\n";
    s += "</svg>\n";
    return s;
}

ArtifactWriter::ArtifactWriter(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

void ArtifactWriter::write(const std::string& name, const std::string& content) {
    require(!finalized_, "artifacts: writer already finalized");
    require(name.find('/') == std::string::npos && name.find("..") == std::string::npos,
            "artifacts: plain file names only");
    const auto path = std::filesystem::path(dir_) / name;
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "artifacts: cannot open " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(static_cast<bool>(out), "artifacts: short write to " + path.string());
    names_.push_back(name);
    hashes_.push_back(fnv1a64(content));
}

void ArtifactWriter::add_existing(const std::string& name) {
    require(!finalized_, "artifacts: writer already finalized");
    const auto path = std::filesystem::path(dir_) / name;
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "artifacts: cannot read back " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    names_.push_back(name);
    hashes_.push_back(fnv1a64(content));
}

std::string ArtifactWriter::finalize(const std::vector<std::string>& comment_lines) {
    require(!finalized_, "artifacts: writer already finalized");
    finalized_ = true;
    std::string text;
    for (const auto& line : comment_lines) text += "# " + line + "\n";
    for (std::size_t i = 0; i < names_.size(); ++i) {
        char hex[17];
        for (int j = 0; j < 16; ++j)
            hex[15 - j] = "0123456789abcdef"[(hashes_[i] >> (4 * j)) & 0xf];
        hex[16] = '\0';
        text += std::string(hex) + "  " + names_[i] + "\n";
    }
    const auto path = std::filesystem::path(dir_) / "MANIFEST.txt";
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "artifacts: cannot open " + path.string());
    out << text;
    return path.string();
}

}  // namespace sievehom
