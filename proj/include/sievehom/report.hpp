#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sievehom {

// Shortest round-trip decimal rendering, locale independent.
std::string format_double(double v);

// Rectangular table with a header row.  Cells are plain strings; numeric
// cells are rendered with format_double on write.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells);
};

// UTF-8, '.' decimal, comma separated, '\n' line ends, no quoting (cells
// must not contain commas or newlines; the writer rejects them).
std::string write_csv(const CsvTable& table);

// Parses everything write_csv emits; rejects ragged rows.
CsvTable read_csv(std::string_view text);

std::uint64_t fnv1a64(std::string_view data);

// Minimal static plot: polyline per series on a white canvas with axis
// ticks.  Log axes take base-10 logs of the data (values must be positive).
struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};
struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool logx = false;
    bool logy = false;
    std::vector<PlotSeries> series;
};
std::string render_svg(const PlotSpec& spec);

// Creates `dir` and collects everything written into a manifest of content
// hashes.  Rerunning a deterministic experiment must reproduce every file
// byte for byte, so the manifest lists fnv1a64 hashes to compare runs.
class ArtifactWriter {
  public:
    explicit ArtifactWriter(std::string dir);
    void write(const std::string& name, const std::string& content);
    // records a file another writer placed in the directory
    void add_existing(const std::string& name);
    // writes MANIFEST.txt (hash  name per line, emission order) and returns
    // its path
    std::string finalize(const std::vector<std::string>& comment_lines = {});
    const std::vector<std::string>& files() const { return names_; }
    const std::string& dir() const { return dir_; }

  private:
    std::string dir_;
    std::vector<std::string> names_;
    std::vector<std::uint64_t> hashes_;
    bool finalized_ = false;
};

}  // namespace sievehom
