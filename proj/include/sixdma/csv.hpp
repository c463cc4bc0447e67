#ifndef SIXDMA_CSV_HPP
#define SIXDMA_CSV_HPP

#include <complex>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sixdma {

// CSV emission with a mandatory header line naming columns (and units where
// they apply). Numbers are formatted with %.12g so identical doubles always
// serialize to identical bytes.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
        ncols_ = columns.size();
    }

    void comment(const std::string& text) { out_ << "# " << text << '\n'; }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return buf;
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != ncols_) throw std::runtime_error("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& cells) {
        std::vector<std::string> s;
        s.reserve(cells.size());
        for (double v : cells) s.push_back(fmt(v));
        row(s);
    }

  private:
    std::ofstream out_;
    std::size_t ncols_ = 0;
};

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    double number(std::size_t r, const std::string& col) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == col) return std::stod(rows.at(r).at(c));
        throw std::runtime_error("csv column not found: " + col);
    }
};

// Schema parser for the files CsvWriter emits; comment lines start with '#'.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open csv: " + path);
    CsvTable t;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (header) {
            t.columns = cells;
            header = false;
        } else {
            if (cells.size() != t.columns.size()) throw std::runtime_error("csv row width mismatch in " + path);
            t.rows.push_back(cells);
        }
    }
    if (header) throw std::runtime_error("csv missing header: " + path);
    return t;
}

} // namespace sixdma

#endif
