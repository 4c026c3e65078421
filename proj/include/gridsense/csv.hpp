#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsense::csv {

// Writer with one fixed float format so identical inputs yield byte-identical
// files. Every file starts with a provenance comment line.
class Writer {
 public:
  Writer(const std::string& path, const std::string& provenance) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    out_ << "# " << provenance << "\n";
  }

  void header(const std::string& line) { out_ << line << "\n"; }

  Writer& field(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  Writer& field(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return field(std::string(buf));
  }
  Writer& field(long v) { return field(std::to_string(v)); }
  Writer& field(int v) { return field(std::to_string(v)); }
  void endrow() {
    out_ << "\n";
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ",";
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Reads a numeric CSV; '#' comment lines are skipped. Errors carry 1-based
// line numbers.
Table read_numeric(const std::string& path);

}  // namespace gridsense::csv
