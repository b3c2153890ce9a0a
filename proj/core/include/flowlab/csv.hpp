#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace flowlab {

// Shortest decimal string that round-trips the exact f64 value.
std::string format_double(double v);
std::string format_int(std::int64_t v);

// Quotes a cell per RFC 4180 when it contains commas, quotes or newlines.
std::string csv_escape(const std::string& cell);

// RFC-4180 output: comma separated, CRLF line endings, mandatory header.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& cells);
    void flush() { out_.flush(); }

  private:
    void write_line(const std::vector<std::string>& cells);

    std::ofstream out_;
    std::size_t width_ = 0;
    std::string path_;
};

// Parses a full RFC-4180 file (quoted fields, embedded newlines) including
// the header row.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace flowlab
