#include "flowlab/csv.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include "flowlab/errors.hpp"

namespace flowlab {

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int(std::int64_t v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& cell) {
    const bool needs_quotes = cell.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), width_(header.size()), path_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    if (header.empty()) throw std::invalid_argument("csv header must be nonempty");
    write_line(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) {
        throw std::invalid_argument("csv row width " + std::to_string(cells.size()) +
                                    " != header width " + std::to_string(width_));
    }
    write_line(cells);
}

void CsvWriter::write_line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(cells[i]);
    }
    out_ << "\r\n";
    if (!out_) throw IoError("write failed: " + path_);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    std::size_t i = 0;
    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < text.size()) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            end_row();
            ++i;
        } else if (c == '\n') {  // tolerate bare LF on read
            end_row();
        } else {
            cell += c;
        }
        ++i;
    }
    if (quoted) throw IoError("unterminated quoted field in " + path);
    if (!cell.empty() || !row.empty()) end_row();
    return rows;
}

}  // namespace flowlab
