#include <doctest.h>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "flowlab/csv.hpp"
#include "flowlab/errors.hpp"

using flowlab::CsvWriter;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("doubles format as the shortest round-trip decimal") {
    CHECK(flowlab::format_double(1.0) == "1");
    CHECK(flowlab::format_double(0.5) == "0.5");
    CHECK(flowlab::format_double(-0.0) == "-0");
    CHECK(flowlab::format_double(1e100).find("1e+100") != std::string::npos);

    // Round trip is exact for awkward values.
    for (double v : {0.1, 1.0 / 3.0, 2.2250738585072014e-308, 123456789.123456789,
                     -9.87654321e-7}) {
        const std::string s = flowlab::format_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(flowlab::format_int(-42) == "-42");
    CHECK(flowlab::format_int(1) == "1");
}

TEST_CASE("escaping quotes only the cells that need it") {
    CHECK(flowlab::csv_escape("plain") == "plain");
    CHECK(flowlab::csv_escape("with,comma") == "\"with,comma\"");
    CHECK(flowlab::csv_escape("with\"quote") == "\"with\"\"quote\"");
    CHECK(flowlab::csv_escape("line\nbreak") == "\"line\nbreak\"");
    CHECK(flowlab::csv_escape("cr\rhere") == "\"cr\rhere\"");
    CHECK(flowlab::csv_escape("") == "");
}

TEST_CASE("written files use CRLF, a header row, and reject width mismatches") {
    const std::string path = tmp_path("flowlab_csv_test.csv");
    {
        CsvWriter w(path, {"a", "b"});
        w.row({"1", "x,y"});
        w.row({"2.5", "plain"});
        CHECK_THROWS_AS(w.row({"only-one"}), std::invalid_argument);
    }
    const std::string content = slurp(path);
    CHECK(content == "a,b\r\n1,\"x,y\"\r\n2.5,plain\r\n");
    std::filesystem::remove(path);

    CHECK_THROWS_AS(CsvWriter("/nonexistent-dir-xyz/out.csv", {"a"}), flowlab::IoError);
}

TEST_CASE("reading round-trips quoting, embedded newlines, and bare LF lines") {
    const std::string path = tmp_path("flowlab_csv_read.csv");
    {
        CsvWriter w(path, {"id", "text", "value"});
        w.row({"1", "multi\nline", "0.25"});
        w.row({"2", "says \"hi\"", "-3"});
        w.row({"3", "a,b,c", ""});
    }
    const auto rows = flowlab::read_csv(path);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == std::vector<std::string>{"id", "text", "value"});
    CHECK(rows[1] == std::vector<std::string>{"1", "multi\nline", "0.25"});
    CHECK(rows[2] == std::vector<std::string>{"2", "says \"hi\"", "-3"});
    CHECK(rows[3] == std::vector<std::string>{"3", "a,b,c", ""});
    std::filesystem::remove(path);

    // Unix line endings parse too.
    {
        std::ofstream out(path, std::ios::binary);
        out << "h1,h2\n1,2\n3,4\n";
    }
    const auto lf = flowlab::read_csv(path);
    REQUIRE(lf.size() == 3);
    CHECK(lf[1] == std::vector<std::string>{"1", "2"});
    std::filesystem::remove(path);

    {
        std::ofstream out(path, std::ios::binary);
        out << "h\n\"unterminated\n";
    }
    CHECK_THROWS_AS(flowlab::read_csv(path), flowlab::IoError);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(flowlab::read_csv("/no/such/file.csv"), flowlab::IoError);
}

TEST_CASE("numeric cells survive a full write-read cycle bit-exactly") {
    const std::string path = tmp_path("flowlab_csv_roundtrip.csv");
    const std::vector<double> values{0.1, -1.0 / 7.0, 6.02214076e23, 5e-324, 0.0};
    {
        CsvWriter w(path, {"v"});
        for (double v : values) w.row({flowlab::format_double(v)});
    }
    const auto rows = flowlab::read_csv(path);
    REQUIRE(rows.size() == values.size() + 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::string& cell = rows[i + 1][0];
        double parsed = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), parsed);
        REQUIRE(res.ec == std::errc());
        CHECK(parsed == values[i]);
    }
    std::filesystem::remove(path);
}
