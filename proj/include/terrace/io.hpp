#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace terrace {
namespace io {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Strict full-string parse; throws ConfigError on anything else.
double parse_double(const std::string& text);
long long parse_int(const std::string& text);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Plain comma separation, no quoting: writers below never emit commas,
/// quotes, or newlines inside fields, which read_csv relies on.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string digest_file(const std::filesystem::path& path);

/// Raw little-endian doubles, for the optional snapshot pack.
void write_doubles(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_doubles(const std::filesystem::path& path);

}  // namespace io
}  // namespace terrace
