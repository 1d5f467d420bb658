#ifndef LSVAR_CSV_HPP
#define LSVAR_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace lsvar::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Minimal comma-separated reader: no quoting, blank lines skipped, CR stripped.
Table read(std::istream& in, const std::string& source_name);
Table read_file(const std::string& path);

/// "%.17g": round-trips every double exactly.
std::string format_double(double value);

/// Strict full-field parse; throws ConfigError naming source and line.
double parse_double(const std::string& field, const std::string& source_name, std::size_t line);

}  // namespace lsvar::csv

#endif  // LSVAR_CSV_HPP
