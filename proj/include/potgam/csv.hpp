#ifndef POTGAM_CSV_HPP
#define POTGAM_CSV_HPP

#include <string>
#include <vector>

namespace potgam::csv {

/// Header row plus numeric body. Parse errors name the offending line and
/// column.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;       // -1 if absent
    int require_column(const std::string& name) const;
};

Table read_file(const std::string& path);
Table parse(const std::string& text, const std::string& origin);

std::string format_double(double v);

/// Write via a temporary file in the same directory followed by an atomic
/// rename, so failed runs never leave partial output behind.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace potgam::csv

#endif
