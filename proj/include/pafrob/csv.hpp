#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pafrob {

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Writes one comma-separated line. Fields are emitted as given.
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

}  // namespace pafrob
