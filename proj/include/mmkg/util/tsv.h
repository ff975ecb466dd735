#ifndef MMKG_UTIL_TSV_H_
#define MMKG_UTIL_TSV_H_

#include <string>
#include <string_view>
#include <vector>

namespace mmkg::util {

// Backslash-escapes tab, newline, carriage return and backslash.
std::string EscapeTsvField(std::string_view field);
std::string UnescapeTsvField(std::string_view field);

// Splits on raw tabs and unescapes each field.
std::vector<std::string> SplitTsvLine(std::string_view line);

std::string Trim(std::string_view s);

}  // namespace mmkg::util

#endif  // MMKG_UTIL_TSV_H_
