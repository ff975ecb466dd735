#ifndef MMKG_UTIL_UTF8_H_
#define MMKG_UTIL_UTF8_H_

#include <cstdint>
#include <string>
#include <string_view>

namespace mmkg::util {

// Returns the byte offset of the first invalid sequence, or npos when `text`
// is well-formed UTF-8 (no overlongs, no surrogates, nothing above U+10FFFF).
size_t FindInvalidUtf8(std::string_view text);

// Appends the UTF-8 encoding of `cp`. Returns false for surrogates and
// values above U+10FFFF.
bool AppendUtf8(char32_t cp, std::string& out);

}  // namespace mmkg::util

#endif  // MMKG_UTIL_UTF8_H_
