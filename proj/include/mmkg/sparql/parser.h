#ifndef MMKG_SPARQL_PARSER_H_
#define MMKG_SPARQL_PARSER_H_

#include <stdexcept>
#include <string>
#include <string_view>

#include "mmkg/sparql/ast.h"

namespace mmkg::sparql {

class QueryError : public std::runtime_error {
 public:
  // `feature` is set for well-formed SPARQL outside the supported subset.
  QueryError(int line, int column, std::string message, std::string feature = {})
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                           ": " + message),
        line_(line),
        column_(column),
        message_(std::move(message)),
        feature_(std::move(feature)) {}

  int line() const { return line_; }
  int column() const { return column_; }  // 1-based, in code points
  const std::string& message() const { return message_; }
  const std::string& feature() const { return feature_; }
  bool unsupported() const { return !feature_.empty(); }

 private:
  int line_;
  int column_;
  std::string message_;
  std::string feature_;
};

// Parses and validates a SELECT query. Throws QueryError.
Query ParseQuery(std::string_view text);

}  // namespace mmkg::sparql

#endif  // MMKG_SPARQL_PARSER_H_
