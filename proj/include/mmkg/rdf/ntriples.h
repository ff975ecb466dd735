#ifndef MMKG_RDF_NTRIPLES_H_
#define MMKG_RDF_NTRIPLES_H_

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmkg/kg/graph.h"
#include "mmkg/kg/triple.h"

namespace mmkg::rdf {

struct ParseDiagnostic {
  int line = 1;    // 1-based
  int column = 1;  // 1-based byte offset within the line
  std::string message;
  std::string excerpt;

  std::string ToString() const;
};

enum class ParseMode {
  kStrict,   // stop at the first malformed line
  kLenient,  // skip malformed lines, report each one
};

struct ParseResult {
  std::vector<kg::Triple> triples;
  std::vector<ParseDiagnostic> diagnostics;
  // False iff strict parsing stopped early. `triples` then holds the lines
  // preceding the failure.
  bool complete = true;
};

ParseResult ParseNTriples(std::string_view input, ParseMode mode = ParseMode::kStrict);
ParseResult ParseNTriples(std::istream& in, ParseMode mode = ParseMode::kStrict);

// One `s p o .\n` line per triple, in the given order.
std::string SerializeNTriples(std::span<const kg::Triple> triples);
void WriteNTriples(std::span<const kg::Triple> triples, std::ostream& out);

// File helpers. LoadGraph throws std::runtime_error carrying the first
// diagnostic when strict parsing fails.
kg::Graph LoadGraph(const std::string& path, ParseMode mode = ParseMode::kStrict,
                    std::vector<ParseDiagnostic>* diagnostics = nullptr);
void SaveGraph(const kg::Graph& graph, const std::string& path);

}  // namespace mmkg::rdf

#endif  // MMKG_RDF_NTRIPLES_H_
