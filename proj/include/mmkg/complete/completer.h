#ifndef MMKG_COMPLETE_COMPLETER_H_
#define MMKG_COMPLETE_COMPLETER_H_

#include <string>
#include <vector>

#include "mmkg/ingest/manifest.h"
#include "mmkg/kg/graph.h"

namespace mmkg::complete {

struct CompletionOptions {
  std::string base_iri = "http://mmkb.test";
  std::string with_image_predicate;  // empty: <base>/p/withImage
  bool provenance = false;
  std::string score_predicate;  // empty: <base>/p/anomalyScore
  std::string rank_predicate;   // empty: <base>/p/searchRank

  std::string WithImage() const;
  std::string Score() const;
  std::string Rank() const;
};

struct CompletionResult {
  size_t added = 0;             // with-image triples newly inserted
  size_t provenance_added = 0;  // score and rank triples newly inserted
  std::vector<std::string> warnings;
};

// <base>/image/<image-id>
std::string ImageIri(const std::string& base_iri, const std::string& image_id);
// The image id of an IRI produced by ImageIri, or empty.
std::string ImageIdFromIri(const std::string& base_iri, const std::string& iri);

// One <entity, with-image, image> triple per retained record. Idempotent.
// Throws std::invalid_argument while any record is still `fetched`.
CompletionResult CompleteTriples(const ingest::Manifest& manifest, kg::Graph& graph,
                                 const CompletionOptions& options);

// Score (xsd:decimal, 6 places) and rank (xsd:integer) triples per
// retained image. Returns the newly added count.
size_t AttachProvenance(const ingest::Manifest& manifest, kg::Graph& graph,
                        const CompletionOptions& options);

}  // namespace mmkg::complete

#endif  // MMKG_COMPLETE_COMPLETER_H_
