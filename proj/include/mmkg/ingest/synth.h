#ifndef MMKG_INGEST_SYNTH_H_
#define MMKG_INGEST_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmkg/ingest/image_codec.h"

namespace mmkg::ingest {

// Shape of a synthetic stand-in for a crawled image corpus.
struct CorpusSpec {
  int entities = 50;
  int images_per_entity = 30;
  double outlier_fraction = 0.2;  // in [0, 1)
  int corrupt_per_entity = 0;     // truncated PNGs, taken from the inlier slots
  int animated_per_entity = 0;    // two-frame GIFs, taken from the inlier slots
  int width = 80;
  int height = 60;
  std::string base_iri = "http://mmkb.test";
  // Entities are assigned to these round-robin.
  std::vector<std::string> domains = {"Birds", "Architecture"};
  // Entities that exist in the graph but must not be selected.
  bool add_distractors = true;
};

enum class SampleLabel { kInlier, kOutlier, kCorrupt, kAnimated };

std::string_view SampleLabelName(SampleLabel label);

struct CorpusInfo {
  std::filesystem::path graph_path;    // source.nt
  std::filesystem::path domains_path;  // domains.conf
  std::filesystem::path images_root;   // images/, for LocalDirectorySource
  std::filesystem::path labels_path;   // labels.tsv
  std::vector<std::string> entity_iris;
  // (entity IRI, source locator) -> label
  std::map<std::pair<std::string, std::string>, SampleLabel> labels;
};

// Writes a deterministic corpus under `out_dir`. Each entity draws its
// inliers from one entity-specific color/stripe distribution; outliers come
// from a distinct distribution (far-away hues, checkerboard textures), each
// drawn independently. Throws std::invalid_argument for an outlier fraction
// outside [0, 1) or inconsistent counts.
CorpusInfo SynthesizeCorpus(const CorpusSpec& spec, std::uint64_t seed,
                            const std::filesystem::path& out_dir);

// Single-image generators, exposed for descriptor tests.
RgbImage SynthesizeInlier(int entity_index, std::uint64_t seed, std::uint64_t sample,
                          int width, int height);
RgbImage SynthesizeOutlier(int entity_index, std::uint64_t seed, std::uint64_t sample,
                           int width, int height);

std::map<std::pair<std::string, std::string>, SampleLabel> ReadLabels(
    const std::filesystem::path& labels_path);

}  // namespace mmkg::ingest

#endif  // MMKG_INGEST_SYNTH_H_
