#include "mmkg/ingest/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "mmkg/ingest/image_source.h"
#include "mmkg/kg/triple.h"
#include "mmkg/rdf/ntriples.h"
#include "mmkg/util/hash.h"
#include "mmkg/util/random.h"
#include "mmkg/util/tsv.h"

namespace mmkg::ingest {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Hsv {
  double h, s, v;
};

std::array<double, 3> HsvToRgb(Hsv c) {
  double h = std::fmod(c.h, 360.0);
  if (h < 0) h += 360.0;
  const double chroma = c.v * c.s;
  const double x = chroma * (1 - std::fabs(std::fmod(h / 60.0, 2.0) - 1));
  const double m = c.v - chroma;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h / 60.0)) {
    case 0: r = chroma, g = x; break;
    case 1: r = x, g = chroma; break;
    case 2: g = chroma, b = x; break;
    case 3: g = x, b = chroma; break;
    case 4: r = x, b = chroma; break;
    default: r = chroma, b = x; break;
  }
  return {r + m, g + m, b + m};
}

double Clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::uint8_t ToByte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, v * 255.0))));
}

struct EntityStyle {
  double hue, sat, val;
  double angle;  // stripe direction, radians
  double period;
  double amplitude;
};

EntityStyle StyleFor(int entity_index, std::uint64_t seed) {
  util::Rng rng(util::MixSeed(seed, static_cast<std::uint64_t>(entity_index)));
  EntityStyle s;
  // Golden-angle spacing keeps entity hues apart.
  s.hue = std::fmod(entity_index * 137.50776 + rng.Uniform(0, 10), 360.0);
  s.sat = rng.Uniform(0.55, 0.9);
  s.val = rng.Uniform(0.55, 0.9);
  s.angle = static_cast<double>(rng.Below(4)) * kPi / 4;
  s.period = rng.Uniform(6, 16);
  s.amplitude = rng.Uniform(0.1, 0.25);
  return s;
}

util::Rng SampleRng(int entity_index, std::uint64_t seed, std::uint64_t sample, std::uint64_t salt) {
  return util::Rng(util::MixSeed(util::MixSeed(seed, static_cast<std::uint64_t>(entity_index)),
                                 sample * 4 + salt));
}

void AddNoise(RgbImage& img, util::Rng& rng) {
  for (auto& p : img.pixels) {
    const int delta = static_cast<int>(rng.Below(11)) - 5;
    p = static_cast<std::uint8_t>(std::clamp(static_cast<int>(p) + delta, 0, 255));
  }
}

std::string EntityIri(const CorpusSpec& spec, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/entity/e%04d", i);
  return spec.base_iri + buf;
}

}  // namespace

std::string_view SampleLabelName(SampleLabel label) {
  switch (label) {
    case SampleLabel::kInlier: return "inlier";
    case SampleLabel::kOutlier: return "outlier";
    case SampleLabel::kCorrupt: return "corrupt";
    case SampleLabel::kAnimated: return "animated";
  }
  return "inlier";
}

RgbImage SynthesizeInlier(int entity_index, std::uint64_t seed, std::uint64_t sample, int width,
                          int height) {
  const EntityStyle style = StyleFor(entity_index, seed);
  util::Rng rng = SampleRng(entity_index, seed, sample, 0);
  const Hsv base{style.hue + rng.Normal() * 3.0, Clamp01(style.sat + rng.Normal() * 0.03),
                 Clamp01(style.val + rng.Normal() * 0.03)};
  const double phase = rng.Uniform(0, 2 * kPi);
  const double cx = std::cos(style.angle), cy = std::sin(style.angle);
  RgbImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = std::sin(2 * kPi * (x * cx + y * cy) / style.period + phase);
      auto rgb = HsvToRgb({base.h, base.s, Clamp01(base.v * (1 + style.amplitude * t))});
      std::uint8_t* p = img.at(x, y);
      for (int c = 0; c < 3; ++c) p[c] = ToByte(rgb[c]);
    }
  }
  AddNoise(img, rng);
  return img;
}

RgbImage SynthesizeOutlier(int entity_index, std::uint64_t seed, std::uint64_t sample, int width,
                           int height) {
  const EntityStyle style = StyleFor(entity_index, seed);
  util::Rng rng = SampleRng(entity_index, seed, sample, 1);
  const Hsv a{style.hue + 90 + rng.Uniform(0, 180), rng.Uniform(0.3, 1.0), rng.Uniform(0.25, 1.0)};
  const Hsv b{a.h + rng.Uniform(-40, 40), rng.Uniform(0.0, 1.0), rng.Uniform(0.1, 1.0)};
  const int cell = 3 + static_cast<int>(rng.Below(10));
  const auto ca = HsvToRgb(a), cb = HsvToRgb(b);
  RgbImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto& c = ((x / cell + y / cell) % 2 == 0) ? ca : cb;
      std::uint8_t* p = img.at(x, y);
      for (int k = 0; k < 3; ++k) p[k] = ToByte(c[k]);
    }
  }
  AddNoise(img, rng);
  return img;
}

CorpusInfo SynthesizeCorpus(const CorpusSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction < 1.0)) {
    throw std::invalid_argument("outlier fraction must lie in [0, 1)");
  }
  if (spec.entities < 1 || spec.images_per_entity < 1 || spec.images_per_entity > 30) {
    throw std::invalid_argument("need >= 1 entity and 1..30 images per entity");
  }
  if (spec.domains.empty()) throw std::invalid_argument("need at least one domain");
  const int n = spec.images_per_entity;
  const int outliers = static_cast<int>(std::floor(spec.outlier_fraction * n + 0.5));
  if (outliers + spec.corrupt_per_entity + spec.animated_per_entity > n ||
      spec.corrupt_per_entity < 0 || spec.animated_per_entity < 0) {
    throw std::invalid_argument("outlier, corrupt and animated counts exceed images per entity");
  }

  CorpusInfo info;
  fs::create_directories(out_dir);
  info.graph_path = out_dir / "source.nt";
  info.domains_path = out_dir / "domains.conf";
  info.images_root = out_dir / "images";
  info.labels_path = out_dir / "labels.tsv";
  fs::create_directories(info.images_root);

  const std::string p_type = spec.base_iri + "/p/type";
  const std::string p_category = spec.base_iri + "/p/category";
  const std::string p_name = spec.base_iri + "/p/name";
  auto domain_type = [&](size_t d) {
    return d % 2 == 0 ? spec.base_iri + "/c/Animal" : spec.base_iri + "/c/" + spec.domains[d];
  };

  std::vector<kg::Triple> triples;
  auto add = [&](const std::string& s, const std::string& p, kg::Term o) {
    triples.push_back(kg::Triple::Make(kg::Term::Iri(s), kg::Term::Iri(p), std::move(o)));
  };

  std::ofstream labels(info.labels_path, std::ios::binary | std::ios::trunc);
  labels << "entity_iri\tsource_locator\tlabel\n";

  for (int i = 0; i < spec.entities; ++i) {
    const size_t d = static_cast<size_t>(i) % spec.domains.size();
    const std::string iri = EntityIri(spec, i);
    info.entity_iris.push_back(iri);
    add(iri, p_type, kg::Term::Iri(domain_type(d)));
    if (d % 2 == 0) add(iri, p_category, kg::Term::Iri(spec.base_iri + "/c/" + spec.domains[d]));
    char name[64];
    std::snprintf(name, sizeof(name), "%s样本 %04d", spec.domains[d].c_str(), i);
    add(iri, p_name, kg::Term::Literal(name, "zh"));

    // Slot kinds, shuffled deterministically per entity.
    std::vector<SampleLabel> slots(static_cast<size_t>(n), SampleLabel::kInlier);
    int k = 0;
    for (int j = 0; j < outliers; ++j) slots[k++] = SampleLabel::kOutlier;
    for (int j = 0; j < spec.corrupt_per_entity; ++j) slots[k++] = SampleLabel::kCorrupt;
    for (int j = 0; j < spec.animated_per_entity; ++j) slots[k++] = SampleLabel::kAnimated;
    util::Rng shuffle_rng(util::MixSeed(seed ^ 0x5eed5eedULL, static_cast<std::uint64_t>(i)));
    for (size_t j = slots.size() - 1; j > 0; --j) {
      std::swap(slots[j], slots[shuffle_rng.Below(j + 1)]);
    }

    const std::string dir = EntityDirectoryName(iri);
    fs::create_directories(info.images_root / dir);
    for (int r = 0; r < n; ++r) {
      const SampleLabel label = slots[static_cast<size_t>(r)];
      const auto sample = static_cast<std::uint64_t>(r);
      std::string bytes;
      std::string ext = "png";
      switch (label) {
        case SampleLabel::kInlier:
          bytes = EncodePng(SynthesizeInlier(i, seed, sample, spec.width, spec.height));
          break;
        case SampleLabel::kOutlier:
          bytes = EncodePng(SynthesizeOutlier(i, seed, sample, spec.width, spec.height));
          break;
        case SampleLabel::kCorrupt:
          bytes = EncodePng(SynthesizeInlier(i, seed, sample, spec.width, spec.height));
          bytes.resize(bytes.size() / 2);
          break;
        case SampleLabel::kAnimated: {
          std::vector<RgbImage> frames{
              SynthesizeInlier(i, seed, sample, spec.width, spec.height),
              SynthesizeInlier(i, seed, sample + 1000, spec.width, spec.height)};
          bytes = EncodeGif(frames);
          ext = "gif";
          break;
        }
      }
      char file[32];
      std::snprintf(file, sizeof(file), "%03d.%s", r, ext.c_str());
      const std::string locator = dir + "/" + file;
      std::ofstream out(info.images_root / locator, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw std::runtime_error("cannot write " + (info.images_root / locator).string());
      info.labels[{iri, locator}] = label;
      labels << util::EscapeTsvField(iri) << '\t' << util::EscapeTsvField(locator) << '\t'
             << SampleLabelName(label) << '\n';
    }
  }

  if (spec.add_distractors) {
    for (size_t d = 0; d < spec.domains.size(); ++d) {
      // Lexicon-excluded: right type (and taxon), but a person.
      const std::string person = spec.base_iri + "/entity/x-person-" + std::to_string(d);
      add(person, p_type, kg::Term::Iri(domain_type(d)));
      if (d % 2 == 0) {
        add(person, p_category, kg::Term::Iri(spec.base_iri + "/c/" + spec.domains[d]));
      }
      add(person, p_name, kg::Term::Literal("人物 " + spec.domains[d], "zh"));
      // Type without taxon: dropped by taxonomy-filtered domains.
      const std::string untaxed = spec.base_iri + "/entity/x-untaxed-" + std::to_string(d);
      add(untaxed, p_type, kg::Term::Iri(spec.base_iri + "/c/Animal"));
      add(untaxed, p_name, kg::Term::Literal("Untaxed Animal " + std::to_string(d), "en"));
    }
    add(spec.base_iri + "/entity/x-book", p_type, kg::Term::Iri(spec.base_iri + "/c/Book"));
    add(spec.base_iri + "/entity/x-book", p_name, kg::Term::Literal("A Book About Birds", "en"));
  }

  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  {
    std::ofstream out(info.graph_path, std::ios::binary | std::ios::trunc);
    rdf::WriteNTriples(triples, out);
  }
  {
    std::ofstream out(info.domains_path, std::ios::binary | std::ios::trunc);
    out << "# Synthetic corpus domains\n";
    out << "name_predicate = " << p_name << "\n";
    out << "type_predicate = " << p_type << "\n";
    out << "taxon_predicate = " << p_category << "\n";
    for (size_t d = 0; d < spec.domains.size(); ++d) {
      out << "\n[" << spec.domains[d] << "]\n";
      out << "type_object = " << domain_type(d) << "\n";
      if (d % 2 == 0) out << "taxon_object = " << spec.base_iri << "/c/" << spec.domains[d] << "\n";
      out << "exclude = 人物, book\n";
    }
  }
  return info;
}

std::map<std::pair<std::string, std::string>, SampleLabel> ReadLabels(const fs::path& labels_path) {
  std::ifstream in(labels_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + labels_path.string());
  std::map<std::pair<std::string, std::string>, SampleLabel> labels;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    auto f = util::SplitTsvLine(line);
    if (f.size() != 3) throw std::runtime_error("malformed label line: " + line);
    SampleLabel label = SampleLabel::kInlier;
    for (SampleLabel l : {SampleLabel::kInlier, SampleLabel::kOutlier, SampleLabel::kCorrupt,
                          SampleLabel::kAnimated}) {
      if (SampleLabelName(l) == f[2]) label = l;
    }
    labels[{f[0], f[1]}] = label;
  }
  return labels;
}

}  // namespace mmkg::ingest
