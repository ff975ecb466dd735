#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "mmkg/features/embedding.h"
#include "mmkg/ingest/content_store.h"
#include "mmkg/ingest/image_codec.h"
#include "mmkg/ingest/synth.h"
#include "mmkg/util/hash.h"
#include "support.h"

namespace mmkg::features {
namespace {

namespace fs = std::filesystem;
using ingest::RgbImage;

RgbImage Solid(int w, int h, uint8_t v) {
  RgbImage img(w, h);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

Vector Unit(util::Rng& rng) {
  Vector v;
  double n = 0;
  for (float& x : v) {
    x = static_cast<float>(rng.Normal());
    n += static_cast<double>(x) * x;
  }
  for (float& x : v) x = static_cast<float>(x / std::sqrt(n));
  return v;
}

TEST(Descriptor, UniformGray) {
  const Vector v = DescribeImage(Solid(50, 30, 128));
  EXPECT_NEAR(L2Norm(v), 1.0, 1e-6);
  // Layout: per cell (mean R, G, B, std R, G, B).
  for (int cell = 0; cell < 16; ++cell) {
    for (int k = 3; k < 6; ++k) EXPECT_EQ(v[static_cast<size_t>(cell * 6 + k)], 0.0f);
    EXPECT_GT(v[static_cast<size_t>(cell * 6)], 0.0f);
  }
  int nonzero_bins = 0;
  for (int b = 96; b < 128; ++b) nonzero_bins += v[static_cast<size_t>(b)] != 0.0f;
  EXPECT_EQ(nonzero_bins, 1);
  EXPECT_GT(v[96 + 16], 0.0f);  // luminance 128 -> bin 16
}

TEST(Descriptor, AnalyticValuesForGray) {
  // Mean 128/255 in 48 slots, histogram mass 1 in one bin.
  const Vector v = DescribeImage(Solid(64, 64, 128));
  const double m = 128.0 / 255.0;
  const double norm = std::sqrt(48 * m * m + 1.0);
  EXPECT_NEAR(v[0], m / norm, 1e-7);
  EXPECT_NEAR(v[96 + 16], 1.0 / norm, 1e-7);
}

TEST(Descriptor, Deterministic) {
  const RgbImage img = ingest::SynthesizeInlier(3, 9, 1, 80, 60);
  EXPECT_EQ(DescribeImage(img), DescribeImage(img));
  const std::string png = ingest::EncodePng(img);
  EXPECT_EQ(DescribeImage(ingest::DecodeImage(png)), DescribeImage(img));
}

TEST(Resample, AreaAverageOfBlocks) {
  RgbImage img(4, 2);
  for (int x = 0; x < 4; ++x) {
    for (int y = 0; y < 2; ++y) std::fill_n(img.at(x, y), 3, static_cast<uint8_t>(x < 2 ? 0 : 200));
  }
  const RgbImage r = ResampleArea(img, 2, 1);
  EXPECT_EQ(r.at(0, 0)[0], 0);
  EXPECT_EQ(r.at(1, 0)[0], 200);
  const RgbImage up = ResampleArea(Solid(3, 3, 77), 64, 64);
  for (uint8_t p : up.pixels) EXPECT_EQ(p, 77);
}

// Same-distribution pairs are closer than cross-distribution pairs.
TEST(DescriptorProperty, SeparatesCorpusDistributions) {
  util::Rng rng(2024);
  int wins = 0;
  const int trials = 1000;
  std::map<std::pair<int, int>, Vector> cache;
  auto vec = [&](int entity, int sample) {
    auto key = std::make_pair(entity, sample);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, DescribeImage(ingest::SynthesizeInlier(entity, 5, static_cast<uint64_t>(sample), 80, 60))).first;
    }
    return it->second;
  };
  for (int t = 0; t < trials; ++t) {
    const int a = static_cast<int>(rng.Below(20));
    int b = static_cast<int>(rng.Below(19));
    if (b >= a) ++b;
    const int s1 = static_cast<int>(rng.Below(30));
    int s2 = static_cast<int>(rng.Below(29));
    if (s2 >= s1) ++s2;
    const Vector anchor = vec(a, s1), same = vec(a, s2), other = vec(b, static_cast<int>(rng.Below(30)));
    wins += Cosine(anchor, same) > Cosine(anchor, other);
  }
  EXPECT_GE(wins, 950) << wins << " of " << trials;
}

TEST(DescriptorProperty, OutliersFarFromInliers) {
  for (int e = 0; e < 5; ++e) {
    std::vector<Vector> in, out;
    for (int s = 0; s < 12; ++s) in.push_back(DescribeImage(ingest::SynthesizeInlier(e, 1, s, 80, 60)));
    for (int s = 0; s < 6; ++s) out.push_back(DescribeImage(ingest::SynthesizeOutlier(e, 1, s, 80, 60)));
    auto mean = [](const std::vector<Vector>& vs) {
      std::vector<double> m(kEmbeddingDim, 0.0);
      for (const auto& v : vs) {
        for (int k = 0; k < kEmbeddingDim; ++k) m[static_cast<size_t>(k)] += v[static_cast<size_t>(k)] / vs.size();
      }
      return m;
    };
    auto dist = [](const std::vector<double>& a, std::span<const float> b) {
      double d = 0;
      for (size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
      return std::sqrt(d);
    };
    const auto mi = mean(in), mo = mean(out);
    double spread = 0;
    for (const auto& v : in) spread += dist(mi, v) / in.size();
    double between = 0;
    for (size_t k = 0; k < mi.size(); ++k) between += (mi[k] - mo[k]) * (mi[k] - mo[k]);
    EXPECT_GT(std::sqrt(between), spread) << "entity " << e;
  }
}

// ---------------------------------------------------------------- matrix

TEST(EmbeddingMatrix, RowsAndDuplicates) {
  EmbeddingMatrix m("x");
  util::Rng rng(1);
  m.AddRow("a", Unit(rng));
  m.AddRow("b", Unit(rng));
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.IndexOf("b"), 1);
  EXPECT_EQ(m.IndexOf("z"), -1);
  EXPECT_THROW(m.AddRow("a", Unit(rng)), EmbeddingError);
  std::vector<float> short_row(5, 0.f);
  EXPECT_THROW(m.AddRow("c", short_row), EmbeddingError);
}

struct Corpus {
  testing::TempDir dir;
  ingest::ContentStore store{dir / "store"};
  ingest::Manifest manifest;

  void Add(const std::string& entity, const RgbImage& img, bool validated = true) {
    const auto s = store.Put(ingest::EncodePng(img));
    ingest::ImageRecord r;
    r.image_id = s.image_id;
    r.entity_iri = entity;
    r.local_path = s.relative_path;
    r.format = s.format;
    r.validated = validated;
    r.rank = static_cast<int>(manifest.records.size() % 30);
    manifest.records.push_back(r);
  }
};

TEST(ExtractBuiltin, OneRowPerDistinctImage) {
  Corpus c;
  c.Add("http://a/x", ingest::SynthesizeInlier(0, 1, 0, 32, 32));
  c.Add("http://a/y", ingest::SynthesizeInlier(0, 1, 0, 32, 32));  // same bytes, other entity
  c.Add("http://a/y", ingest::SynthesizeInlier(1, 1, 0, 32, 32));
  const EmbeddingMatrix m = ExtractBuiltin(c.manifest, c.store);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.extractor_id(), kBuiltinExtractorId);
  EXPECT_EQ(m.ids()[0], c.manifest.records[0].image_id);
  for (size_t i = 0; i < m.rows(); ++i) EXPECT_NEAR(L2Norm(m.row(i)), 1.0, 1e-6);
  EXPECT_EQ(ExtractBuiltin(c.manifest, c.store, 3), m);
}

TEST(ExtractBuiltin, ErrorsNameTheImage) {
  Corpus c;
  c.Add("http://a/x", Solid(8, 8, 3), false);
  try {
    ExtractBuiltin(c.manifest, c.store);
    FAIL();
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find(c.manifest.records[0].image_id), std::string::npos);
  }
  Corpus d;
  d.Add("http://a/x", Solid(8, 8, 3));
  fs::remove(d.store.Resolve(d.manifest.records[0].local_path));
  try {
    ExtractBuiltin(d.manifest, d.store);
    FAIL();
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find(d.manifest.records[0].image_id), std::string::npos);
  }
}

// ---------------------------------------------------------------- exchange

ingest::Manifest ManifestFor(const std::vector<std::string>& ids) {
  ingest::Manifest m;
  for (const auto& id : ids) {
    ingest::ImageRecord r;
    r.image_id = id;
    r.entity_iri = "http://a/e";
    r.validated = true;
    m.records.push_back(r);
  }
  return m;
}

EmbeddingMatrix RandomMatrix(size_t n, uint64_t seed) {
  util::Rng rng(seed);
  EmbeddingMatrix m(kBuiltinExtractorId);
  for (size_t i = 0; i < n; ++i) m.AddRow(util::Sha256Hex(std::to_string(seed * 1000 + i)), Unit(rng));
  return m;
}

TEST(Exchange, BinaryRoundTripExact) {
  testing::TempDir dir;
  const EmbeddingMatrix m = RandomMatrix(20, 1);
  WriteEmbeddingsBinary(m, dir / "e.bin");
  const std::string bytes = testing::ReadFile(dir / "e.bin");
  EXPECT_EQ(bytes.substr(0, 8), "MMKGEMB1");
  EXPECT_EQ(static_cast<uint8_t>(bytes[8]), 128);
  EXPECT_EQ(bytes.size(), 8 + 4 + 8 + 20 * (2 + 64 + 128 * 4));
  const EmbeddingMatrix back = LoadExternal(dir / "e.bin", ManifestFor(m.ids()));
  ASSERT_EQ(back.rows(), m.rows());
  for (size_t i = 0; i < m.rows(); ++i) {
    for (int k = 0; k < kEmbeddingDim; ++k) {
      EXPECT_NEAR(back.row(i)[static_cast<size_t>(k)], m.row(i)[static_cast<size_t>(k)], 1e-9);
    }
  }
}

TEST(Exchange, TsvRoundTripKeepsExtractor) {
  testing::TempDir dir;
  const EmbeddingMatrix m = RandomMatrix(5, 2);
  WriteEmbeddingsTsv(m, dir / "e.tsv");
  EXPECT_EQ(testing::ReadFile(dir / "e.tsv").substr(0, 45), "# MMKGEMB1 dim=128 count=5 extractor=builtin-");
  EXPECT_EQ(ReadEmbeddings(dir / "e.tsv"), m);
}

TEST(Exchange, RowsAssociatedById) {
  testing::TempDir dir;
  const EmbeddingMatrix m = RandomMatrix(6, 3);
  WriteEmbeddingsBinary(m, dir / "e.bin");
  std::vector<std::string> permuted = m.ids();
  std::reverse(permuted.begin(), permuted.end());
  const EmbeddingMatrix back = LoadExternal(dir / "e.bin", ManifestFor(permuted));
  EXPECT_EQ(back.ids(), permuted);
  for (size_t i = 0; i < back.rows(); ++i) {
    const auto orig = m.row(static_cast<size_t>(m.IndexOf(permuted[i])));
    EXPECT_TRUE(std::equal(orig.begin(), orig.end(), back.row(i).begin()));
  }
}

TEST(Exchange, NanRowRejectedWithIndex) {
  testing::TempDir dir;
  EmbeddingMatrix m = RandomMatrix(3, 4);
  WriteEmbeddingsBinary(m, dir / "e.bin");
  std::string bytes = testing::ReadFile(dir / "e.bin");
  const size_t row2 = 20 + 2 * (2 + 64 + 512) + 2 + 64;
  const float nan = std::nanf("");
  std::memcpy(&bytes[row2 + 4 * 7], &nan, 4);
  testing::WriteFile(dir / "nan.bin", bytes);
  try {
    LoadExternal(dir / "nan.bin", ManifestFor(m.ids()));
    FAIL();
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Exchange, StructuralErrors) {
  testing::TempDir dir;
  const EmbeddingMatrix m = RandomMatrix(3, 5);
  WriteEmbeddingsBinary(m, dir / "e.bin");
  const std::string good = testing::ReadFile(dir / "e.bin");

  std::string bad_magic = good;
  bad_magic[3] = 'X';
  testing::WriteFile(dir / "magic.bin", bad_magic);
  EXPECT_THROW(ReadEmbeddings(dir / "magic.bin"), EmbeddingError);

  std::string bad_dim = good;
  bad_dim[8] = 64;
  testing::WriteFile(dir / "dim.bin", bad_dim);
  try {
    ReadEmbeddings(dir / "dim.bin");
    FAIL();
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find("dim"), std::string::npos);
  }

  testing::WriteFile(dir / "short.bin", good.substr(0, good.size() - 3));
  EXPECT_THROW(ReadEmbeddings(dir / "short.bin"), EmbeddingError);
  testing::WriteFile(dir / "long.bin", good + "x");
  EXPECT_THROW(ReadEmbeddings(dir / "long.bin"), EmbeddingError);
}

TEST(Exchange, MissingAndExtraIdsListed) {
  testing::TempDir dir;
  const EmbeddingMatrix m = RandomMatrix(3, 6);
  WriteEmbeddingsBinary(m, dir / "e.bin");
  std::vector<std::string> ids{m.ids()[0], m.ids()[1], "ffff"};
  try {
    LoadExternal(dir / "e.bin", ManifestFor(ids));
    FAIL();
  } catch (const EmbeddingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("missing: ffff"), std::string::npos) << msg;
    EXPECT_NE(msg.find(m.ids()[2]), std::string::npos) << msg;
  }
}

TEST(Exchange, NormTolerance) {
  testing::TempDir dir;
  util::Rng rng(7);
  EmbeddingMatrix near("ext"), far("ext");
  Vector v = Unit(rng);
  Vector scaled = v;
  for (float& x : scaled) x *= 1.0005f;
  near.AddRow("aa", scaled);
  for (float& x : scaled) x *= 1.01f;
  far.AddRow("aa", scaled);
  WriteEmbeddingsBinary(near, dir / "near.bin");
  WriteEmbeddingsBinary(far, dir / "far.bin");
  const EmbeddingMatrix ok = LoadExternal(dir / "near.bin", ManifestFor({"aa"}));
  EXPECT_NEAR(L2Norm(ok.row(0)), 1.0, 1e-6);
  EXPECT_EQ(ok.extractor_id(), "external");
  EXPECT_THROW(LoadExternal(dir / "far.bin", ManifestFor({"aa"})), EmbeddingError);
}

}  // namespace
}  // namespace mmkg::features
