#include <gtest/gtest.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mmkg/ingest/content_store.h"
#include "mmkg/ingest/image_codec.h"
#include "mmkg/ingest/image_source.h"
#include "mmkg/ingest/ingestor.h"
#include "mmkg/ingest/manifest.h"
#include "mmkg/ingest/synth.h"
#include "mmkg/util/hash.h"
#include "support.h"

namespace mmkg::ingest {
namespace {

namespace fs = std::filesystem;

RgbImage Solid(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y)[0] = r;
      img.at(x, y)[1] = g;
      img.at(x, y)[2] = b;
    }
  }
  return img;
}

RgbImage Gradient(int w, int h, int salt = 0) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y)[0] = static_cast<uint8_t>(x * 3 + salt);
      img.at(x, y)[1] = static_cast<uint8_t>(y * 5);
      img.at(x, y)[2] = static_cast<uint8_t>((x + y + salt) * 7);
    }
  }
  return img;
}

// ---------------------------------------------------------------- codec

TEST(ValidateImage, ZeroByteFileIsCorrupt) {
  testing::TempDir dir;
  testing::WriteFile(dir / "empty.png", "");
  EXPECT_EQ(ValidateImage(dir / "empty.png").verdict, ImageVerdict::kCorrupt);
}

TEST(ValidateImage, TwoFrameGifIsAnimated) {
  const std::vector<RgbImage> frames{Solid(8, 8, 255, 0, 0), Solid(8, 8, 0, 0, 255)};
  const ImageCheck c = CheckImageBytes(EncodeGif(frames));
  EXPECT_EQ(c.verdict, ImageVerdict::kAnimated);
  EXPECT_EQ(c.format, ImageFormat::kGif);
}

TEST(ValidateImage, SingleFrameGifIsOk) {
  const std::vector<RgbImage> frames{Gradient(10, 7)};
  const ImageCheck c = CheckImageBytes(EncodeGif(frames));
  EXPECT_EQ(c.verdict, ImageVerdict::kOk) << c.reason;
  EXPECT_EQ(c.width, 10);
  EXPECT_EQ(c.height, 7);
}

TEST(ValidateImage, Png64IsOk) {
  testing::TempDir dir;
  testing::WriteFile(dir / "a.png", EncodePng(Gradient(64, 64)));
  const ImageCheck c = ValidateImage(dir / "a.png");
  EXPECT_EQ(c.verdict, ImageVerdict::kOk);
  EXPECT_EQ(c.format, ImageFormat::kPng);
  EXPECT_EQ(c.width, 64);
  EXPECT_EQ(c.height, 64);
}

TEST(ValidateImage, TruncatedFilesAreCorrupt) {
  for (const std::string& bytes :
       {EncodePng(Gradient(40, 30)), EncodeJpeg(Gradient(40, 30)), EncodeBmp(Gradient(40, 30))}) {
    EXPECT_EQ(CheckImageBytes(bytes).verdict, ImageVerdict::kOk);
    EXPECT_EQ(CheckImageBytes(bytes.substr(0, bytes.size() / 2)).verdict, ImageVerdict::kCorrupt)
        << FormatName(SniffFormat(bytes));
  }
  EXPECT_EQ(CheckImageBytes("not an image at all").verdict, ImageVerdict::kCorrupt);
}

TEST(ValidateImage, JpegAndBmpDimensions) {
  EXPECT_EQ(CheckImageBytes(EncodeJpeg(Gradient(33, 21))).width, 33);
  const ImageCheck bmp = CheckImageBytes(EncodeBmp(Gradient(5, 9)));
  EXPECT_EQ(bmp.format, ImageFormat::kBmp);
  EXPECT_EQ(bmp.height, 9);
}

std::string Chunk(const std::string& fourcc, const std::string& payload) {
  std::string out = fourcc;
  const uint32_t n = static_cast<uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) out += static_cast<char>((n >> (8 * i)) & 0xff);
  out += payload;
  if (payload.size() % 2) out += '\0';
  return out;
}

std::string Riff(const std::string& body) {
  std::string out = "RIFF";
  const uint32_t n = static_cast<uint32_t>(body.size() + 4);
  for (int i = 0; i < 4; ++i) out += static_cast<char>((n >> (8 * i)) & 0xff);
  return out + "WEBP" + body;
}

TEST(ValidateImage, AnimatedWebpFlag) {
  // VP8X: flags byte, 3 reserved, 24-bit width-1 and height-1.
  std::string vp8x(10, '\0');
  vp8x[0] = 0x02;  // animation
  vp8x[4] = 15;    // width 16
  vp8x[7] = 7;     // height 8
  const ImageCheck c = CheckImageBytes(Riff(Chunk("VP8X", vp8x) + Chunk("ANIM", std::string(6, '\0'))));
  EXPECT_EQ(c.format, ImageFormat::kWebp);
  EXPECT_EQ(c.verdict, ImageVerdict::kAnimated);
  EXPECT_EQ(CheckImageBytes(Riff("")).verdict, ImageVerdict::kCorrupt);
}

TEST(ValidateImage, UnreadableFileIsIoErrorNotCorrupt) {
  if (::geteuid() == 0) GTEST_SKIP() << "root ignores file permissions";
  testing::TempDir dir;
  testing::WriteFile(dir / "locked.png", EncodePng(Gradient(4, 4)));
  fs::permissions(dir / "locked.png", fs::perms::none);
  EXPECT_THROW(ValidateImage(dir / "locked.png"), ImageIoError);
}

TEST(ValidateImage, DirectoryIsIoError) {
  testing::TempDir dir;
  fs::create_directories(dir / "sub.png");
  EXPECT_THROW(ValidateImage(dir / "sub.png"), ImageIoError);
}

TEST(Codec, PngDecodeRoundTrip) {
  const RgbImage img = Gradient(17, 13, 9);
  const RgbImage back = DecodeImage(EncodePng(img));
  EXPECT_EQ(back.width, 17);
  EXPECT_EQ(back.pixels, img.pixels);
  EXPECT_EQ(DecodeImage(EncodeBmp(img)).pixels, img.pixels);
  EXPECT_THROW(DecodeImage("junk"), DecodeError);
}

// ---------------------------------------------------------------- store

TEST(ContentStore, AddressedByHashAndIdempotent) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  const std::string bytes = EncodePng(Gradient(8, 8));
  const auto a = store.Put(bytes);
  const auto b = store.Put(bytes);
  EXPECT_EQ(a.image_id, util::Sha256Hex(bytes));
  EXPECT_EQ(a.relative_path, a.image_id.substr(0, 2) + "/" + a.image_id + ".png");
  EXPECT_EQ(a.relative_path, b.relative_path);
  EXPECT_EQ(testing::ReadFile(store.Resolve(a.relative_path)), bytes);
  ASSERT_TRUE(store.Find(a.image_id).has_value());
  EXPECT_EQ(*store.Find(a.image_id), store.Resolve(a.relative_path));
  EXPECT_FALSE(store.Find(std::string(64, 'a')).has_value());
  size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(store.root())) files += e.is_regular_file();
  EXPECT_EQ(files, 1u);
}

// ---------------------------------------------------------------- fetch

class FakeSource : public ImageSource {
 public:
  std::map<std::string, std::vector<std::string>> lists;  // iri -> locators
  std::map<std::string, std::string> files;                // locator -> bytes
  std::map<std::string, int> transient_failures;           // locator -> remaining
  std::set<std::string> unavailable_after;                 // iri: throw SourceUnavailable
  std::atomic<int> fetches{0};

  std::string id() const override { return "fake"; }
  std::vector<std::string> ListCandidates(const select::EntityRecord& e) override {
    if (unavailable_after.count(e.iri)) throw SourceUnavailable("down");
    auto it = lists.find(e.iri);
    return it == lists.end() ? std::vector<std::string>{} : it->second;
  }
  std::string Fetch(const std::string& locator) override {
    ++fetches;
    auto f = transient_failures.find(locator);
    if (f != transient_failures.end() && f->second > 0) {
      --f->second;
      throw TransientFetchError("timeout");
    }
    auto it = files.find(locator);
    if (it == files.end()) throw ImageNotFound(locator);
    return it->second;
  }
};

select::EntityRecord Entity(const std::string& iri, const std::string& domain = "D") {
  return {iri, iri, domain, {}};
}

FetchOptions Fast() {
  FetchOptions o;
  o.initial_backoff = std::chrono::milliseconds(1);
  return o;
}

void AddImages(FakeSource& src, const std::string& iri, int n) {
  for (int i = 0; i < n; ++i) {
    const std::string loc = iri + "/" + std::to_string(i);
    src.lists[iri].push_back(loc);
    src.files[loc] = EncodePng(Gradient(6, 6, i + static_cast<int>(iri.size()) * 31));
  }
}

TEST(FetchImages, CapAndFewerAndNone) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  FakeSource src;
  AddImages(src, "http://a/many", 100);
  AddImages(src, "http://a/seven", 7);
  const std::vector<select::EntityRecord> es{Entity("http://a/many"), Entity("http://a/seven"),
                                             Entity("http://a/none")};
  const Manifest m = FetchImages(es, src, store, Fast());
  const auto by = m.RecordsByEntity();
  EXPECT_EQ(by.at("http://a/many").size(), 30u);
  EXPECT_EQ(by.at("http://a/seven").size(), 7u);
  EXPECT_FALSE(by.count("http://a/none"));
  EXPECT_EQ(m.metadata.imageless_entities, std::vector<std::string>{"http://a/none"});
  for (size_t i = 0; i < 30; ++i) EXPECT_EQ(m.records[i].rank, static_cast<int>(i));
  EXPECT_EQ(src.fetches.load(), 37);
  EXPECT_EQ(m.metadata.fetcher_id, "fake");
}

TEST(FetchImages, TransientRetriesThenAbsent) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  FakeSource src;
  AddImages(src, "http://a/e", 3);
  src.transient_failures["http://a/e/0"] = 2;   // succeeds on the 3rd attempt
  src.transient_failures["http://a/e/1"] = 10;  // never succeeds
  src.lists["http://a/e"].push_back("http://a/e/missing");
  const std::vector<select::EntityRecord> es{Entity("http://a/e")};
  const Manifest m = FetchImages(es, src, store, Fast());
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[0].rank, 0);
  EXPECT_EQ(m.records[1].rank, 2);
  ASSERT_EQ(m.metadata.absent.size(), 2u);
  EXPECT_EQ(m.metadata.absent[0].source_locator, "http://a/e/1");
  EXPECT_EQ(m.metadata.absent[1].reason, "not found");
  for (const auto& r : m.records) EXPECT_EQ(r.status, ImageStatus::kFetched);
  EXPECT_EQ(src.fetches.load(), 3 + 3 + 1 + 1);
}

TEST(FetchImages, UnavailableSourceCheckpointsAndResumes) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  FakeSource src;
  AddImages(src, "http://a/1", 2);
  AddImages(src, "http://a/2", 2);
  AddImages(src, "http://a/3", 2);
  src.unavailable_after.insert("http://a/2");
  FetchOptions o = Fast();
  o.checkpoint_path = (dir / "cp.json").string();
  const std::vector<select::EntityRecord> es{Entity("http://a/1"), Entity("http://a/2"), Entity("http://a/3")};
  try {
    FetchImages(es, src, store, o);
    FAIL();
  } catch (const FetchAborted& e) {
    EXPECT_EQ(e.completed_entities(), 1u);
  }
  ASSERT_TRUE(fs::exists(dir / "cp.json"));
  const int before = src.fetches.load();
  src.unavailable_after.clear();
  const Manifest m = FetchImages(es, src, store, o);
  EXPECT_EQ(m.records.size(), 6u);
  EXPECT_EQ(src.fetches.load() - before, 4);  // entity 1 came from the checkpoint
  EXPECT_FALSE(fs::exists(dir / "cp.json"));
}

TEST(FetchImages, SharedBytesShareStorageButNotRecords) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  FakeSource src;
  const std::string bytes = EncodePng(Gradient(5, 5));
  src.lists["http://a/x"] = {"l1"};
  src.lists["http://a/y"] = {"l2"};
  src.files["l1"] = bytes;
  src.files["l2"] = bytes;
  const std::vector<select::EntityRecord> es{Entity("http://a/x"), Entity("http://a/y")};
  const Manifest m = FetchImages(es, src, store, Fast());
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[0].image_id, m.records[1].image_id);
  EXPECT_NE(m.records[0].entity_iri, m.records[1].entity_iri);
  EXPECT_EQ(m.CandidateImageIds().size(), 1u);
}

TEST(FetchImages, MultiDomainEntityFetchedOnce) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  FakeSource src;
  AddImages(src, "http://a/x", 3);
  const std::vector<select::EntityRecord> es{Entity("http://a/x", "Birds"), Entity("http://a/x", "Pets")};
  const Manifest m = FetchImages(es, src, store, Fast());
  ASSERT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.records[0].domain, "Birds,Pets");
}

TEST(FetchImages, RejectsBadCap) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  FakeSource src;
  FetchOptions o = Fast();
  o.cap = 31;
  EXPECT_THROW(FetchImages({}, src, store, o), std::invalid_argument);
  o.cap = 0;
  EXPECT_THROW(FetchImages({}, src, store, o), std::invalid_argument);
}

TEST(FetchImages, ParallelWorkersMatchSerial) {
  testing::TempDir dir;
  FakeSource src;
  std::vector<select::EntityRecord> es;
  for (int i = 0; i < 12; ++i) {
    es.push_back(Entity("http://a/" + std::to_string(i)));
    AddImages(src, es.back().iri, 1 + i % 5);
  }
  ContentStore s1(dir / "s1"), s2(dir / "s2");
  FetchOptions serial = Fast();
  FetchOptions parallel = Fast();
  parallel.workers = 4;
  Manifest a = FetchImages(es, src, s1, serial);
  Manifest b = FetchImages(es, src, s2, parallel);
  EXPECT_EQ(a.records, b.records);
}

TEST(LocalDirectorySource, RanksByFileName) {
  testing::TempDir dir;
  const std::string iri = "http://mmkb.test/entity/家燕";
  const fs::path d = dir / EntityDirectoryName(iri);
  testing::WriteFile(d / "002.png", "b");
  testing::WriteFile(d / "001.png", "a");
  testing::WriteFile(d / "010.png", "c");
  LocalDirectorySource src(dir.path());
  const auto c = src.ListCandidates(Entity(iri));
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(src.Fetch(c[0]), "a");
  EXPECT_EQ(src.Fetch(c[2]), "c");
  EXPECT_TRUE(src.ListCandidates(Entity("http://mmkb.test/entity/none")).empty());
  EXPECT_THROW(src.Fetch("nope/1.png"), ImageNotFound);
  EXPECT_THROW(LocalDirectorySource(dir / "missing").ListCandidates(Entity(iri)), SourceUnavailable);
}

TEST(HttpListSource, ListsAndFetches) {
  httplib::Server server;
  const std::string png = EncodePng(Gradient(6, 4));
  std::atomic<int> flaky{1};
  server.Get("/list", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.get_param_value("entity") == "http://a/none") {
      res.status = 404;
      return;
    }
    res.set_content("/img/1.png\n/img/flaky.png\n/img/gone.png\n", "text/plain");
  });
  server.Get("/img/1.png", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(png, "image/png");
  });
  server.Get("/img/flaky.png", [&](const httplib::Request&, httplib::Response& res) {
    if (flaky-- > 0) {
      res.status = 503;
      return;
    }
    res.set_content(png + "x", "image/png");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  testing::TempDir dir;
  ContentStore store(dir / "store");
  auto src = MakeImageSource("http://127.0.0.1:" + std::to_string(port));
  const std::vector<select::EntityRecord> es{Entity("http://a/x"), Entity("http://a/none")};
  const Manifest m = FetchImages(es, *src, store, Fast());
  server.stop();
  t.join();
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[1].rank, 1);
  ASSERT_EQ(m.metadata.absent.size(), 1u);
  EXPECT_NE(m.metadata.absent[0].source_locator.find("gone"), std::string::npos);
  EXPECT_EQ(m.metadata.imageless_entities, std::vector<std::string>{"http://a/none"});
}

TEST(HttpListSource, RefusedConnectionIsUnavailable) {
  auto src = MakeImageSource("http://127.0.0.1:1");
  EXPECT_THROW(src->ListCandidates(Entity("http://a/x")), SourceUnavailable);
  EXPECT_THROW(MakeImageSource("ftp://x"), std::invalid_argument);
}

// ---------------------------------------------------------------- manifest

TEST(Manifest, StatusTransitionsOnlyForward) {
  ImageRecord r;
  r.Advance(ImageStatus::kRetained);
  r.Advance(ImageStatus::kRetained);  // same status: no-op
  EXPECT_THROW(r.Advance(ImageStatus::kFilteredOut), std::logic_error);
  EXPECT_THROW(r.Advance(ImageStatus::kFetched), std::logic_error);
  for (ImageStatus to : {ImageStatus::kRejectedCorrupt, ImageStatus::kRejectedAnimated,
                         ImageStatus::kRetained, ImageStatus::kFilteredOut}) {
    EXPECT_TRUE(IsAllowedTransition(ImageStatus::kFetched, to));
    EXPECT_FALSE(IsAllowedTransition(to, ImageStatus::kFetched));
  }
}

TEST(Manifest, JsonlRoundTripAndMetadataCounts) {
  testing::TempDir dir;
  Manifest m;
  m.metadata.fetcher_id = "fake";
  m.metadata.timestamp = "2026-01-01T00:00:00Z";
  m.metadata.imageless_entities = {"http://a/z"};
  m.metadata.absent = {{"http://a/x", "loc", "timeout"}};
  for (int i = 0; i < 4; ++i) {
    ImageRecord r;
    r.image_id = util::Sha256Hex(std::to_string(i));
    r.entity_iri = "http://a/x";
    r.domain = "D";
    r.source_locator = "x/" + std::to_string(i) + "\t\"q\"";
    r.local_path = r.image_id.substr(0, 2) + "/" + r.image_id + ".png";
    r.format = ImageFormat::kPng;
    r.width = 3;
    r.height = 4;
    r.rank = i;
    r.validated = true;
    if (i == 1) r.Advance(ImageStatus::kRejectedCorrupt);
    if (i >= 2) {
      r.Advance(i == 2 ? ImageStatus::kRetained : ImageStatus::kFilteredOut);
      r.anomaly_score = 0.123456789 * i;
    }
    m.records.push_back(r);
  }
  const std::string path = (dir / "m.jsonl").string();
  WriteManifestJsonl(m, path);
  const Manifest back = ReadManifestJsonl(path);
  EXPECT_EQ(back.records, m.records);
  EXPECT_EQ(back.metadata, m.metadata);

  std::ifstream meta(MetadataPath(path));
  const auto j = nlohmann::json::parse(meta);
  EXPECT_EQ(j["counts"]["fetched"], 1);
  EXPECT_EQ(j["counts"]["rejected-corrupt"], 1);
  EXPECT_EQ(j["counts"]["retained"], 1);
  EXPECT_EQ(j["counts"]["filtered-out"], 1);

  const auto line = nlohmann::json::parse(RecordToJson(m.records[3]));
  for (const char* key : {"image-id", "entity-iri", "source-locator", "local-path", "format", "width",
                          "height", "rank", "status", "anomaly-score"}) {
    EXPECT_TRUE(line.contains(key)) << key;
  }
  EXPECT_EQ(line["status"], "filtered-out");
}

TEST(Manifest, RejectsBadRecords) {
  EXPECT_ANY_THROW(RecordFromJson("{}"));
  EXPECT_ANY_THROW(RecordFromJson(R"({"image-id":"x","entity-iri":"http://a","rank":30})"));
  testing::TempDir dir;
  testing::WriteFile(dir / "m.jsonl", "not json\n");
  EXPECT_ANY_THROW(ReadManifestJsonl((dir / "m.jsonl").string()));
}

// ---------------------------------------------------------------- validate

TEST(ValidateManifest, CountIdentity) {
  testing::TempDir dir;
  ContentStore store(dir / "store");
  FakeSource src;
  AddImages(src, "http://a/e", 4);
  const std::string png = EncodePng(Gradient(9, 9));
  src.files["http://a/e/1"] = png.substr(0, png.size() / 2);
  const std::vector<RgbImage> frames{Solid(4, 4, 1, 2, 3), Solid(4, 4, 200, 2, 3)};
  src.files["http://a/e/2"] = EncodeGif(frames);
  const std::vector<select::EntityRecord> es{Entity("http://a/e")};
  Manifest m = FetchImages(es, src, store, Fast());
  const ValidationSummary s = ValidateManifest(m, store);
  EXPECT_EQ(s.ok, 2u);
  EXPECT_EQ(s.corrupt, 1u);
  EXPECT_EQ(s.animated, 1u);
  const auto counts = m.CountByStatus();
  EXPECT_EQ(counts.at(ImageStatus::kRejectedCorrupt), 1u);
  EXPECT_EQ(counts.at(ImageStatus::kRejectedAnimated), 1u);
  EXPECT_EQ(counts.at(ImageStatus::kFetched), 2u);
  EXPECT_EQ(m.records[0].width, 6);
  EXPECT_EQ(m.CandidateImageIds().size(), 2u);
  // A second pass leaves validated records alone.
  const ValidationSummary again = ValidateManifest(m, store);
  EXPECT_EQ(again.ok + again.corrupt + again.animated, 0u);
}

// ---------------------------------------------------------------- synth

std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testing::ReadFile(e.path());
  }
  return out;
}

TEST(Synthesize, DeterministicUnderSeed) {
  testing::TempDir dir;
  CorpusSpec spec;
  spec.entities = 6;
  spec.images_per_entity = 10;
  spec.width = 24;
  spec.height = 16;
  SynthesizeCorpus(spec, 7, dir / "a");
  SynthesizeCorpus(spec, 7, dir / "b");
  SynthesizeCorpus(spec, 8, dir / "c");
  EXPECT_EQ(Snapshot(dir / "a"), Snapshot(dir / "b"));
  EXPECT_NE(Snapshot(dir / "a"), Snapshot(dir / "c"));
}

TEST(Synthesize, LabelsAndCounts) {
  testing::TempDir dir;
  CorpusSpec spec;
  spec.entities = 4;
  spec.images_per_entity = 30;
  spec.corrupt_per_entity = 1;
  spec.animated_per_entity = 2;
  spec.width = 16;
  spec.height = 16;
  const CorpusInfo info = SynthesizeCorpus(spec, 1, dir.path());
  ASSERT_EQ(info.entity_iris.size(), 4u);
  std::map<SampleLabel, int> counts;
  for (const auto& [key, label] : info.labels) ++counts[label];
  EXPECT_EQ(counts[SampleLabel::kOutlier], 4 * 6);
  EXPECT_EQ(counts[SampleLabel::kCorrupt], 4);
  EXPECT_EQ(counts[SampleLabel::kAnimated], 8);
  EXPECT_EQ(counts[SampleLabel::kInlier], 4 * 21);
  EXPECT_EQ(ReadLabels(info.labels_path), info.labels);
  // Files agree with their labels.
  for (const auto& [key, label] : info.labels) {
    const ImageCheck c = ValidateImage(info.images_root / key.second);
    const ImageVerdict expect = label == SampleLabel::kCorrupt    ? ImageVerdict::kCorrupt
                                : label == SampleLabel::kAnimated ? ImageVerdict::kAnimated
                                                                  : ImageVerdict::kOk;
    EXPECT_EQ(c.verdict, expect) << key.second;
  }
}

TEST(Synthesize, ZeroOutliersAndBadFractions) {
  testing::TempDir dir;
  CorpusSpec spec;
  spec.entities = 2;
  spec.images_per_entity = 5;
  spec.outlier_fraction = 0;
  spec.width = 8;
  spec.height = 8;
  const CorpusInfo info = SynthesizeCorpus(spec, 3, dir.path());
  for (const auto& [key, label] : info.labels) EXPECT_EQ(label, SampleLabel::kInlier);
  spec.outlier_fraction = 1.0;
  EXPECT_THROW(SynthesizeCorpus(spec, 3, dir / "x"), std::invalid_argument);
  spec.outlier_fraction = -0.1;
  EXPECT_THROW(SynthesizeCorpus(spec, 3, dir / "y"), std::invalid_argument);
  spec.outlier_fraction = 0.2;
  spec.images_per_entity = 31;
  EXPECT_THROW(SynthesizeCorpus(spec, 3, dir / "z"), std::invalid_argument);
}

}  // namespace
}  // namespace mmkg::ingest
