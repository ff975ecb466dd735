#include "mmkg/features/embedding.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "mmkg/util/tsv.h"

namespace mmkg::features {

namespace {

constexpr int kSide = 64;
constexpr int kGrid = 4;
constexpr int kBins = 32;

struct Weight {
  int index;
  double w;
};

// Per output position, the source pixels it covers and their coverage.
std::vector<std::vector<Weight>> AreaWeights(int src, int dst) {
  std::vector<std::vector<Weight>> out(static_cast<size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    const double a = o * scale, b = (o + 1) * scale;
    const int first = static_cast<int>(std::floor(a));
    const int last = std::min(src - 1, static_cast<int>(std::ceil(b)) - 1);
    for (int s = first; s <= last; ++s) {
      const double cover = std::min(b, s + 1.0) - std::max(a, static_cast<double>(s));
      if (cover > 0) out[static_cast<size_t>(o)].push_back({s, cover / scale});
    }
  }
  return out;
}

// Resampled channels in [0, 255], row-major, 3 per pixel.
std::vector<double> ResampleToDoubles(const ingest::RgbImage& img, int dw, int dh) {
  if (img.width <= 0 || img.height <= 0) throw EmbeddingError("cannot describe an empty image");
  const auto wx = AreaWeights(img.width, dw);
  const auto wy = AreaWeights(img.height, dh);
  std::vector<double> horiz(static_cast<size_t>(dw) * img.height * 3, 0.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < dw; ++x) {
      double* out = &horiz[(static_cast<size_t>(y) * dw + x) * 3];
      for (const Weight& w : wx[static_cast<size_t>(x)]) {
        const std::uint8_t* p = img.at(w.index, y);
        for (int c = 0; c < 3; ++c) out[c] += w.w * p[c];
      }
    }
  }
  std::vector<double> result(static_cast<size_t>(dw) * dh * 3, 0.0);
  for (int y = 0; y < dh; ++y) {
    for (const Weight& w : wy[static_cast<size_t>(y)]) {
      for (int x = 0; x < dw; ++x) {
        const double* in = &horiz[(static_cast<size_t>(w.index) * dw + x) * 3];
        double* out = &result[(static_cast<size_t>(y) * dw + x) * 3];
        for (int c = 0; c < 3; ++c) out[c] += w.w * in[c];
      }
    }
  }
  return result;
}

void PutLe(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint64_t GetLe(const std::string& buf, size_t& pos, int bytes, const char* what) {
  if (pos + static_cast<size_t>(bytes) > buf.size()) {
    throw EmbeddingError(std::string("truncated embedding file while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  pos += static_cast<size_t>(bytes);
  return v;
}

std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingError("cannot open embedding file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void CheckFinite(std::span<const float> v, size_t row) {
  for (float x : v) {
    if (!std::isfinite(x)) {
      throw EmbeddingError("row " + std::to_string(row) + " has a non-finite value");
    }
  }
}

EmbeddingMatrix ParseBinary(const std::string& buf) {
  size_t pos = 8;
  const std::uint64_t dim = GetLe(buf, pos, 4, "dim");
  if (dim != kEmbeddingDim) {
    throw EmbeddingError("embedding dim is " + std::to_string(dim) + ", expected " +
                         std::to_string(kEmbeddingDim));
  }
  const std::uint64_t count = GetLe(buf, pos, 8, "count");
  EmbeddingMatrix m("external");
  Vector row;
  for (std::uint64_t r = 0; r < count; ++r) {
    const size_t len = GetLe(buf, pos, 2, "id length");
    if (pos + len > buf.size()) throw EmbeddingError("truncated embedding file in row id");
    std::string id = buf.substr(pos, len);
    pos += len;
    for (int k = 0; k < kEmbeddingDim; ++k) {
      row[static_cast<size_t>(k)] =
          std::bit_cast<float>(static_cast<std::uint32_t>(GetLe(buf, pos, 4, "row values")));
    }
    CheckFinite(row, r);
    m.AddRow(id, row);
  }
  if (pos != buf.size()) throw EmbeddingError("trailing bytes after the declared row count");
  return m;
}

EmbeddingMatrix ParseTsv(const std::string& buf) {
  std::istringstream in(buf);
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string hash, magic, field;
  header >> hash >> magic;
  long dim = -1, count = -1;
  std::string extractor = "external";
  while (header >> field) {
    if (field.rfind("dim=", 0) == 0) dim = std::stol(field.substr(4));
    else if (field.rfind("count=", 0) == 0) count = std::stol(field.substr(6));
    else if (field.rfind("extractor=", 0) == 0) extractor = field.substr(10);
  }
  if (dim != kEmbeddingDim) {
    throw EmbeddingError("embedding dim is " + std::to_string(dim) + ", expected " +
                         std::to_string(kEmbeddingDim));
  }
  EmbeddingMatrix m(extractor);
  Vector row;
  size_t r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = util::SplitTsvLine(line);
    if (fields.size() != kEmbeddingDim + 1) {
      throw EmbeddingError("row " + std::to_string(r) + " has " + std::to_string(fields.size() - 1) +
                           " values");
    }
    for (int k = 0; k < kEmbeddingDim; ++k) {
      const std::string& f = fields[static_cast<size_t>(k) + 1];
      char* end = nullptr;
      row[static_cast<size_t>(k)] = std::strtof(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0') {
        throw EmbeddingError("row " + std::to_string(r) + " has a malformed value '" + f + "'");
      }
    }
    CheckFinite(row, r);
    m.AddRow(fields[0], row);
    ++r;
  }
  if (count >= 0 && static_cast<size_t>(count) != r) {
    throw EmbeddingError("header declares " + std::to_string(count) + " rows, file has " +
                         std::to_string(r));
  }
  return m;
}

std::string JoinSome(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size() && i < 10; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 10) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

void EmbeddingMatrix::AddRow(const std::string& image_id, std::span<const float> values) {
  if (values.size() != kEmbeddingDim) throw EmbeddingError("row for " + image_id + " has wrong dim");
  if (!index_.emplace(image_id, ids_.size()).second) {
    throw EmbeddingError("duplicate embedding row for " + image_id);
  }
  ids_.push_back(image_id);
  data_.insert(data_.end(), values.begin(), values.end());
}

long EmbeddingMatrix::IndexOf(const std::string& image_id) const {
  auto it = index_.find(image_id);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

double L2Norm(std::span<const float> v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

double Cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0;
  for (size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  return dot / (L2Norm(a) * L2Norm(b));
}

ingest::RgbImage ResampleArea(const ingest::RgbImage& image, int width, int height) {
  const std::vector<double> d = ResampleToDoubles(image, width, height);
  ingest::RgbImage out(width, height);
  for (size_t i = 0; i < d.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, d[i]))));
  }
  return out;
}

Vector DescribeImage(const ingest::RgbImage& image) {
  const std::vector<double> px = ResampleToDoubles(image, kSide, kSide);
  std::array<double, kEmbeddingDim> v{};
  constexpr int cell = kSide / kGrid;
  for (int gy = 0; gy < kGrid; ++gy) {
    for (int gx = 0; gx < kGrid; ++gx) {
      // Two passes: the deviation sum is exactly 0 for a flat cell.
      double sum[3] = {0, 0, 0}, dev[3] = {0, 0, 0};
      for (int y = gy * cell; y < (gy + 1) * cell; ++y) {
        for (int x = gx * cell; x < (gx + 1) * cell; ++x) {
          const double* p = &px[(static_cast<size_t>(y) * kSide + x) * 3];
          for (int c = 0; c < 3; ++c) sum[c] += p[c];
        }
      }
      const double n = cell * cell;
      double mean[3];
      for (int c = 0; c < 3; ++c) mean[c] = sum[c] / n;
      for (int y = gy * cell; y < (gy + 1) * cell; ++y) {
        for (int x = gx * cell; x < (gx + 1) * cell; ++x) {
          const double* p = &px[(static_cast<size_t>(y) * kSide + x) * 3];
          for (int c = 0; c < 3; ++c) {
            const double d = p[c] - mean[c];
            dev[c] += d * d;
          }
        }
      }
      double* out = &v[static_cast<size_t>(gy * kGrid + gx) * 6];
      for (int c = 0; c < 3; ++c) {
        out[c] = mean[c] / 255.0;
        out[3 + c] = std::sqrt(dev[c] / n) / 255.0;
      }
    }
  }
  double* hist = &v[kGrid * kGrid * 6];
  for (size_t i = 0; i < px.size(); i += 3) {
    const double y = (299.0 * px[i] + 587.0 * px[i + 1] + 114.0 * px[i + 2]) / 1000.0;  // exact for grays
    const int bin = std::min(kBins - 1, std::max(0, static_cast<int>(y * kBins / 256.0)));
    hist[bin] += 1.0;
  }
  for (int b = 0; b < kBins; ++b) hist[b] /= static_cast<double>(kSide * kSide);

  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);  // >= 1/sqrt(32): the histogram has unit mass
  Vector out;
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

EmbeddingMatrix ExtractBuiltin(const ingest::Manifest& manifest, const ingest::ContentStore& store,
                               int workers) {
  const std::vector<std::string> ids = manifest.CandidateImageIds();
  std::unordered_map<std::string, const ingest::ImageRecord*> first;
  for (const auto& r : manifest.records) first.emplace(r.image_id, &r);

  std::vector<Vector> rows(ids.size());
  std::vector<std::string> errors(ids.size());
  auto work = [&](size_t begin, size_t step) {
    for (size_t i = begin; i < ids.size(); i += step) {
      const ingest::ImageRecord& r = *first.at(ids[i]);
      if (!r.validated) {
        errors[i] = "image " + r.image_id + " has not been validated";
        continue;
      }
      try {
        rows[i] = DescribeImage(ingest::DecodeImage(ingest::ReadFileBytes(store.Resolve(r.local_path))));
      } catch (const std::exception& e) {
        errors[i] = "image " + r.image_id + " is unreadable: " + e.what();
      }
    }
  };
  const size_t n_workers = static_cast<size_t>(std::max(1, workers));
  if (n_workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (size_t w = 0; w < n_workers; ++w) threads.emplace_back(work, w, n_workers);
    for (auto& t : threads) t.join();
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw EmbeddingError(e);
  }
  EmbeddingMatrix m(kBuiltinExtractorId);
  for (size_t i = 0; i < ids.size(); ++i) m.AddRow(ids[i], rows[i]);
  return m;
}

void WriteEmbeddingsBinary(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::string out(kExchangeMagic, 8);
  PutLe(out, kEmbeddingDim, 4);
  PutLe(out, m.rows(), 8);
  for (size_t r = 0; r < m.rows(); ++r) {
    const std::string& id = m.ids()[r];
    if (id.size() > 0xffff) throw EmbeddingError("image id too long: " + id);
    PutLe(out, id.size(), 2);
    out += id;
    for (float x : m.row(r)) PutLe(out, std::bit_cast<std::uint32_t>(x), 4);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw EmbeddingError("cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void WriteEmbeddingsTsv(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw EmbeddingError("cannot write " + path.string());
  f << "# " << kExchangeMagic << " dim=" << kEmbeddingDim << " count=" << m.rows()
    << " extractor=" << (m.extractor_id().empty() ? "unknown" : m.extractor_id()) << '\n';
  char buf[32];
  for (size_t r = 0; r < m.rows(); ++r) {
    f << util::EscapeTsvField(m.ids()[r]);
    for (float x : m.row(r)) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(x));
      f << '\t' << buf;
    }
    f << '\n';
  }
}

EmbeddingMatrix ReadEmbeddings(const std::filesystem::path& path) {
  const std::string buf = Slurp(path);
  if (buf.size() >= 8 && std::memcmp(buf.data(), kExchangeMagic, 8) == 0) return ParseBinary(buf);
  if (buf.rfind(std::string("# ") + kExchangeMagic, 0) == 0) return ParseTsv(buf);
  throw EmbeddingError(path.string() + " is not an embedding exchange file (bad magic)");
}

EmbeddingMatrix LoadExternal(const std::filesystem::path& path, const ingest::Manifest& manifest) {
  const EmbeddingMatrix raw = ReadEmbeddings(path);
  const std::vector<std::string> want = manifest.CandidateImageIds();

  std::vector<std::string> missing, extra;
  for (const std::string& id : want) {
    if (raw.IndexOf(id) < 0) missing.push_back(id);
  }
  std::unordered_map<std::string, bool> wanted;
  for (const std::string& id : want) wanted[id] = true;
  for (const std::string& id : raw.ids()) {
    if (!wanted.count(id)) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "embedding ids do not match the manifest";
    if (!missing.empty()) msg += "; missing: " + JoinSome(missing);
    if (!extra.empty()) msg += "; extra: " + JoinSome(extra);
    throw EmbeddingError(msg);
  }

  EmbeddingMatrix m(raw.extractor_id());
  Vector row;
  for (const std::string& id : want) {
    const size_t r = static_cast<size_t>(raw.IndexOf(id));
    const double norm = L2Norm(raw.row(r));
    if (std::fabs(norm - 1.0) > 1e-3) {
      throw EmbeddingError("row " + std::to_string(r) + " (" + id + ") has norm " +
                           std::to_string(norm) + ", not within 1e-3 of 1");
    }
    // Rows already unit-norm to float precision are kept bit-exact.
    const double scale = std::fabs(norm - 1.0) <= 1e-6 ? 1.0 : norm;
    for (int k = 0; k < kEmbeddingDim; ++k) {
      row[static_cast<size_t>(k)] = static_cast<float>(raw.row(r)[static_cast<size_t>(k)] / scale);
    }
    m.AddRow(id, row);
  }
  return m;
}

}  // namespace mmkg::features
