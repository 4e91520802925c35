#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "facetts/common/errors.hpp"
#include "facetts/corpus/corpus.hpp"
#include "facetts/dsp/audio.hpp"

namespace fs = std::filesystem;
namespace corpus = facetts::corpus;
namespace dsp = facetts::dsp;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("facetts_corpus_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Energy-weighted mean band index over bands centered below 400 Hz, averaged over voiced frames.
double pitch_band_centroid(const facetts::Matrix& mel) {
  const auto& centers = dsp::MelFilterbank::standard().center_hz();
  double total = 0.0;
  std::size_t voiced = 0;
  for (std::size_t t = 0; t < mel.rows; ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t m = 0; m < mel.cols && centers[m] < 400.0; ++m) {
      const double e = std::exp(mel(t, m));
      num += e * static_cast<double>(m);
      den += e;
    }
    if (den < 1e-2) continue;
    total += num / den;
    ++voiced;
  }
  return total / static_cast<double>(voiced);
}

std::vector<double> mean_frame(const facetts::Matrix& mel) {
  std::vector<double> v(mel.cols, 0.0);
  for (std::size_t t = 0; t < mel.rows; ++t) {
    for (std::size_t m = 0; m < mel.cols; ++m) v[m] += mel(t, m) / static_cast<double>(mel.rows);
  }
  return v;
}

struct SharedCorpus {
  fs::path dir;
  std::vector<corpus::CorpusItem> items;
};

const SharedCorpus& eight_by_six() {
  static const SharedCorpus c = [] {
    SharedCorpus s;
    s.dir = scratch("shared");
    corpus::CorpusOptions opt;
    opt.seed = 11;
    opt.identities = 8;
    opt.utterances_per_identity = 6;
    opt.test_per_identity = 2;
    s.items = corpus::load_items(corpus::generate_corpus(opt, s.dir));
    return s;
  }();
  return c;
}

}  // namespace

TEST(IdentityLatent, DeterministicAndInRange) {
  for (std::size_t id = 0; id < 50; ++id) {
    const auto a = corpus::identity_latent(3, id);
    const auto b = corpus::identity_latent(3, id);
    EXPECT_EQ(a.pitch_base, b.pitch_base);
    EXPECT_EQ(a.palette_seed, b.palette_seed);
    EXPECT_GE(a.pitch_base, 90.0);
    EXPECT_LE(a.pitch_base, 300.0);
    EXPECT_GE(a.tilt, -1.0);
    EXPECT_LE(a.tilt, 1.0);
    EXPECT_GE(a.rate, 0.7);
    EXPECT_LE(a.rate, 1.3);
  }
  EXPECT_NE(corpus::identity_latent(3, 0).pitch_base, corpus::identity_latent(4, 0).pitch_base);
}

TEST(GenerateCorpus, CountsRecordsAndLabels) {
  const auto dir = scratch("count");
  corpus::CorpusOptions opt;
  opt.seed = 5;
  opt.identities = 4;
  opt.utterances_per_identity = 10;
  opt.test_per_identity = 2;
  const auto m = corpus::generate_corpus(opt, dir);
  EXPECT_EQ(m.records.size(), 40u);
  std::set<std::size_t> labels;
  for (const auto& r : m.records) labels.insert(r.identity);
  EXPECT_EQ(labels.size(), 4u);
  const auto loaded = corpus::load_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(loaded.manifest.records.size(), 40u);
  EXPECT_TRUE(loaded.report.missing.empty());
  EXPECT_TRUE(loaded.report.too_short.empty());
  EXPECT_EQ(corpus::load_manifest(dir / "train.jsonl").manifest.records.size(), 32u);
  EXPECT_EQ(corpus::load_manifest(dir / "test.jsonl").manifest.records.size(), 8u);
  fs::remove_all(dir);
}

TEST(GenerateCorpus, SameSeedIsByteIdentical) {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  corpus::CorpusOptions opt;
  opt.seed = 9;
  opt.identities = 2;
  opt.utterances_per_identity = 2;
  opt.test_per_identity = 1;
  corpus::generate_corpus(opt, a);
  corpus::generate_corpus(opt, b);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 2u * 4u + 3u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(GenerateCorpus, UtterancesClearTheLengthFilterAndFacesAre224) {
  for (const auto& it : eight_by_six().items) {
    EXPECT_GE(it.mel.rows, dsp::frame_count(static_cast<std::size_t>(1.3 * dsp::kSampleRate)));
    EXPECT_EQ(it.face.chw.size(), 3u * 224u * 224u);
  }
}

TEST(GenerateCorpus, RejectsSingleIdentity) {
  corpus::CorpusOptions opt;
  opt.identities = 1;
  EXPECT_THROW(corpus::generate_corpus(opt, scratch("one")), facetts::InputError);
}

TEST(GenerateCorpus, UnwritableDirectoryIsIoError) {
  const auto blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  corpus::CorpusOptions opt;
  opt.identities = 2;
  opt.utterances_per_identity = 1;
  opt.test_per_identity = 0;
  EXPECT_THROW(corpus::generate_corpus(opt, blocker / "sub"), facetts::IoError);
  fs::remove(blocker);
}

TEST(GenerateCorpus, PitchCentroidGroupsByIdentity) {
  const auto& items = eight_by_six().items;
  std::map<std::size_t, std::vector<double>> by_id;
  for (const auto& it : items) by_id[it.identity].push_back(pitch_band_centroid(it.mel));
  std::map<std::size_t, double> centroid;
  for (const auto& [id, cs] : by_id) {
    double s = 0.0;
    for (double c : cs) s += c;
    centroid[id] = s / static_cast<double>(cs.size());
  }
  for (const auto& [id, cs] : by_id) {
    for (std::size_t a = 0; a < cs.size(); ++a) {
      for (std::size_t b = a + 1; b < cs.size(); ++b) {
        for (const auto& [other, c] : centroid) {
          if (other == id) continue;
          EXPECT_LT(std::abs(cs[a] - cs[b]), std::abs(cs[a] - c)) << "identity " << id << " vs " << other;
        }
      }
    }
  }
  // Monotone in the generating pitch.
  std::vector<std::pair<double, double>> pairs;
  for (const auto& [id, c] : centroid) pairs.emplace_back(corpus::identity_latent(11, id).pitch_base, c);
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 1; i < pairs.size(); ++i) EXPECT_GT(pairs[i].second, pairs[i - 1].second);
}

TEST(GenerateCorpus, NearestCentroidSeparatesIdentities) {
  const auto& items = eight_by_six().items;
  std::map<std::size_t, std::vector<double>> sums;
  std::map<std::size_t, std::size_t> counts;
  std::map<std::size_t, std::size_t> seen;
  std::vector<const corpus::CorpusItem*> held_out;
  for (const auto& it : items) {
    if (seen[it.identity]++ % 2 == 1) {
      held_out.push_back(&it);
      continue;
    }
    const auto v = mean_frame(it.mel);
    auto& s = sums[it.identity];
    s.resize(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) s[i] += v[i];
    ++counts[it.identity];
  }
  std::size_t correct = 0;
  for (const auto* it : held_out) {
    const auto v = mean_frame(it->mel);
    double best = 1e300;
    std::size_t arg = 0;
    for (const auto& [id, s] : sums) {
      double d = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) d += std::pow(v[i] - s[i] / counts[id], 2);
      if (d < best) best = d, arg = id;
    }
    correct += arg == it->identity;
  }
  EXPECT_GE(static_cast<double>(correct) / held_out.size(), 0.9);
}

TEST(LoadManifest, EmptyFileIsEmptyManifest) {
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  std::ofstream(dir / "m.jsonl").close();
  const auto r = corpus::load_manifest(dir / "m.jsonl");
  EXPECT_TRUE(r.manifest.records.empty());
  EXPECT_TRUE(r.report.missing.empty());
  EXPECT_TRUE(r.report.too_short.empty());
  fs::remove_all(dir);
}

TEST(LoadManifest, MissingWavIsExcludedAndListed) {
  const auto dir = scratch("missing");
  fs::create_directories(dir);
  std::ofstream(dir / "m.jsonl")
      << R"({"utt_id":"u1","wav":"nope.wav","transcript":"hi","face":"nope.ppm","identity":0})" << '\n';
  const auto r = corpus::load_manifest(dir / "m.jsonl");
  EXPECT_TRUE(r.manifest.records.empty());
  ASSERT_EQ(r.report.missing.size(), 1u);
  EXPECT_EQ(r.report.missing[0], "u1");
  fs::remove_all(dir);
}

TEST(LoadManifest, ShortUtteranceIsExcluded) {
  const auto dir = scratch("short");
  fs::create_directories(dir);
  dsp::WaveForm w;
  w.samples.assign(static_cast<std::size_t>(1.2 * dsp::kSampleRate), 0.0);
  dsp::write_wav(dir / "a.wav", w);
  w.samples.assign(static_cast<std::size_t>(1.4 * dsp::kSampleRate), 0.0);
  dsp::write_wav(dir / "b.wav", w);
  std::ofstream(dir / "f.ppm") << "P6\n1 1\n255\n" << std::string(3, '\0');
  std::ofstream(dir / "m.jsonl")
      << R"({"utt_id":"short","wav":"a.wav","transcript":"hi","face":"f.ppm","identity":0})" << '\n'
      << R"({"utt_id":"long","wav":"b.wav","transcript":"hi","face":"f.ppm","identity":0})" << '\n';
  const auto r = corpus::load_manifest(dir / "m.jsonl");
  ASSERT_EQ(r.manifest.records.size(), 1u);
  EXPECT_EQ(r.manifest.records[0].utt_id, "long");
  ASSERT_EQ(r.report.too_short.size(), 1u);
  EXPECT_EQ(r.report.too_short[0].first, "short");
  EXPECT_NEAR(r.report.too_short[0].second, 1.2, 1e-9);
  // 1.4 s total for identity 0 is under the 10 s guideline.
  EXPECT_EQ(r.report.warnings.size(), 1u);
  fs::remove_all(dir);
}

TEST(LoadManifest, MalformedRecordReportsLine) {
  const auto dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "m.jsonl") << "\n{\"utt_id\":\"x\"}\n";
  try {
    corpus::load_manifest(dir / "m.jsonl");
    FAIL() << "expected ParseError";
  } catch (const facetts::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  fs::remove_all(dir);
}

TEST(LoadManifest, MissingFileIsIoError) {
  EXPECT_THROW(corpus::load_manifest("/nonexistent/manifest.jsonl"), facetts::IoError);
}
