#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "curate/store_io.hpp"
#include "test_util.hpp"

namespace curate {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("curate_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

std::unique_ptr<ForgetStore> sample_store(StoreVariant variant, std::mt19937_64& rng) {
  auto store = std::make_unique<ForgetStore>();
  for (int i = 0; i < 80; ++i) {
    store->add("question \"" + std::to_string(i) + "\" \xc3\xa9t\xc3\xa9\n", testing::random_unit(10, rng));
  }
  if (variant != StoreVariant::Exact) {
    StoreMode mode;
    mode.variant = variant;
    mode.pca_dim = 5;
    store->compress(mode);
  }
  return store;
}

TEST(Container, CrcMatchesReferenceValue) {
  const std::string s = "123456789";
  EXPECT_EQ(io::crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
            0xCBF43926u);
}

TEST(Container, RoundTripAndUnknownSections) {
  std::vector<io::Section> in = {{"ALPHA", {1, 2, 3}}, {"FUTURE", {}}, {"BETA", {9}}};
  const auto bytes = io::encode_container(in);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CUR8");
  const auto out = io::decode_container(bytes);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].tag, "ALPHA");
  EXPECT_EQ(out[2].payload, (std::vector<std::uint8_t>{9}));
  EXPECT_EQ(io::find_section(out, "MISSING"), nullptr);
}

TEST(Container, DetectsCorruption) {
  const auto bytes = io::encode_container({{"DATA", {1, 2, 3, 4, 5, 6, 7, 8}}});
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    const std::vector<std::uint8_t> prefix(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    EXPECT_THROW(io::decode_container(prefix), Error) << cut;
  }
  auto flipped = bytes;
  flipped[flipped.size() - 6] ^= 0x40;  // inside the payload
  EXPECT_EQ(code_of([&] { io::decode_container(flipped); }), ErrorCode::ChecksumError);

  auto versioned = bytes;
  versioned[4] = 99;
  EXPECT_EQ(code_of([&] { io::decode_container(versioned); }), ErrorCode::VersionError);

  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(io::decode_container(magic), Error);
}

TEST(StoreFile, RoundTripEveryVariant) {
  TempDir dir;
  std::mt19937_64 rng(31);
  for (auto variant : {StoreVariant::Exact, StoreVariant::Compressed, StoreVariant::Clustered}) {
    const auto store = sample_store(variant, rng);
    const auto path = dir / ("store_" + to_string(variant) + ".bin");
    io::save_store(path, *store, {{"note", "hello"}});
    const auto back = io::load_store(path);
    EXPECT_EQ(back->count(), store->count());
    EXPECT_EQ(back->variant(), variant);
    EXPECT_EQ(back->scored_rows(), store->scored_rows());
    for (std::size_t i = 0; i < store->count(); ++i) {
      EXPECT_EQ(back->record_meta(i).id, store->record_meta(i).id);
      EXPECT_EQ(back->record_meta(i).text, store->record_meta(i).text);
      EXPECT_EQ(back->record_meta(i).accepted_at, store->record_meta(i).accepted_at);
    }
    for (int q = 0; q < 25; ++q) {
      const auto v = testing::random_unit(10, rng);
      EXPECT_EQ(back->max_similarity(v).score, store->max_similarity(v).score);
    }
    EXPECT_EQ(io::load_meta(path)["note"], "hello");
    // Loaded stores keep accepting records with fresh ids.
    const auto added = back->add("new", testing::random_unit(10, rng));
    for (std::size_t i = 0; i < store->count(); ++i) EXPECT_NE(added.id, store->record_meta(i).id);
  }
}

TEST(StoreFile, EmptyStoreRoundTrips) {
  TempDir dir;
  ForgetStore store;
  io::save_store(dir / "empty.bin", store);
  const auto back = io::load_store(dir / "empty.bin");
  EXPECT_EQ(back->count(), 0u);
  EXPECT_FALSE(back->max_similarity(EmbeddingVector{1, 0}).score.has_value());
}

TEST(StoreFile, TruncatedFileIsChecksumError) {
  TempDir dir;
  std::mt19937_64 rng(32);
  const auto store = sample_store(StoreVariant::Exact, rng);
  const auto path = dir / "s.bin";
  io::save_store(path, *store);
  const auto size = fs::file_size(path);
  fs::resize_file(path, size / 2);
  EXPECT_EQ(code_of([&] { io::load_store(path); }), ErrorCode::ChecksumError);
  EXPECT_EQ(code_of([&] { io::load_store(dir / "missing.bin"); }), ErrorCode::IoError);
}

TEST(StoreFile, WrongSectionIsParseError) {
  TempDir dir;
  io::save_head(dir / "head.bin", ProjectionHead::identity(3));
  EXPECT_EQ(code_of([&] { io::load_store(dir / "head.bin"); }), ErrorCode::ParseError);
}

TEST(StoreFile, NoTempFileLeftBehind) {
  TempDir dir;
  std::mt19937_64 rng(33);
  const auto store = sample_store(StoreVariant::Exact, rng);
  io::save_store(dir / "s.bin", *store);
  io::save_store(dir / "s.bin", *store);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "")) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1);
}

TEST(HeadFile, RoundTripIsExact) {
  TempDir dir;
  auto head = ProjectionHead::random(7, 11, 4);
  head.bias()[2] = -0.123456789012345;
  io::save_head(dir / "h.bin", head, {{"epochs", 1}});
  EXPECT_EQ(io::load_head(dir / "h.bin"), head);
  EXPECT_EQ(io::load_meta(dir / "h.bin")["epochs"], 1);
}

TEST(Dataset, RoundTripPreservesEverything) {
  TempDir dir;
  TrainingDataset d = {{"q \"quoted\"", "p\tx", 1, 1, "s1", {}},
                       {"q", "c", 0, 2, "s1", {}},
                       {"p", "pc", 0, 3, "s1", {}},
                       {"a", "b", 0, 2, "s2", "s3"}};
  io::save_dataset(dir / "d.jsonl", d);
  EXPECT_EQ(io::load_dataset(dir / "d.jsonl").dataset, d);
}

TEST(Dataset, StrictAndLenientModes) {
  TempDir dir;
  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"a":"x","b":"y","label":1,"type":1,"seed_id":"s"})" << "\n";
    out << R"({"a":"x","b":"y","label":2,"type":1,"seed_id":"s"})" << "\n";
    out << "not json\n\n";
    out << R"({"a":"x","b":"z","label":0,"type":2,"seed_id":"s"})" << "\n";
  }
  try {
    io::load_dataset(dir / "bad.jsonl", true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  const auto lenient = io::load_dataset(dir / "bad.jsonl", false);
  EXPECT_EQ(lenient.dataset.size(), 2u);
  ASSERT_EQ(lenient.skipped.size(), 2u);
  EXPECT_EQ(lenient.skipped[0].line, 2u);
  EXPECT_EQ(lenient.skipped[1].line, 3u);
}

TEST(Seeds, JsonlAndPlainText) {
  TempDir dir;
  {
    std::ofstream out(dir / "seeds.jsonl");
    out << R"({"id":"a","question":"who?","answer":"me"})" << "\n"
        << R"({"question":"when?"})" << "\n";
    std::ofstream plain(dir / "seeds.txt");
    plain << "first question\n\nsecond question\n";
  }
  const auto j = io::load_seeds(dir / "seeds.jsonl");
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].id, "a");
  EXPECT_EQ(j[0].answer, "me");
  EXPECT_EQ(j[1].id, "s2");
  const auto p = io::load_seeds(dir / "seeds.txt");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[1].id, "s3");
  EXPECT_EQ(p[1].text, "second question");
}

}  // namespace
}  // namespace curate
