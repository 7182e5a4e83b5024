// Tests for dataset fetching with an injected downloader: manifest lookup,
// MD5 verification against RFC 1321 reference digests, idempotent re-runs,
// and cleanup after checksum failures.
#include "lgn/fetch.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace lgn {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("lgn-fetch-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Reference digests from the MD5 specification's own test suite.
const char* kMd5Empty = "d41d8cd98f00b204e9800998ecf8427e";
const char* kMd5Abc = "900150983cd24fb0d6963f7d28e17f72";
const char* kMd5MessageDigest = "f96b697d7cb7938d525a2f31aaf161d0";

TEST(Md5, MatchesReferenceTestVectors) {
  EXPECT_EQ(md5_hex(nullptr, 0), kMd5Empty);
  const std::string abc = "abc";
  EXPECT_EQ(md5_hex(reinterpret_cast<const uint8_t*>(abc.data()), abc.size()), kMd5Abc);
  const std::string md = "message digest";
  EXPECT_EQ(md5_hex(reinterpret_cast<const uint8_t*>(md.data()), md.size()),
            kMd5MessageDigest);
}

TEST(Md5, FileDigestMatchesInMemoryDigest) {
  TempDir tmp;
  fs::create_directories(tmp.path);
  fs::path p = tmp.path / "abc.bin";
  std::ofstream(p, std::ios::binary) << "abc";
  EXPECT_EQ(md5_file(p.string()), kMd5Abc);
  EXPECT_THROW(md5_file((tmp.path / "absent").string()), DataError);
}

TEST(Manifest, KnownDatasetsHaveFourFilesEach) {
  for (const char* name : {"mnist", "fashion"}) {
    auto files = dataset_manifest(name);
    ASSERT_EQ(files.size(), 4u) << name;
    for (const auto& f : files) {
      EXPECT_FALSE(f.name.empty());
      EXPECT_EQ(f.url.find("http"), 0u);
      EXPECT_EQ(f.md5.size(), 32u);
    }
  }
  EXPECT_THROW(dataset_manifest("cifar"), ConfigError);
}

std::vector<DatasetFile> toy_manifest() {
  return {
      {"a.bin", "mem://a", kMd5Abc},
      {"b.bin", "mem://b", kMd5MessageDigest},
  };
}

Downloader memory_downloader(int& calls) {
  return [&calls](const std::string& url) -> std::vector<uint8_t> {
    ++calls;
    std::string body;
    if (url == "mem://a") body = "abc";
    else if (url == "mem://b") body = "message digest";
    else throw DataError("unexpected url " + url);
    return std::vector<uint8_t>(body.begin(), body.end());
  };
}

TEST(Fetch, DownloadsVerifiesAndWritesFiles) {
  TempDir tmp;
  int calls = 0;
  FetchReport r = fetch_files(toy_manifest(), tmp.path.string(), memory_downloader(calls));
  EXPECT_EQ(r.downloaded, 2);
  EXPECT_EQ(r.already_present, 0);
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(md5_file((tmp.path / "a.bin").string()), kMd5Abc);
  EXPECT_EQ(md5_file((tmp.path / "b.bin").string()), kMd5MessageDigest);
  EXPECT_FALSE(fs::exists(tmp.path / "a.bin.part"));
}

TEST(Fetch, SecondRunIsIdempotentAndOffline) {
  TempDir tmp;
  int calls = 0;
  fetch_files(toy_manifest(), tmp.path.string(), memory_downloader(calls));
  FetchReport r = fetch_files(toy_manifest(), tmp.path.string(),
                              [](const std::string& url) -> std::vector<uint8_t> {
                                throw DataError("network must not be touched, asked for " + url);
                              });
  EXPECT_EQ(r.downloaded, 0);
  EXPECT_EQ(r.already_present, 2);
}

TEST(Fetch, CorruptLocalFileIsReplaced) {
  TempDir tmp;
  int calls = 0;
  fetch_files(toy_manifest(), tmp.path.string(), memory_downloader(calls));
  std::ofstream(tmp.path / "a.bin", std::ios::binary | std::ios::trunc) << "tampered";
  FetchReport r = fetch_files(toy_manifest(), tmp.path.string(), memory_downloader(calls));
  EXPECT_EQ(r.downloaded, 1);
  EXPECT_EQ(r.already_present, 1);
  EXPECT_EQ(md5_file((tmp.path / "a.bin").string()), kMd5Abc);
}

TEST(Fetch, ChecksumMismatchThrowsAndLeavesNoFile) {
  TempDir tmp;
  std::vector<DatasetFile> manifest = {{"a.bin", "mem://a", kMd5Abc}};
  auto bad = [](const std::string&) {
    return std::vector<uint8_t>{'n', 'o', 'p', 'e'};
  };
  try {
    fetch_files(manifest, tmp.path.string(), bad);
    FAIL() << "mismatched digest must throw";
  } catch (const DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("checksum mismatch"), std::string::npos);
    EXPECT_NE(msg.find("a.bin"), std::string::npos);
    EXPECT_NE(msg.find(kMd5Abc), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(tmp.path / "a.bin"));
  EXPECT_FALSE(fs::exists(tmp.path / "a.bin.part"));
}

TEST(Fetch, DatasetWrapperUsesTheManifest) {
  TempDir tmp;
  std::vector<std::string> urls;
  auto recorder = [&urls](const std::string& url) -> std::vector<uint8_t> {
    urls.push_back(url);
    return {};  // empty body: digest will not match the published sums
  };
  EXPECT_THROW(fetch_dataset("mnist", tmp.path.string(), recorder), DataError);
  ASSERT_FALSE(urls.empty());
  EXPECT_EQ(urls[0], dataset_manifest("mnist")[0].url);
  EXPECT_THROW(fetch_dataset("imagenet", tmp.path.string(), recorder), ConfigError);
}

}  // namespace
}  // namespace lgn
