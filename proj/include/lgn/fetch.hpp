#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "lgn/error.hpp"

// Dataset download with checksum verification. The transport is injected so
// tests (and air-gapped machines) can supply bytes without the network; the
// CLI plugs in an HTTPS client. Files land as <dir>/<name>; a download is
// staged to <name>.part, checksummed, then renamed, so a bad transfer never
// leaves a plausible-looking file behind.

namespace lgn {

struct DatasetFile {
  std::string name;  // on-disk file name
  std::string url;
  std::string md5;  // lowercase hex
};

// Published MD5 sums for the standard IDX distributions.
inline std::vector<DatasetFile> dataset_manifest(const std::string& dataset) {
  const std::string mnist_base = "https://ossci-datasets.s3.amazonaws.com/mnist/";
  const std::string fashion_base =
      "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/";
  if (dataset == "mnist")
    return {
        {"train-images-idx3-ubyte.gz", mnist_base + "train-images-idx3-ubyte.gz",
         "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
        {"train-labels-idx1-ubyte.gz", mnist_base + "train-labels-idx1-ubyte.gz",
         "d53e105ee54ea40749a09fcbcd1e9432"},
        {"t10k-images-idx3-ubyte.gz", mnist_base + "t10k-images-idx3-ubyte.gz",
         "9fb629c4189551a2d022fa330f9573f3"},
        {"t10k-labels-idx1-ubyte.gz", mnist_base + "t10k-labels-idx1-ubyte.gz",
         "ec29112dd5afa0611ce80d1b7f02629c"},
    };
  if (dataset == "fashion")
    return {
        {"train-images-idx3-ubyte.gz", fashion_base + "train-images-idx3-ubyte.gz",
         "8d4fb7e6c68d591d4c3dfef9ec88bf0d"},
        {"train-labels-idx1-ubyte.gz", fashion_base + "train-labels-idx1-ubyte.gz",
         "25c81989df183df01b3e8a0aad5dffbe"},
        {"t10k-images-idx3-ubyte.gz", fashion_base + "t10k-images-idx3-ubyte.gz",
         "bef4ecab320f06d8554ea6380940ec79"},
        {"t10k-labels-idx1-ubyte.gz", fashion_base + "t10k-labels-idx1-ubyte.gz",
         "bb300cfdad3c16e7a12a480ee83cd310"},
    };
  throw ConfigError("fetch: unknown dataset '" + dataset + "' (mnist or fashion)");
}

inline std::string md5_hex(const uint8_t* data, size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_md5(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data, len) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("md5 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string md5_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return md5_hex(bytes.data(), bytes.size());
}

using Downloader = std::function<std::vector<uint8_t>(const std::string& url)>;

struct FetchReport {
  int downloaded = 0;
  int already_present = 0;
};

inline FetchReport fetch_files(const std::vector<DatasetFile>& manifest, const std::string& dir,
                               const Downloader& download) {
  namespace fs = std::filesystem;
  FetchReport report;
  fs::create_directories(dir);
  for (const DatasetFile& file : manifest) {
    fs::path dest = fs::path(dir) / file.name;
    if (fs::exists(dest) && md5_file(dest.string()) == file.md5) {
      ++report.already_present;
      continue;
    }
    std::vector<uint8_t> bytes = download(file.url);
    std::string got = md5_hex(bytes.data(), bytes.size());
    fs::path part = dest;
    part += ".part";
    {
      std::ofstream out(part, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write " + part.string());
      out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    }
    if (got != file.md5) {
      fs::remove(part);
      throw DataError("checksum mismatch for " + file.name + ": expected " + file.md5 +
                      ", got " + got);
    }
    fs::rename(part, dest);
    ++report.downloaded;
  }
  return report;
}

inline FetchReport fetch_dataset(const std::string& dataset, const std::string& dir,
                                 const Downloader& download) {
  return fetch_files(dataset_manifest(dataset), dir, download);
}

}  // namespace lgn
