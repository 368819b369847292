#ifndef BDSDE_CLI_OUTPUT_HPP
#define BDSDE_CLI_OUTPUT_HPP

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "bdsde/error.hpp"

namespace bdsde::cli {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kToolName = "bdsde-cli";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest-form is not used on purpose: 17 significant digits round-trip
/// every double and give the same bytes on every platform.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// JSON cannot hold non-finite numbers; those become strings.
inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline json json_optional(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

/// Comma-separated rows with LF endings.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) buf_ += ',';
      buf_ += cells[i];
    }
    buf_ += '\n';
  }

  const std::string& str() const noexcept { return buf_; }

 private:
  std::string buf_;
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, p.string() + ":0: cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes output files under one directory and keeps their digests for the
/// run manifest.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
    files_.push_back({name, sha256_hex(content), content.size()});
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  json listing() const {
    json arr = json::array();
    for (const auto& f : files_) arr.push_back({{"path", f.name}, {"sha256", f.digest}, {"bytes", f.bytes}});
    return arr;
  }

 private:
  struct Entry {
    std::string name;
    std::string digest;
    std::size_t bytes;
  };

  std::filesystem::path dir_;
  std::vector<Entry> files_;
};

/// Everything except `runtime` is a pure function of config and seed.
struct ManifestInfo {
  std::string command;
  std::uint64_t seed = 0;
  json config;
  std::string config_path;
  std::string config_digest;
  unsigned workers = 1;
  double wall_clock_seconds = 0;
};

inline void write_manifest(OutputSet& out, const ManifestInfo& info) {
  json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = info.command;
  m["seed"] = info.seed;
  m["config_path"] = info.config_path;
  m["config_sha256"] = info.config_digest;
  m["config"] = info.config;
  m["outputs"] = out.listing();
  m["runtime"] = {{"wall_clock_seconds", info.wall_clock_seconds}, {"workers", info.workers}};
  std::ofstream f(out.dir() / "manifest.json", std::ios::binary | std::ios::trunc);
  f << m.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write manifest");
}

}  // namespace bdsde::cli

#endif  // BDSDE_CLI_OUTPUT_HPP
