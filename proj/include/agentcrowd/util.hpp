#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace agentcrowd {

// Seeded random source whose output is identical on every platform.
// Only the raw engine stream of std::mt19937_64 is used; the std
// distributions are implementation-defined and are avoided.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Triangular noise with zero mean and the given standard deviation.
  double triangular(double sd);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a root seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

// Lowercase hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool is_blank(std::string_view s);

// Reads a whole file; gzip-compressed files are decompressed transparently.
std::string read_text_file(const std::filesystem::path& path);

// Writes a whole file, gzip-compressing when the path ends in ".gz".
void write_text_file(const std::filesystem::path& path, std::string_view data);

bool is_gzip_path(const std::filesystem::path& path);

}  // namespace agentcrowd
