#pragma once

#include "ddcrf/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ddcrf {

// Problem files come in two encodings; docs/formats.md has the layouts.
//  text:   a JSON document (version, height, width, labels, strides,
//          pairwise_mode, scalar, unary, pairwise)
//  binary: "DDCR" + little-endian u32 header + IEEE-754 arrays

inline constexpr std::uint32_t kFormatVersion = 1;

enum class ScalarWidth : std::uint32_t { f64 = 0, f32 = 1 };

struct ProblemFile {
  Potentials<double> potentials;
  ScalarWidth scalar = ScalarWidth::f64;
};

// `where` is a field path ("unary[12]") for text files or a byte offset
// ("byte 40") for binary files.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

std::string encode_text(const ProblemFile& file);
std::string encode_binary(const ProblemFile& file);

// Both decoders validate the potentials; a failed check throws
// ValidationError, a malformed document ParseError.
ProblemFile decode_text(std::string_view text);
ProblemFile decode_binary(std::string_view bytes);

// Dispatches on the "DDCR" magic.
ProblemFile load_problem_file(const std::filesystem::path& path);
Potentials<double> load_problem(const std::filesystem::path& path);

enum class Encoding { text, binary };
Encoding encoding_for(const std::filesystem::path& path);  // ".bin" / ".ddcr" -> binary
void save_problem(const std::filesystem::path& path, const ProblemFile& file);
void save_problem(const std::filesystem::path& path, const ProblemFile& file, Encoding encoding);

// SplitMix64 (Steele, Lea & Flood): state += 0x9E3779B97F4A7C15, then the
// 30/27/31 xor-shift-multiply finalizer. uniform() takes the top 53 bits;
// normal() is Box-Muller on two consecutive uniforms, cosine branch only.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)
  double normal();

 private:
  std::uint64_t state_;
};

struct RandomSpec {
  enum class Kind { normal, potts } kind = Kind::normal;
  double scale = 1.0;     // normal: standard deviation of every entry
  double attract = 2.0;   // potts: phi(l, l)
  double repel = 0.0;     // potts: phi(l, l') for l != l'
  PairwiseMode pairwise = PairwiseMode::tied;
};

// "normal", "normal:<scale>", "potts:<a>" or "potts:<a>,<r>".
RandomSpec parse_distribution(std::string_view text);

// Draw order: unary entries row-major (vertex-major, label-minor), then for
// normal instances every pairwise table row-major in storage order. Potts
// instances draw only the unaries and always use tied tables.
Potentials<double> generate_random(std::uint64_t seed, const GridSpec& grid, const RandomSpec& spec = {});

// Binary portable graymap, label l drawn as floor(255 l / (L - 1)).
void write_label_image(const std::filesystem::path& path, const GridSpec& grid, const Labeling& labels);

}  // namespace ddcrf
