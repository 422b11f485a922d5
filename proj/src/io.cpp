#include "ddcrf/io.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ddcrf {

using nlohmann::json;

namespace {

std::size_t expected_tables(const GridSpec& grid, PairwiseMode mode) {
  return mode == PairwiseMode::tied ? static_cast<std::size_t>(grid.num_slots()) : enumerate_edges(grid).size();
}

double narrow(double v, ScalarWidth w) { return w == ScalarWidth::f32 ? static_cast<double>(static_cast<float>(v)) : v; }

// ---- text ---------------------------------------------------------------

const json& field(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) throw ParseError(name, "missing field");
  return *it;
}

template <typename T>
T read_number(const json& doc, const char* name) {
  const json& v = field(doc, name);
  if (!v.is_number()) throw ParseError(name, "expected a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ParseError(name, "expected an integer");
  }
  return v.get<T>();
}

std::vector<double> read_array(const json& v, const std::string& path, ScalarWidth w) {
  if (!v.is_array()) throw ParseError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) throw ParseError(path + "[" + std::to_string(k) + "]", "expected a number");
    out.push_back(narrow(v[k].get<double>(), w));
  }
  return out;
}

void check_length(const std::vector<double>& values, std::size_t expected, const std::string& path) {
  if (values.size() != expected)
    throw ValidationError({{path, "expected " + std::to_string(expected) + " values, got " +
                                      std::to_string(values.size())}});
}

Table<double> to_table(const std::vector<double>& values, std::size_t offset, Index rows, Index cols) {
  Table<double> t(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) t(r, c) = values[offset + static_cast<std::size_t>(r * cols + c)];
  return t;
}

json flat(const Table<double>& t, ScalarWidth w) {
  json a = json::array();
  for (Index r = 0; r < t.rows(); ++r)
    for (Index c = 0; c < t.cols(); ++c) a.push_back(narrow(t(r, c), w));
  return a;
}

// ---- binary -------------------------------------------------------------

constexpr std::string_view kMagic = "DDCR";

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void scalar(double v, ScalarWidth w) {
    if (w == ScalarWidth::f32)
      u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    else
      u64(std::bit_cast<std::uint64_t>(v));
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t bytes_le(int count) {
    if (pos_ + static_cast<std::size_t>(count) > bytes_.size())
      throw ParseError("byte " + std::to_string(pos_), "unexpected end of file");
    std::uint64_t v = 0;
    for (int k = 0; k < count; ++k)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(k)])) << (8 * k);
    pos_ += static_cast<std::size_t>(count);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes_le(4)); }
  double scalar(ScalarWidth w) {
    if (w == ScalarWidth::f32) return static_cast<double>(std::bit_cast<float>(u32()));
    return std::bit_cast<double>(bytes_le(8));
  }
  std::string at() const { return "byte " + std::to_string(pos_); }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_text(const ProblemFile& file) {
  const auto& p = file.potentials;
  json doc;
  doc["version"] = kFormatVersion;
  doc["height"] = p.grid.height;
  doc["width"] = p.grid.width;
  doc["labels"] = p.grid.num_labels;
  doc["strides"] = p.grid.strides;
  doc["pairwise_mode"] = p.pairwise_mode == PairwiseMode::tied ? "tied" : "dense";
  doc["scalar"] = file.scalar == ScalarWidth::f32 ? "f32" : "f64";
  doc["unary"] = flat(p.unary, file.scalar);
  if (p.pairwise_mode == PairwiseMode::tied) {
    json tables = json::object();
    for (int s = 0; s < p.grid.num_slots(); ++s)
      tables[slot_name(p.grid, s)] = flat(p.pairwise[static_cast<std::size_t>(s)], file.scalar);
    doc["pairwise"] = std::move(tables);
  } else {
    json all = json::array();
    for (const auto& t : p.pairwise)
      for (auto& v : flat(t, file.scalar)) all.push_back(v);
    doc["pairwise"] = std::move(all);
  }
  return doc.dump(1) + "\n";
}

ProblemFile decode_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  if (!doc.is_object()) throw ParseError("(root)", "expected a JSON object");

  const auto version = read_number<std::int64_t>(doc, "version");
  if (version != kFormatVersion)
    throw ParseError("version", "unsupported version " + std::to_string(version));

  ProblemFile file;
  if (auto it = doc.find("scalar"); it != doc.end()) {
    if (*it == "f32")
      file.scalar = ScalarWidth::f32;
    else if (*it != "f64")
      throw ParseError("scalar", "expected \"f64\" or \"f32\"");
  }

  GridSpec grid;
  grid.height = read_number<Index>(doc, "height");
  grid.width = read_number<Index>(doc, "width");
  grid.num_labels = read_number<int>(doc, "labels");
  const json& strides = field(doc, "strides");
  if (!strides.is_array()) throw ParseError("strides", "expected an array of integers");
  grid.strides.clear();
  for (std::size_t k = 0; k < strides.size(); ++k) {
    if (!strides[k].is_number_integer()) throw ParseError("strides[" + std::to_string(k) + "]", "expected an integer");
    grid.strides.push_back(strides[k].get<int>());
  }
  if (auto violations = validate_grid(grid); !violations.empty()) throw ValidationError(std::move(violations));

  const json& mode = field(doc, "pairwise_mode");
  Potentials<double> p;
  p.grid = grid;
  if (mode == "tied")
    p.pairwise_mode = PairwiseMode::tied;
  else if (mode == "dense")
    p.pairwise_mode = PairwiseMode::dense;
  else
    throw ParseError("pairwise_mode", "expected \"tied\" or \"dense\"");

  const Index V = grid.num_vertices();
  const Index L = grid.num_labels;
  const auto unary = read_array(field(doc, "unary"), "unary", file.scalar);
  check_length(unary, static_cast<std::size_t>(V * L), "unary");
  p.unary = to_table(unary, 0, V, L);

  const json& pairwise = field(doc, "pairwise");
  const std::size_t tables = expected_tables(grid, p.pairwise_mode);
  if (p.pairwise_mode == PairwiseMode::tied) {
    if (!pairwise.is_object()) throw ParseError("pairwise", "tied tables must be an object keyed by h<s>/v<s>");
    for (int s = 0; s < grid.num_slots(); ++s) {
      const std::string key = slot_name(grid, s);
      auto it = pairwise.find(key);
      if (it == pairwise.end()) throw ParseError("pairwise." + key, "missing table");
      const auto values = read_array(*it, "pairwise." + key, file.scalar);
      check_length(values, static_cast<std::size_t>(L * L), "pairwise." + key);
      p.pairwise.push_back(to_table(values, 0, L, L));
    }
    if (pairwise.size() != tables) throw ParseError("pairwise", "unexpected extra tables");
  } else {
    const auto values = read_array(pairwise, "pairwise", file.scalar);
    check_length(values, tables * static_cast<std::size_t>(L * L), "pairwise");
    for (std::size_t e = 0; e < tables; ++e)
      p.pairwise.push_back(to_table(values, e * static_cast<std::size_t>(L * L), L, L));
  }
  require_valid(p);
  file.potentials = std::move(p);
  return file;
}

std::string encode_binary(const ProblemFile& file) {
  const auto& p = file.potentials;
  Writer w;
  w.raw(kMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(p.grid.height));
  w.u32(static_cast<std::uint32_t>(p.grid.width));
  w.u32(static_cast<std::uint32_t>(p.grid.num_labels));
  w.u32(static_cast<std::uint32_t>(p.grid.strides.size()));
  for (int s : p.grid.strides) w.u32(static_cast<std::uint32_t>(s));
  w.u32(p.pairwise_mode == PairwiseMode::tied ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(file.scalar));
  for (Index r = 0; r < p.unary.rows(); ++r)
    for (Index c = 0; c < p.unary.cols(); ++c) w.scalar(p.unary(r, c), file.scalar);
  for (const auto& t : p.pairwise)
    for (Index r = 0; r < t.rows(); ++r)
      for (Index c = 0; c < t.cols(); ++c) w.scalar(t(r, c), file.scalar);
  return w.take();
}

ProblemFile decode_binary(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw ParseError("byte 0", "missing DDCR magic");
  Reader r(bytes);
  r.skip(kMagic.size());
  {
    const std::string at = r.at();
    if (const auto version = r.u32(); version != kFormatVersion)
      throw ParseError(at, "unsupported version " + std::to_string(version));
  }
  GridSpec grid;
  grid.height = r.u32();
  grid.width = r.u32();
  grid.num_labels = static_cast<int>(r.u32());
  const std::string count_at = r.at();
  const std::uint32_t count = r.u32();
  if (count > 64) throw ParseError(count_at, "implausible stride count " + std::to_string(count));
  grid.strides.clear();
  for (std::uint32_t k = 0; k < count; ++k) grid.strides.push_back(static_cast<int>(r.u32()));
  if (auto violations = validate_grid(grid); !violations.empty()) throw ValidationError(std::move(violations));

  ProblemFile file;
  Potentials<double> p;
  p.grid = grid;
  {
    const std::string at = r.at();
    const std::uint32_t mode = r.u32();
    if (mode > 1) throw ParseError(at, "bad pairwise mode flag " + std::to_string(mode));
    p.pairwise_mode = mode == 0 ? PairwiseMode::tied : PairwiseMode::dense;
  }
  {
    const std::string at = r.at();
    const std::uint32_t width = r.u32();
    if (width > 1) throw ParseError(at, "bad scalar width flag " + std::to_string(width));
    file.scalar = static_cast<ScalarWidth>(width);
  }

  const Index V = grid.num_vertices();
  const Index L = grid.num_labels;
  const std::size_t tables = expected_tables(grid, p.pairwise_mode);
  const std::size_t scalar_bytes = file.scalar == ScalarWidth::f32 ? 4 : 8;
  const std::size_t needed = (static_cast<std::size_t>(V * L) + tables * static_cast<std::size_t>(L * L)) * scalar_bytes;
  if (bytes.size() - r.position() != needed)
    throw ParseError(r.at(), "expected " + std::to_string(needed) + " payload bytes, found " +
                                 std::to_string(bytes.size() - r.position()));

  p.unary.resize(V, L);
  for (Index i = 0; i < V; ++i)
    for (Index l = 0; l < L; ++l) p.unary(i, l) = r.scalar(file.scalar);
  for (std::size_t e = 0; e < tables; ++e) {
    Table<double> t(L, L);
    for (Index a = 0; a < L; ++a)
      for (Index b = 0; b < L; ++b) t(a, b) = r.scalar(file.scalar);
    p.pairwise.push_back(std::move(t));
  }
  require_valid(p);
  file.potentials = std::move(p);
  return file;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ProblemFile load_problem_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (std::string_view(bytes).substr(0, kMagic.size()) == kMagic) return decode_binary(bytes);
  return decode_text(bytes);
}

Potentials<double> load_problem(const std::filesystem::path& path) { return load_problem_file(path).potentials; }

Encoding encoding_for(const std::filesystem::path& path) {
  const auto ext = path.extension();
  return ext == ".bin" || ext == ".ddcr" ? Encoding::binary : Encoding::text;
}

void save_problem(const std::filesystem::path& path, const ProblemFile& file) {
  save_problem(path, file, encoding_for(path));
}

void save_problem(const std::filesystem::path& path, const ProblemFile& file, Encoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = encoding == Encoding::binary ? encode_binary(file) : encode_text(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

double parse_double(std::string_view s, std::string_view whole) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("bad number '" + std::string(s) + "' in distribution '" + std::string(whole) + "'");
  return v;
}

}  // namespace

RandomSpec parse_distribution(std::string_view text) {
  RandomSpec spec;
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (name == "normal") {
    spec.kind = RandomSpec::Kind::normal;
    if (!args.empty()) spec.scale = parse_double(args, text);
  } else if (name == "potts") {
    spec.kind = RandomSpec::Kind::potts;
    if (!args.empty()) {
      const auto comma = args.find(',');
      spec.attract = parse_double(args.substr(0, comma), text);
      if (comma != std::string_view::npos) spec.repel = parse_double(args.substr(comma + 1), text);
    }
  } else {
    throw std::invalid_argument("unknown distribution '" + std::string(text) + "' (expected normal[:scale] or potts[:a[,r]])");
  }
  return spec;
}

Potentials<double> generate_random(std::uint64_t seed, const GridSpec& grid, const RandomSpec& spec) {
  const PairwiseMode mode = spec.kind == RandomSpec::Kind::potts ? PairwiseMode::tied : spec.pairwise;
  auto p = Potentials<double>::zeros(grid, mode);
  SplitMix64 rng(seed);
  const double scale = spec.kind == RandomSpec::Kind::normal ? spec.scale : 1.0;
  for (Index i = 0; i < p.unary.rows(); ++i)
    for (Index l = 0; l < p.unary.cols(); ++l) p.unary(i, l) = scale * rng.normal();
  for (auto& t : p.pairwise) {
    for (Index a = 0; a < t.rows(); ++a)
      for (Index b = 0; b < t.cols(); ++b)
        t(a, b) = spec.kind == RandomSpec::Kind::potts ? (a == b ? spec.attract : spec.repel) : scale * rng.normal();
  }
  return p;
}

void write_label_image(const std::filesystem::path& path, const GridSpec& grid, const Labeling& labels) {
  if (static_cast<Index>(labels.size()) != grid.num_vertices())
    throw std::invalid_argument("labeling length does not match the grid");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << grid.width << " " << grid.height << "\n255\n";
  const int top = std::max(grid.num_labels - 1, 1);
  for (Label l : labels) out.put(static_cast<char>(static_cast<unsigned char>((255 * l) / top)));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace ddcrf
