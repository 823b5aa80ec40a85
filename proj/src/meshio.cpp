#include "tdnoise/meshio.hpp"

#include "tdnoise/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace tdn {

static_assert(std::endian::native == std::endian::little,
              "binary PLY support assumes a little-endian host");

std::string_view to_string(GeometryFormat format) {
  switch (format) {
    case GeometryFormat::Off:
      return "off";
    case GeometryFormat::PlyAscii:
      return "ply-ascii";
    case GeometryFormat::PlyBinaryLittleEndian:
      return "ply-binary";
    case GeometryFormat::Xyz:
      return "xyz";
  }
  return "unknown";
}

GeometryFormat parse_format(std::string_view name) {
  if (name == "off") return GeometryFormat::Off;
  if (name == "ply-ascii") return GeometryFormat::PlyAscii;
  if (name == "ply-binary" || name == "ply" || name == "ply-binary-little-endian") {
    return GeometryFormat::PlyBinaryLittleEndian;
  }
  if (name == "xyz") return GeometryFormat::Xyz;
  throw DataError("unknown geometry format '" + std::string(name) + "'");
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

class Cursor {
 public:
  explicit Cursor(std::string_view buf) : buf_(buf) {}

  bool at_end() const { return pos_ >= buf_.size(); }
  std::size_t pos() const { return pos_; }
  std::uint64_t line() const { return line_; }
  std::size_t remaining() const { return buf_.size() - std::min(pos_, buf_.size()); }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_, line_); }
  [[noreturn]] void fail_binary(const std::string& what) const { throw ParseError(what, pos_, 0); }

  /// Next physical line without its terminator; nullopt at end of input.
  std::optional<std::string_view> next_line() {
    if (at_end()) return std::nullopt;
    const std::size_t start = pos_;
    std::size_t end = buf_.find('\n', start);
    if (end == std::string_view::npos) end = buf_.size();
    pos_ = std::min(end + 1, buf_.size());
    if (end < buf_.size()) ++line_;
    std::string_view l = buf_.substr(start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return l;
  }

  /// Next whitespace-delimited token; empty view at end of input.
  std::string_view next_token() {
    while (!at_end() && is_space(buf_[pos_])) {
      if (buf_[pos_] == '\n') ++line_;
      ++pos_;
    }
    const std::size_t start = pos_;
    while (!at_end() && !is_space(buf_[pos_])) ++pos_;
    return buf_.substr(start, pos_ - start);
  }

  const char* take(std::size_t n) {
    if (remaining() < n) fail_binary("unexpected end of binary data");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
  std::uint64_t line_ = 1;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t s = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > s) out.push_back(line.substr(s, i - s));
  }
  return out;
}

std::optional<double> to_double(std::string_view tok) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  if (b != e && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> to_int(std::string_view tok) {
  Int v{};
  const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------- OFF

GeometryFile parse_off(std::string_view bytes) {
  Cursor cur(bytes);
  GeometryFile file;
  file.format = GeometryFormat::Off;

  auto content_line = [&]() -> std::optional<std::vector<std::string_view>> {
    while (auto l = cur.next_line()) {
      std::string_view s = *l;
      if (const auto hash = s.find('#'); hash != std::string_view::npos) {
        std::string_view c = s.substr(hash + 1);
        while (!c.empty() && is_space(c.front())) c.remove_prefix(1);
        file.comments.emplace_back(c);
        s = s.substr(0, hash);
      }
      auto toks = split(s);
      if (!toks.empty()) return toks;
    }
    return std::nullopt;
  };

  auto header = content_line();
  if (!header || (*header)[0] != "OFF") cur.fail("missing OFF header");
  std::vector<std::string_view> counts(header->begin() + 1, header->end());
  if (counts.empty()) {
    auto l = content_line();
    if (!l) cur.fail("missing OFF element counts");
    counts = *l;
  }
  if (counts.size() < 2) cur.fail("OFF counts line needs vertex and face counts");
  const auto nv = to_int<std::uint64_t>(counts[0]);
  const auto nf = to_int<std::uint64_t>(counts[1]);
  if (!nv || !nf) cur.fail("invalid OFF element counts");
  // every record needs at least two bytes
  if (*nv > cur.remaining() || *nf > cur.remaining()) cur.fail("OFF counts exceed file size");

  TriangleMesh mesh;
  mesh.vertices.reserve(*nv);
  for (std::uint64_t i = 0; i < *nv; ++i) {
    auto toks = content_line();
    if (!toks) cur.fail("truncated OFF vertex list");
    if (toks->size() < 3) cur.fail("OFF vertex needs three coordinates");
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
      const auto d = to_double((*toks)[a]);
      if (!d) cur.fail("invalid OFF vertex coordinate");
      v[a] = *d;
    }
    mesh.vertices.push_back(v);
  }
  for (std::uint64_t f = 0; f < *nf; ++f) {
    auto toks = content_line();
    if (!toks) cur.fail("truncated OFF face list");
    const auto n = to_int<std::uint64_t>((*toks)[0]);
    if (!n || *n < 3) cur.fail("OFF face needs at least three vertices");
    if (*n > toks->size() - 1) cur.fail("OFF face has fewer indices than declared");
    std::vector<PointId> idx;
    idx.reserve(*n);
    for (std::uint64_t k = 0; k < *n; ++k) {
      const auto v = to_int<std::uint64_t>((*toks)[k + 1]);
      if (!v || *v >= mesh.vertices.size()) cur.fail("OFF face index out of range");
      idx.push_back(static_cast<PointId>(*v));
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
  }
  mesh.remove_degenerate();
  file.payload = std::move(mesh);
  return file;
}

// ---------------------------------------------------------------- PLY

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType> scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::Int8;
  if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
  if (name == "short" || name == "int16") return ScalarType::Int16;
  if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
  if (name == "int" || name == "int32") return ScalarType::Int32;
  if (name == "uint" || name == "uint32") return ScalarType::UInt32;
  if (name == "float" || name == "float32") return ScalarType::Float32;
  if (name == "double" || name == "float64") return ScalarType::Float64;
  return std::nullopt;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8:
      return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16:
      return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32:
      return 4;
    case ScalarType::Float64:
      return 8;
  }
  return 1;
}

bool is_integer(ScalarType t) { return t != ScalarType::Float32 && t != ScalarType::Float64; }

double integer_max(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
      return 127.0;
    case ScalarType::UInt8:
      return 255.0;
    case ScalarType::Int16:
      return 32767.0;
    case ScalarType::UInt16:
      return 65535.0;
    case ScalarType::Int32:
      return 2147483647.0;
    case ScalarType::UInt32:
      return 4294967295.0;
    default:
      return 1.0;
  }
}

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_binary(Cursor& cur, ScalarType t) {
  const char* p = cur.take(type_size(t));
  switch (t) {
    case ScalarType::Int8:
      return load<std::int8_t>(p);
    case ScalarType::UInt8:
      return load<std::uint8_t>(p);
    case ScalarType::Int16:
      return load<std::int16_t>(p);
    case ScalarType::UInt16:
      return load<std::uint16_t>(p);
    case ScalarType::Int32:
      return load<std::int32_t>(p);
    case ScalarType::UInt32:
      return load<std::uint32_t>(p);
    case ScalarType::Float32:
      return load<float>(p);
    case ScalarType::Float64:
      return load<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::uint64_t count = 0;
  std::vector<PlyProperty> properties;
};

GeometryFile parse_ply(std::string_view bytes) {
  Cursor cur(bytes);
  GeometryFile file;
  auto first = cur.next_line();
  if (!first || *first != "ply") cur.fail("missing 'ply' magic line");

  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  bool done = false;
  while (auto line = cur.next_line()) {
    const auto toks = split(*line);
    if (toks.empty()) continue;
    const std::string_view kw = toks[0];
    if (kw == "format") {
      if (toks.size() < 3 || toks[2] != "1.0") cur.fail("unsupported PLY format line");
      if (toks[1] == "ascii") {
        binary = false;
      } else if (toks[1] == "binary_little_endian") {
        binary = true;
      } else if (toks[1] == "binary_big_endian") {
        cur.fail("big-endian binary PLY is not supported");
      } else {
        cur.fail("unknown PLY encoding '" + std::string(toks[1]) + "'");
      }
      have_format = true;
    } else if (kw == "comment" || kw == "obj_info") {
      std::string_view rest = line->substr(std::min(line->size(), kw.size()));
      while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
      if (kw == "comment") file.comments.emplace_back(rest);
    } else if (kw == "element") {
      if (toks.size() != 3) cur.fail("malformed element line");
      const auto n = to_int<std::uint64_t>(toks[2]);
      if (!n) cur.fail("invalid element count");
      elements.push_back({std::string(toks[1]), *n, {}});
    } else if (kw == "property") {
      if (elements.empty()) cur.fail("property before any element");
      PlyProperty prop;
      if (toks.size() == 5 && toks[1] == "list") {
        const auto ct = scalar_type(toks[2]);
        const auto it = scalar_type(toks[3]);
        if (!ct || !it || !is_integer(*ct)) cur.fail("invalid list property types");
        prop = {std::string(toks[4]), *it, true, *ct};
      } else if (toks.size() == 3) {
        const auto t = scalar_type(toks[1]);
        if (!t) cur.fail("unknown property type '" + std::string(toks[1]) + "'");
        prop = {std::string(toks[2]), *t, false, ScalarType::UInt8};
      } else {
        cur.fail("malformed property line");
      }
      elements.back().properties.push_back(std::move(prop));
    } else if (kw == "end_header") {
      done = true;
      break;
    } else {
      cur.fail("unexpected PLY header keyword '" + std::string(kw) + "'");
    }
  }
  if (!done) cur.fail("PLY header has no end_header");
  if (!have_format) cur.fail("PLY header has no format line");
  file.format = binary ? GeometryFormat::PlyBinaryLittleEndian : GeometryFormat::PlyAscii;

  const auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                      [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) cur.fail("PLY file has no vertex element");
  auto prop_index = [&](std::string_view n) -> int {
    for (std::size_t i = 0; i < vertex_it->properties.size(); ++i) {
      if (vertex_it->properties[i].name == n && !vertex_it->properties[i].is_list) return static_cast<int>(i);
    }
    return -1;
  };
  const std::array<int, 3> xyz{prop_index("x"), prop_index("y"), prop_index("z")};
  const std::array<int, 3> rgb{prop_index("red"), prop_index("green"), prop_index("blue")};
  if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0) cur.fail("vertex element lacks x/y/z properties");
  const bool has_color = rgb[0] >= 0 && rgb[1] >= 0 && rgb[2] >= 0;

  PointCloud cloud;
  if (has_color) cloud.colors.emplace();
  std::vector<double> record;

  for (const PlyElement& el : elements) {
    std::size_t min_record = 0;
    for (const auto& p : el.properties) min_record += p.is_list ? type_size(p.count_type) : type_size(p.type);
    const std::size_t unit = binary ? std::max<std::size_t>(min_record, 1) : 2;
    if (el.count > cur.remaining() / unit) {
      cur.fail("element '" + el.name + "' count exceeds file size");
    }
    const bool is_vertex = &el == &*vertex_it;
    if (is_vertex) {
      cloud.positions.reserve(el.count);
      if (has_color) cloud.colors->reserve(el.count);
    }
    for (std::uint64_t r = 0; r < el.count; ++r) {
      record.assign(el.properties.size(), 0.0);
      for (std::size_t pi = 0; pi < el.properties.size(); ++pi) {
        const PlyProperty& p = el.properties[pi];
        if (p.is_list) {
          std::uint64_t n = 0;
          if (binary) {
            const double c = read_binary(cur, p.count_type);
            if (c < 0) cur.fail_binary("negative list length");
            n = static_cast<std::uint64_t>(c);
            if (n * type_size(p.type) > cur.remaining()) cur.fail_binary("list exceeds file size");
            cur.take(n * type_size(p.type));
          } else {
            const auto c = to_int<std::uint64_t>(cur.next_token());
            if (!c) cur.fail("invalid list length");
            n = *c;
            if (n > cur.remaining()) cur.fail("list exceeds file size");
            for (std::uint64_t k = 0; k < n; ++k) {
              if (!to_double(cur.next_token())) cur.fail("invalid list entry");
            }
          }
          continue;
        }
        if (binary) {
          record[pi] = read_binary(cur, p.type);
          if (!std::isfinite(record[pi])) cur.fail_binary("non-finite property value");
        } else {
          const std::string_view tok = cur.next_token();
          if (tok.empty()) cur.fail("unexpected end of PLY body");
          const auto v = to_double(tok);
          if (!v) cur.fail("invalid number '" + std::string(tok.substr(0, 32)) + "'");
          record[pi] = *v;
        }
      }
      if (!is_vertex) continue;
      cloud.positions.emplace_back(record[xyz[0]], record[xyz[1]], record[xyz[2]]);
      if (has_color) {
        Vec3 c;
        for (int a = 0; a < 3; ++a) {
          const auto& p = vertex_it->properties[rgb[a]];
          c[a] = is_integer(p.type) ? record[rgb[a]] / integer_max(p.type) : record[rgb[a]];
          if (!(c[a] >= 0.0 && c[a] <= 1.0)) {
            binary ? cur.fail_binary("color channel outside range") : cur.fail("color channel outside range");
          }
        }
        cloud.colors->push_back(c);
      }
    }
  }
  file.payload = std::move(cloud);
  return file;
}

// ---------------------------------------------------------------- XYZ

GeometryFile parse_xyz(std::string_view bytes) {
  Cursor cur(bytes);
  GeometryFile file;
  file.format = GeometryFormat::Xyz;
  PointCloud cloud;
  std::size_t columns = 0;
  while (auto line = cur.next_line()) {
    std::string_view s = *line;
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    if (s.empty()) continue;
    if (s.front() == '#') {
      s.remove_prefix(1);
      while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
      file.comments.emplace_back(s);
      continue;
    }
    const auto toks = split(s);
    if (toks.size() != 3 && toks.size() != 6) cur.fail("XYZ line needs 3 or 6 columns");
    if (columns == 0) {
      columns = toks.size();
      if (columns == 6) cloud.colors.emplace();
    } else if (toks.size() != columns) {
      cur.fail("inconsistent XYZ column count");
    }
    std::array<double, 6> v{};
    for (std::size_t k = 0; k < toks.size(); ++k) {
      const auto d = to_double(toks[k]);
      if (!d) cur.fail("invalid number in XYZ line");
      v[k] = *d;
    }
    cloud.positions.emplace_back(v[0], v[1], v[2]);
    if (columns == 6) {
      const Vec3 c(v[3], v[4], v[5]);
      if ((c.array() < 0.0).any() || (c.array() > 1.0).any()) cur.fail("XYZ color outside [0,1]");
      cloud.colors->push_back(c);
    }
  }
  if (cloud.positions.empty()) throw ParseError("XYZ file has no points", bytes.size(), 0);
  file.payload = std::move(cloud);
  return file;
}

std::string number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string sanitize_comment(std::string_view c) {
  std::string s(c);
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

GeometryFile parse_geometry(std::string_view bytes) {
  std::size_t start = 0;
  while (start < bytes.size() && is_space(bytes[start])) ++start;
  if (start == bytes.size()) throw ParseError("empty geometry file", 0, 1);
  GeometryFile file;
  if (bytes.substr(0, 4) == "ply\n" || bytes.substr(0, 5) == "ply\r\n") {
    file = parse_ply(bytes);
  } else if (bytes.substr(start, 3) == "OFF") {
    file = parse_off(bytes);
  } else {
    file = parse_xyz(bytes);
  }
  if (file.is_mesh()) {
    file.mesh().validate();
  } else {
    file.cloud().validate();
  }
  return file;
}

GeometryFile read_geometry(const std::filesystem::path& path) {
  try {
    GeometryFile f = parse_geometry(read_file(path));
    if (!f.is_mesh()) std::get<PointCloud>(f.payload).id = path.stem().string();
    return f;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset(), 0);
  }
}

PointCloud read_pointcloud(const std::filesystem::path& path) {
  GeometryFile f = read_geometry(path);
  if (!f.is_mesh()) return std::get<PointCloud>(std::move(f.payload));
  PointCloud c;
  c.positions = f.mesh().vertices;
  c.id = path.stem().string();
  return c;
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  GeometryFile f = read_geometry(path);
  if (!f.is_mesh()) throw DataError("'" + path.string() + "' does not contain a triangle mesh");
  TriangleMesh m = std::get<TriangleMesh>(std::move(f.payload));
  if (m.empty()) throw DataError("'" + path.string() + "' has no triangles");
  return m;
}

std::string serialize_pointcloud(const PointCloud& cloud, GeometryFormat format,
                                 std::span<const std::string> comments) {
  cloud.validate();
  std::string out;
  const bool color = cloud.has_colors();
  if (format == GeometryFormat::Xyz) {
    for (const auto& c : comments) out += "# " + sanitize_comment(c) + "\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.positions[i];
      out += number(p.x()) + ' ' + number(p.y()) + ' ' + number(p.z());
      if (color) {
        const Vec3& c = (*cloud.colors)[i];
        out += ' ' + number(c.x()) + ' ' + number(c.y()) + ' ' + number(c.z());
      }
      out += '\n';
    }
    return out;
  }
  if (format == GeometryFormat::Off) throw DataError("OFF output is only supported for meshes");

  const bool binary = format == GeometryFormat::PlyBinaryLittleEndian;
  out += "ply\n";
  out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
  for (const auto& c : comments) out += "comment " + sanitize_comment(c) + "\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (color) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    if (binary) {
      for (int a = 0; a < 3; ++a) {
        char b[8];
        std::memcpy(b, &p[a], 8);
        out.append(b, 8);
      }
      if (color) {
        for (int a = 0; a < 3; ++a) out.push_back(static_cast<char>(to_byte((*cloud.colors)[i][a])));
      }
    } else {
      out += number(p.x()) + ' ' + number(p.y()) + ' ' + number(p.z());
      if (color) {
        for (int a = 0; a < 3; ++a) out += ' ' + std::to_string(to_byte((*cloud.colors)[i][a]));
      }
      out += '\n';
    }
  }
  return out;
}

void write_pointcloud(const PointCloud& cloud, const std::filesystem::path& path,
                      GeometryFormat format, std::span<const std::string> comments) {
  write_file(path, serialize_pointcloud(cloud, format, comments));
}

void write_mesh_off(const TriangleMesh& mesh, const std::filesystem::path& path) {
  mesh.validate();
  std::string out = "OFF\n" + std::to_string(mesh.vertices.size()) + ' ' +
                    std::to_string(mesh.triangles.size()) + " 0\n";
  for (const Vec3& v : mesh.vertices) out += number(v.x()) + ' ' + number(v.y()) + ' ' + number(v.z()) + '\n';
  for (const auto& t : mesh.triangles) {
    out += "3 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' + std::to_string(t[2]) + '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------- shading

std::vector<DirectionalLight> random_lights(const PointCloud& cloud, std::uint64_t seed) {
  Vec3 axis(0.0, 0.0, 1.0);
  if (cloud.size() >= 3) {
    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : cloud.positions) mean += p;
    mean /= static_cast<double>(cloud.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : cloud.positions) cov += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    axis = eig.eigenvectors().col(2);
    // fix the eigenvector sign: largest-magnitude component positive
    Eigen::Index k = 0;
    axis.cwiseAbs().maxCoeff(&k);
    if (axis[k] < 0.0) axis = -axis;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> albedo(0.3, 1.0);
  std::vector<DirectionalLight> lights;
  while (lights.size() < 3) {
    Vec3 d(gauss(rng), gauss(rng), gauss(rng));
    const double n = d.norm();
    if (n < 1e-12) continue;
    d /= n;
    if (d.dot(axis) < 0.0) d = -d;
    const Vec3 a(albedo(rng), albedo(rng), albedo(rng));
    lights.push_back({d, a});
  }
  return lights;
}

std::vector<Vec3> shade(std::span<const Vec3> normals, std::span<const DirectionalLight> lights) {
  std::vector<Vec3> colors;
  colors.reserve(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const Vec3& n = normals[i];
    if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) {
      throw DataError("normal " + std::to_string(i) + " is not unit length");
    }
    Vec3 c = Vec3::Zero();
    for (const auto& l : lights) c += l.albedo * std::max(0.0, n.dot(l.direction));
    colors.push_back(c.cwiseMax(0.0).cwiseMin(1.0));
  }
  return colors;
}

PointCloud shade_lambertian(const PointCloud& cloud, std::span<const Vec3> normals,
                            std::uint64_t seed) {
  if (normals.size() != cloud.size()) throw DataError("need exactly one normal per point");
  const auto lights = random_lights(cloud, seed);
  PointCloud out = cloud;
  out.colors = shade(normals, lights);
  return out;
}

}  // namespace tdn
