#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pclv/cloud.hpp"
#include "pclv/error.hpp"

namespace pclv {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<ScalarType> parse_scalar_type(const std::string& s) {
  if (s == "char" || s == "int8") return ScalarType::kInt8;
  if (s == "uchar" || s == "uint8") return ScalarType::kUInt8;
  if (s == "short" || s == "int16") return ScalarType::kInt16;
  if (s == "ushort" || s == "uint16") return ScalarType::kUInt16;
  if (s == "int" || s == "int32") return ScalarType::kInt32;
  if (s == "uint" || s == "uint32") return ScalarType::kUInt32;
  if (s == "float" || s == "float32") return ScalarType::kFloat32;
  if (s == "double" || s == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

bool is_integer(ScalarType t) {
  return t != ScalarType::kFloat32 && t != ScalarType::kFloat64;
}

// Full-scale value used to map integer color channels onto [0, 1].
double integer_full_scale(ScalarType t) {
  switch (t) {
    case ScalarType::kUInt8:
    case ScalarType::kInt8: return 255.0;
    case ScalarType::kUInt16:
    case ScalarType::kInt16: return 65535.0;
    default: return 4294967295.0;
  }
}

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode_binary(ScalarType t, const unsigned char* p) {
  switch (t) {
    case ScalarType::kInt8: return load_le<std::int8_t>(p);
    case ScalarType::kUInt8: return load_le<std::uint8_t>(p);
    case ScalarType::kInt16: return load_le<std::int16_t>(p);
    case ScalarType::kUInt16: return load_le<std::uint16_t>(p);
    case ScalarType::kInt32: return load_le<std::int32_t>(p);
    case ScalarType::kUInt32: return load_le<std::uint32_t>(p);
    case ScalarType::kFloat32: return load_le<float>(p);
    case ScalarType::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  bool binary = false;
  std::vector<Element> elements;
  std::optional<Vec3> viewpoint;
};

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  fail(ErrorCode::kFormat, "'" + path.string() + "': " + why);
}

Header parse_header(std::istream& in, const std::filesystem::path& path) {
  Header h;
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") malformed(path, "missing 'ply' magic");
  bool have_format = false;
  while (true) {
    if (!std::getline(in, line)) malformed(path, "header not terminated by end_header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "obj_info") continue;
    if (kw == "end_header") break;
    if (kw == "comment") {
      std::string tag;
      ls >> tag;
      if (tag == "viewpoint") {
        Vec3 v;
        if (ls >> v.x() >> v.y() >> v.z()) h.viewpoint = v;
      }
      continue;
    }
    if (kw == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        h.binary = false;
      } else if (fmt == "binary_little_endian") {
        h.binary = true;
      } else {
        malformed(path, "unsupported format '" + fmt + "'");
      }
      have_format = true;
    } else if (kw == "element") {
      Element e;
      long long count = -1;
      if (!(ls >> e.name >> count) || count < 0) malformed(path, "bad element line: " + line);
      e.count = static_cast<std::size_t>(count);
      h.elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (h.elements.empty()) malformed(path, "property before any element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        auto c = parse_scalar_type(ct);
        auto t = parse_scalar_type(it);
        if (!c || !t || !is_integer(*c)) malformed(path, "unsupported list property types: " + line);
        p.is_list = true;
        p.count_type = *c;
        p.type = *t;
      } else {
        auto t = parse_scalar_type(type);
        if (!t) malformed(path, "unsupported property type '" + type + "'");
        p.type = *t;
        ls >> p.name;
      }
      if (p.name.empty()) malformed(path, "property without a name: " + line);
      h.elements.back().properties.push_back(std::move(p));
    } else {
      malformed(path, "unknown header keyword '" + kw + "'");
    }
  }
  if (!have_format) malformed(path, "missing format line");
  return h;
}

// Column indices of the vertex properties the loader understands.
struct VertexLayout {
  int x = -1, y = -1, z = -1;
  int r = -1, g = -1, b = -1;
  int intensity = -1;
  int nx = -1, ny = -1, nz = -1;
};

VertexLayout vertex_layout(const Element& e, const std::filesystem::path& path) {
  VertexLayout v;
  for (std::size_t k = 0; k < e.properties.size(); ++k) {
    const Property& p = e.properties[k];
    const int idx = static_cast<int>(k);
    int* slot = nullptr;
    if (p.name == "x") slot = &v.x;
    else if (p.name == "y") slot = &v.y;
    else if (p.name == "z") slot = &v.z;
    else if (p.name == "red") slot = &v.r;
    else if (p.name == "green") slot = &v.g;
    else if (p.name == "blue") slot = &v.b;
    else if (p.name == "intensity") slot = &v.intensity;
    else if (p.name == "nx") slot = &v.nx;
    else if (p.name == "ny") slot = &v.ny;
    else if (p.name == "nz") slot = &v.nz;
    if (slot && p.is_list) malformed(path, "vertex property '" + p.name + "' must be a scalar");
    if (slot) *slot = idx;
  }
  if (v.x < 0 || v.y < 0 || v.z < 0) malformed(path, "vertex element lacks x/y/z");
  const int rgb = (v.r >= 0) + (v.g >= 0) + (v.b >= 0);
  if (rgb != 0 && rgb != 3) malformed(path, "partial red/green/blue properties");
  const int nrm = (v.nx >= 0) + (v.ny >= 0) + (v.nz >= 0);
  if (nrm != 0 && nrm != 3) malformed(path, "partial nx/ny/nz properties");
  return v;
}

double channel_value(const Property& p, double raw) {
  const double v = is_integer(p.type) ? raw / integer_full_scale(p.type) : raw;
  return std::clamp(v, 0.0, 1.0);
}

void assemble_vertex(const Element& e, const VertexLayout& lay, const std::vector<double>& vals,
                     PointCloud& cloud) {
  cloud.positions.emplace_back(vals[lay.x], vals[lay.y], vals[lay.z]);
  if (lay.r >= 0) {
    cloud.colors.emplace_back(channel_value(e.properties[lay.r], vals[lay.r]),
                              channel_value(e.properties[lay.g], vals[lay.g]),
                              channel_value(e.properties[lay.b], vals[lay.b]));
  } else if (lay.intensity >= 0) {
    const double i = channel_value(e.properties[lay.intensity], vals[lay.intensity]);
    cloud.colors.emplace_back(i, i, i);
  } else {
    cloud.colors.emplace_back(kDefaultGray, kDefaultGray, kDefaultGray);
  }
  if (lay.nx >= 0) {
    Vec3 n(vals[lay.nx], vals[lay.ny], vals[lay.nz]);
    const double len = n.norm();
    cloud.normals->push_back(len > 0.0 ? Vec3(n / len) : Vec3(0, 0, 1));
  }
}

std::size_t read_ascii(std::istream& in, const Header& h, const std::filesystem::path& path,
                       std::size_t vertex_idx, const VertexLayout& lay, PointCloud& cloud) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      if (out.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  std::vector<double> vals;
  for (std::size_t ei = 0; ei < h.elements.size(); ++ei) {
    const Element& e = h.elements[ei];
    for (std::size_t k = 0; k < e.count; ++k) {
      if (!next_line(line)) {
        malformed(path, "element count mismatch: expected " + std::to_string(e.count) + " '" +
                            e.name + "' rows, found " + std::to_string(k));
      }
      if (ei != vertex_idx) continue;
      std::istringstream ls(line);
      vals.assign(e.properties.size(), 0.0);
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        if (e.properties[p].is_list) {
          double cnt = 0;
          if (!(ls >> cnt)) malformed(path, "truncated vertex row: " + line);
          for (int j = 0; j < static_cast<int>(cnt); ++j) {
            double skip;
            ls >> skip;
          }
          continue;
        }
        if (!(ls >> vals[p])) malformed(path, "truncated vertex row: " + line);
        if (e.properties[p].type == ScalarType::kFloat32) vals[p] = static_cast<float>(vals[p]);
      }
      std::string extra;
      if (ls >> extra) malformed(path, "too many values in vertex row: " + line);
      assemble_vertex(e, lay, vals, cloud);
    }
  }
  if (next_line(line)) malformed(path, "element count mismatch: trailing data after last element");
  return cloud.size();
}

void read_binary(std::istream& in, const Header& h, const std::filesystem::path& path,
                 std::size_t vertex_idx, const VertexLayout& lay, PointCloud& cloud) {
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t bytes, const Element& e) {
    if (pos + bytes > buf.size()) {
      malformed(path, "element count mismatch: data ends inside element '" + e.name + "'");
    }
  };
  std::vector<double> vals;
  for (std::size_t ei = 0; ei < h.elements.size(); ++ei) {
    const Element& e = h.elements[ei];
    for (std::size_t k = 0; k < e.count; ++k) {
      vals.assign(e.properties.size(), 0.0);
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        const Property& prop = e.properties[p];
        if (prop.is_list) {
          need(scalar_size(prop.count_type), e);
          const double cnt = decode_binary(prop.count_type, buf.data() + pos);
          pos += scalar_size(prop.count_type);
          if (cnt < 0) malformed(path, "negative list length");
          const std::size_t bytes = static_cast<std::size_t>(cnt) * scalar_size(prop.type);
          need(bytes, e);
          pos += bytes;
          continue;
        }
        need(scalar_size(prop.type), e);
        vals[p] = decode_binary(prop.type, buf.data() + pos);
        pos += scalar_size(prop.type);
      }
      if (ei == vertex_idx) assemble_vertex(e, lay, vals, cloud);
    }
  }
  if (pos != buf.size()) malformed(path, "element count mismatch: trailing bytes after last element");
}

template <typename T>
void put_le(std::string& out, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  out.append(bytes, sizeof(T));
}

std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

void write_ply_impl(const PointCloud& cloud, const std::vector<Rgb8>* override_colors,
                    const std::filesystem::path& path, PlyEncoding encoding) {
  const bool binary = encoding == PlyEncoding::kBinaryLittleEndian;
  const bool with_normals = cloud.normals.has_value() && !override_colors;
  std::ostringstream hdr;
  hdr << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  if (cloud.viewpoint) {
    hdr << std::setprecision(17) << "comment viewpoint " << cloud.viewpoint->x() << ' '
        << cloud.viewpoint->y() << ' ' << cloud.viewpoint->z() << '\n';
  }
  hdr << "element vertex " << cloud.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (with_normals) hdr << "property float nx\nproperty float ny\nproperty float nz\n";
  hdr << "end_header\n";

  std::string body = hdr.str();
  std::ostringstream ascii;
  ascii << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const Rgb8 c = override_colors ? (*override_colors)[i]
                                   : Rgb8{to_byte(cloud.colors[i].x()), to_byte(cloud.colors[i].y()),
                                          to_byte(cloud.colors[i].z())};
    const double xyz[3] = {p.x(), p.y(), p.z()};
    if (binary) {
      for (double f : xyz) put_le(body, f);
      put_le(body, c.r);
      put_le(body, c.g);
      put_le(body, c.b);
      if (with_normals) {
        for (int k = 0; k < 3; ++k) put_le(body, static_cast<float>((*cloud.normals)[i][k]));
      }
    } else {
      ascii << xyz[0] << ' ' << xyz[1] << ' ' << xyz[2] << ' ' << int(c.r) << ' ' << int(c.g)
            << ' ' << int(c.b);
      if (with_normals) {
        for (int k = 0; k < 3; ++k) ascii << ' ' << std::setprecision(9) << static_cast<float>((*cloud.normals)[i][k]) << std::setprecision(17);
      }
      ascii << '\n';
    }
  }
  if (!binary) body += ascii.str();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace

PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  const Header h = parse_header(in, path);

  std::size_t vertex_idx = h.elements.size();
  for (std::size_t k = 0; k < h.elements.size(); ++k) {
    if (h.elements[k].name == "vertex") {
      vertex_idx = k;
      break;
    }
  }
  if (vertex_idx == h.elements.size()) malformed(path, "no vertex element");
  const Element& ve = h.elements[vertex_idx];
  if (ve.count == 0) malformed(path, "vertex element is empty");
  const VertexLayout lay = vertex_layout(ve, path);

  PointCloud cloud;
  cloud.positions.reserve(ve.count);
  cloud.colors.reserve(ve.count);
  if (lay.nx >= 0) cloud.normals.emplace().reserve(ve.count);
  if (h.binary) {
    read_binary(in, h, path, vertex_idx, lay, cloud);
  } else {
    read_ascii(in, h, path, vertex_idx, lay, cloud);
  }
  cloud.viewpoint = h.viewpoint;
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path, PlyEncoding encoding) {
  write_ply_impl(cloud, nullptr, path, encoding);
}

Rgb8 segment_color(std::uint32_t label) {
  // Each step is a bijection on 24-bit integers.
  std::uint32_t x = (label + 1u) & 0xffffffu;
  x = (x * 0x9e3779u) & 0xffffffu;
  x ^= x >> 12;
  x = (x * 0x5bd1e5u) & 0xffffffu;
  x ^= x >> 11;
  x = (x * 0x2c1b3du) & 0xffffffu;
  return {static_cast<std::uint8_t>(x >> 16), static_cast<std::uint8_t>((x >> 8) & 0xff),
          static_cast<std::uint8_t>(x & 0xff)};
}

void write_segmented_ply(const PointCloud& cloud, std::span<const std::uint32_t> labels,
                         const std::filesystem::path& path) {
  if (labels.size() != cloud.size()) {
    fail(ErrorCode::kPrecondition, "segmentation covers " + std::to_string(labels.size()) +
                                       " points but the cloud has " + std::to_string(cloud.size()));
  }
  std::vector<Rgb8> colors(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) colors[i] = segment_color(labels[i]);
  write_ply_impl(cloud, &colors, path, PlyEncoding::kBinaryLittleEndian);
}

}  // namespace pclv
