#include "cycreg/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cycreg {

namespace {

using nlohmann::json;

struct ContainerPaths {
  std::string header;
  std::string raw;
};

ContainerPaths container_paths(const std::string& path) {
  std::filesystem::path p(path);
  if (p.extension() == ".json" || p.extension() == ".raw") p.replace_extension();
  ContainerPaths out;
  out.header = p.string() + ".json";
  out.raw = p.string() + ".raw";
  return out;
}

json read_header(const std::string& header_path, const std::string& expected_kind) {
  std::ifstream in(header_path);
  if (!in) throw std::runtime_error("cannot open header file: " + header_path);
  json h;
  try {
    in >> h;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed header " + header_path + ": " + e.what());
  }
  for (const char* key : {"dims", "spacing_mm", "origin_mm", "dtype", "order", "kind"}) {
    if (!h.contains(key)) {
      throw std::runtime_error(header_path + ": missing header field '" + key + "'");
    }
  }
  if (h["dtype"] != "f32le") {
    throw std::runtime_error(header_path + ": unsupported dtype '" +
                             h["dtype"].get<std::string>() + "' (expected f32le)");
  }
  if (h["order"] != "x-fastest") {
    throw std::runtime_error(header_path + ": unsupported order '" +
                             h["order"].get<std::string>() + "'");
  }
  if (h["kind"] != expected_kind) {
    throw std::runtime_error(header_path + ": expected kind '" + expected_kind + "', got '" +
                             h["kind"].get<std::string>() + "'");
  }
  return h;
}

std::vector<float> read_raw(const std::string& raw_path, std::int64_t expected_count) {
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open raw file: " + raw_path);
  in.seekg(0, std::ios::end);
  const std::int64_t bytes = in.tellg();
  if (bytes != expected_count * 4) {
    throw std::runtime_error(raw_path + ": payload is " + std::to_string(bytes) +
                             " bytes, header requires " + std::to_string(expected_count * 4));
  }
  in.seekg(0);
  std::vector<unsigned char> buf(static_cast<std::size_t>(bytes));
  in.read(reinterpret_cast<char*>(buf.data()), bytes);
  if (!in) throw std::runtime_error("short read on " + raw_path);
  std::vector<float> values(static_cast<std::size_t>(expected_count));
  for (std::int64_t i = 0; i < expected_count; ++i) {
    const std::uint32_t u = std::uint32_t(buf[4 * i]) | (std::uint32_t(buf[4 * i + 1]) << 8) |
                            (std::uint32_t(buf[4 * i + 2]) << 16) |
                            (std::uint32_t(buf[4 * i + 3]) << 24);
    values[static_cast<std::size_t>(i)] = std::bit_cast<float>(u);
  }
  return values;
}

void write_raw(const std::string& raw_path, const std::vector<double>& values) {
  std::ofstream out(raw_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open raw file for writing: " + raw_path);
  std::vector<unsigned char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    buf[4 * i] = static_cast<unsigned char>(u & 0xff);
    buf[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
    buf[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
    buf[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("short write on " + raw_path);
}

void write_header(const std::string& header_path, const Index3& dims, const Real3& spacing,
                  const Real3& origin, const char* kind) {
  json h;
  h["dims"] = dims;
  h["spacing_mm"] = spacing;
  h["origin_mm"] = origin;
  h["dtype"] = "f32le";
  h["order"] = "x-fastest";
  h["kind"] = kind;
  std::ofstream out(header_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open header for writing: " + header_path);
  out << h.dump(2) << "\n";
}

void parse_geometry(const json& h, const std::string& header_path, Index3& dims, Real3& spacing,
                    Real3& origin) {
  try {
    dims = h["dims"].get<Index3>();
    spacing = h["spacing_mm"].get<Real3>();
    origin = h["origin_mm"].get<Real3>();
  } catch (const json::exception& e) {
    throw std::runtime_error(header_path + ": bad geometry fields: " + e.what());
  }
}

}  // namespace

Volume3D load_volume(const std::string& path) {
  const auto paths = container_paths(path);
  const json h = read_header(paths.header, "scalar");
  Index3 dims;
  Real3 spacing, origin;
  parse_geometry(h, paths.header, dims, spacing, origin);
  validate_geometry(dims, spacing);
  const std::int64_t n = static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  const std::vector<float> raw = read_raw(paths.raw, n);
  std::vector<double> values(raw.begin(), raw.end());
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(paths.raw + ": payload contains non-finite values");
    }
  }
  return Volume3D(dims, spacing, origin, std::move(values));
}

void save_volume(const Volume3D& v, const std::string& path) {
  const auto paths = container_paths(path);
  write_header(paths.header, v.dims, v.spacing_mm, v.origin_mm, "scalar");
  write_raw(paths.raw, v.data);
}

DisplacementField load_field(const std::string& path) {
  const auto paths = container_paths(path);
  const json h = read_header(paths.header, "field");
  Index3 dims;
  Real3 spacing, origin;
  parse_geometry(h, paths.header, dims, spacing, origin);
  validate_geometry(dims, spacing);
  const std::int64_t n = static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  const std::vector<float> raw = read_raw(paths.raw, 3 * n);
  std::vector<double> values(raw.begin(), raw.end());
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(paths.raw + ": payload contains non-finite values");
    }
  }
  return DisplacementField(dims, std::move(values));
}

void save_field(const DisplacementField& f, const std::string& path, Real3 spacing_mm,
                Real3 origin_mm) {
  const auto paths = container_paths(path);
  write_header(paths.header, f.dims, spacing_mm, origin_mm, "field");
  write_raw(paths.raw, f.vectors);
}

LandmarkSet load_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open landmark file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty landmark file");
  // tolerate trailing CR from windows-style files
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,x,y,z") {
    throw std::runtime_error(path + ": expected header line 'id,x,y,z', got '" + line + "'");
  }
  LandmarkSet out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    Landmark lm;
    std::string tok;
    if (!std::getline(ss, lm.id, ',')) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    for (int d = 0; d < 3; ++d) {
      if (!std::getline(ss, tok, ',')) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing coordinate");
      }
      std::size_t used = 0;
      try {
        lm.position[d] = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad coordinate '" +
                                 tok + "'");
      }
      if (used != tok.size() || !std::isfinite(lm.position[d])) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad coordinate '" +
                                 tok + "'");
      }
    }
    out.entries.push_back(std::move(lm));
  }
  validate_unique_ids(out);
  return out;
}

void save_landmarks(const LandmarkSet& points, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open landmark file for writing: " + path);
  out << "id,x,y,z\n";
  char buf[128];
  for (const auto& p : points.entries) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g\n", p.id.c_str(), p.position[0],
                  p.position[1], p.position[2]);
    out << buf;
  }
}

}  // namespace cycreg
