#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rgbdfit/camera.hpp"
#include "rgbdfit/error.hpp"
#include "rgbdfit/integral.hpp"
#include "rgbdfit/lattice.hpp"
#include "rgbdfit/synth.hpp"

namespace rgbdfit::io {

// Depth stored in 16-bit PGM files is in millimeters.
inline constexpr double kMillimeter = 1e-3;

namespace detail {

inline std::string read_token(std::istream& in, const std::string& path) {
  std::string tok;
  while (in) {
    int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  if (!(in >> tok)) throw ParseError(path + ": truncated header");
  return tok;
}

inline int read_int(std::istream& in, const std::string& path) {
  const std::string tok = read_token(in, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 0) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ": bad header value '" + tok + "'");
  }
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  return out;
}

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

inline NetpbmHeader read_netpbm_header(std::istream& in, const std::string& path) {
  NetpbmHeader h;
  h.magic = read_token(in, path);
  if (h.magic != "P5" && h.magic != "P6") throw ParseError(path + ": not a binary PGM/PPM file");
  h.width = read_int(in, path);
  h.height = read_int(in, path);
  h.maxval = read_int(in, path);
  if (h.width == 0 || h.height == 0 || h.maxval == 0 || h.maxval > 65535) {
    throw ParseError(path + ": bad image header");
  }
  in.get();  // single whitespace before the raster
  return h;
}

}  // namespace detail

/// 16-bit binary PGM, big-endian samples in millimeters, 0 marking invalid.
/// Depths beyond 65.535 m are written as invalid.
inline void write_depth_pgm(const std::string& path, const DepthImage& img) {
  auto out = detail::open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::vector<unsigned char> buf(img.depth.size() * 2);
  const auto z = img.depth.values();
  const auto ok = img.valid.values();
  for (std::size_t i = 0; i < z.size(); ++i) {
    long mm = ok[i] ? std::lround(z[i] / kMillimeter) : 0;
    if (mm < 0 || mm > 65535) mm = 0;
    buf[2 * i] = static_cast<unsigned char>(mm >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(mm & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ParseError(path + ": write failed");
}

inline DepthImage read_depth_pgm(const std::string& path) {
  auto in = detail::open_in(path);
  const auto h = detail::read_netpbm_header(in, path);
  if (h.magic != "P5") throw ParseError(path + ": depth file must be a PGM (P5)");
  const std::size_t bytes = h.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(h.width) * h.height * bytes);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw ParseError(path + ": truncated raster");
  }
  DepthImage img(h.width, h.height);
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * h.width + x) * bytes;
      const unsigned v = bytes == 2 ? (unsigned{buf[i]} << 8) | buf[i + 1] : buf[i];
      if (v != 0) img.set(x, y, v * kMillimeter);
    }
  }
  return img;
}

inline void write_pgm8(const std::string& path, const Lattice<std::uint8_t>& img) {
  auto out = detail::open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.values().data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw ParseError(path + ": write failed");
}

inline Lattice<std::uint8_t> read_pgm8(const std::string& path) {
  auto in = detail::open_in(path);
  const auto h = detail::read_netpbm_header(in, path);
  if (h.magic != "P5" || h.maxval > 255) throw ParseError(path + ": expected an 8-bit PGM");
  Lattice<std::uint8_t> img(h.width, h.height);
  if (!in.read(reinterpret_cast<char*>(img.values().data()), static_cast<std::streamsize>(img.size()))) {
    throw ParseError(path + ": truncated raster");
  }
  return img;
}

// Plane labels as 8-bit PGM: 0 for no plane, plane index + 1 otherwise.
inline Lattice<std::uint8_t> encode_labels(const Lattice<std::uint8_t>& labels) {
  Lattice<std::uint8_t> out(labels.width(), labels.height(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = labels.values()[i];
    out.values()[i] = v == kNoPlane ? 0 : static_cast<std::uint8_t>(v + 1);
  }
  return out;
}

inline void write_ppm(const std::string& path, const Lattice<std::array<std::uint8_t, 3>>& img) {
  auto out = detail::open_out(path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.values().data()), static_cast<std::streamsize>(img.size() * 3));
  if (!out) throw ParseError(path + ": write failed");
}

inline Lattice<std::array<std::uint8_t, 3>> read_ppm(const std::string& path) {
  auto in = detail::open_in(path);
  const auto h = detail::read_netpbm_header(in, path);
  if (h.magic != "P6" || h.maxval > 255) throw ParseError(path + ": expected an 8-bit PPM");
  Lattice<std::array<std::uint8_t, 3>> img(h.width, h.height);
  if (!in.read(reinterpret_cast<char*>(img.values().data()), static_cast<std::streamsize>(img.size() * 3))) {
    throw ParseError(path + ": truncated raster");
  }
  return img;
}

/// Raw float64 lattice file: one text header line
///   F64 <width> <height> <planes> [name]
/// followed by planes * width * height little-endian doubles, plane-major,
/// rows top to bottom.
struct RawLattices {
  std::string name;
  std::vector<Lattice<double>> planes;
};

inline void write_raw(const std::string& path, const std::vector<const Lattice<double>*>& planes,
                      const std::string& name = {}) {
  if (planes.empty()) throw ConfigError("raw file needs at least one plane");
  for (const auto* p : planes) require_same_shape(*p, *planes.front(), "raw planes");
  if (name.find_first_of(" \t\n") != std::string::npos) throw ConfigError("raw plane name must not contain spaces");
  auto out = detail::open_out(path);
  out << "F64 " << planes.front()->width() << ' ' << planes.front()->height() << ' ' << planes.size();
  if (!name.empty()) out << ' ' << name;
  out << '\n';
  std::vector<unsigned char> buf(planes.front()->size() * 8);
  for (const auto* p : planes) {
    const auto v = p->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(v[i]);
      for (int b = 0; b < 8; ++b) buf[8 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw ParseError(path + ": write failed");
}

inline RawLattices read_raw(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  std::istringstream hs(line);
  std::string magic;
  long w = 0, h = 0, n = 0;
  hs >> magic >> w >> h >> n;
  if (magic != "F64" || !hs || w <= 0 || h <= 0 || n <= 0) throw ParseError(path + ": bad F64 header");
  RawLattices out;
  hs >> out.name;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w * h) * 8);
  for (long p = 0; p < n; ++p) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw ParseError(path + ": truncated data");
    }
    Lattice<double> lat(static_cast<int>(w), static_cast<int>(h));
    auto v = lat.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= std::uint64_t{buf[8 * i + b]} << (8 * b);
      v[i] = std::bit_cast<double>(bits);
    }
    out.planes.push_back(std::move(lat));
  }
  return out;
}

// Raw depth: one plane of meters, non-positive or non-finite meaning invalid.
inline void write_depth_raw(const std::string& path, const DepthImage& img) {
  write_raw(path, {&img.depth}, "depth");
}

inline DepthImage read_depth_raw(const std::string& path) {
  auto raw = read_raw(path);
  if (raw.planes.size() != 1) throw ParseError(path + ": depth file must hold exactly one plane");
  const auto& z = raw.planes.front();
  DepthImage img(z.width(), z.height());
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) img.set(x, y, z(x, y));
  }
  return img;
}

// Dispatches on the file's magic bytes.
inline DepthImage read_depth(const std::string& path) {
  auto in = detail::open_in(path);
  char magic[3] = {};
  in.read(magic, 3);
  if (std::strncmp(magic, "P5", 2) == 0) return read_depth_pgm(path);
  if (std::strncmp(magic, "F64", 3) == 0) return read_depth_raw(path);
  throw ParseError(path + ": unrecognized depth format (expected PGM or F64)");
}

// One raw file per channel, named <prefix><channel>.f64.
inline void dump_channels(const ChannelStack& stack, const std::string& prefix) {
  for (const auto& c : stack.channels()) {
    const std::string name(monomial_name(c.monomial));
    write_raw(prefix + name + ".f64", {&c.image.table()}, name);
  }
}

namespace detail {

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError(what + ": not a number '" + s + "'");
  }
}

}  // namespace detail

/// Intrinsics from a key=value text file: fx, fy, cx, cy, width, height and
/// optionally distortion=<path> naming a two-plane F64 file (delta_x then
/// delta_y). A relative distortion path is resolved against the file's
/// directory.
inline CameraIntrinsics load_intrinsics(const std::string& path) {
  const auto kv = detail::read_key_values(path);
  auto need = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(path + ": missing '" + key + "'");
    return detail::parse_double(it->second, path + ": " + key);
  };
  for (const auto& [k, v] : kv) {
    if (k != "fx" && k != "fy" && k != "cx" && k != "cy" && k != "width" && k != "height" && k != "distortion") {
      throw ParseError(path + ": unknown key '" + k + "'");
    }
  }
  const double fx = need("fx"), fy = need("fy"), cx = need("cx"), cy = need("cy");
  const double w = need("width"), h = need("height");
  if (w != std::floor(w) || h != std::floor(h) || w <= 0 || h <= 0) {
    throw ParseError(path + ": width and height must be positive integers");
  }
  try {
    if (auto it = kv.find("distortion"); it != kv.end()) {
      std::filesystem::path dp(it->second);
      if (dp.is_relative()) dp = std::filesystem::path(path).parent_path() / dp;
      auto raw = read_raw(dp.string());
      if (raw.planes.size() != 2) throw ParseError(dp.string() + ": distortion file needs two planes");
      if (!raw.planes[0].same_shape(static_cast<int>(w), static_cast<int>(h))) {
        throw ParseError(dp.string() + ": distortion maps do not match the image size");
      }
      return CameraIntrinsics(fx, fy, cx, cy, std::move(raw.planes[0]), std::move(raw.planes[1]));
    }
    return CameraIntrinsics(fx, fy, cx, cy, static_cast<int>(w), static_cast<int>(h));
  } catch (const ConfigError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_intrinsics(const std::string& path, const CameraIntrinsics& cam) {
  auto out = detail::open_out(path);
  out.precision(17);
  out << "fx=" << cam.fx() << "\nfy=" << cam.fy() << "\ncx=" << cam.cx() << "\ncy=" << cam.cy()
      << "\nwidth=" << cam.width() << "\nheight=" << cam.height() << '\n';
}

/// Scene file: one plane per line, "a b c d [x0 y0 x1 y1]", where the
/// optional half-open pixel rectangle restricts the plane. '#' starts a
/// comment.
inline SyntheticScene parse_scene(std::istream& in, const std::string& source) {
  SyntheticScene scene;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (tok.size() != 4 && tok.size() != 8) throw ParseError(where + ": expected 'a b c d [x0 y0 x1 y1]'");
    std::array<double, 4> c{};
    for (int i = 0; i < 4; ++i) c[i] = detail::parse_double(tok[i], where);
    std::optional<PixelRect> mask;
    if (tok.size() == 8) {
      std::array<int, 4> m{};
      for (int i = 0; i < 4; ++i) {
        const double v = detail::parse_double(tok[4 + i], where);
        if (v != std::floor(v)) throw ParseError(where + ": mask coordinates must be integers");
        m[i] = static_cast<int>(v);
      }
      mask = PixelRect{m[0], m[1], m[2], m[3]};
    }
    try {
      scene.planes.emplace_back(c[0], c[1], c[2], c[3], mask);
    } catch (const ConfigError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  if (scene.planes.empty()) throw ParseError(source + ": no planes");
  return scene;
}

inline SyntheticScene load_scene(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_scene(in, path);
}

}  // namespace rgbdfit::io
