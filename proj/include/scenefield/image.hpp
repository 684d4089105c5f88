#pragma once

// Float RGB images plus file I/O: 8-bit PNG (via zlib for the IDAT stream) and
// a lossless little-endian float32 raster for depth maps.
//
// Depth raster layout: magic "SFDR", u32 version=1, u32 width, u32 height,
// then width*height little-endian float32 values in row-major order.

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenefield {

// Row-major H x W x 3, values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(size_t(w) * h * 3, 0.0) {}

  double& at(int x, int y, int c) { return rgb[(size_t(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return rgb[(size_t(y) * width + x) * 3 + c]; }
  size_t num_pixels() const { return size_t(width) * height; }

  void fill(double r, double g, double b) {
    for (size_t i = 0; i < num_pixels(); ++i) {
      rgb[i * 3 + 0] = r;
      rgb[i * 3 + 1] = g;
      rgb[i * 3 + 2] = b;
    }
  }
};

namespace detail {

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

inline uint32_t get_u32_be(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void append_chunk(std::vector<uint8_t>& out, const char type[4],
                         const std::vector<uint8_t>& data) {
  put_u32_be(out, uint32_t(data.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc =
      uint32_t(::crc32(0, out.data() + start, uInt(out.size() - start)));
  put_u32_be(out, crc);
}

inline std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& raw) {
  uLongf bound = ::compressBound(uLong(raw.size()));
  std::vector<uint8_t> out(bound);
  if (::compress2(out.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw std::runtime_error("zlib compression failed");
  out.resize(bound);
  return out;
}

inline std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& comp, size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf len = uLongf(expected);
  if (::uncompress(out.data(), &len, comp.data(), uLong(comp.size())) != Z_OK ||
      len != expected)
    throw std::runtime_error("zlib decompression failed");
  return out;
}

inline uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return uint8_t(a);
  if (pb <= pc) return uint8_t(b);
  return uint8_t(c);
}

}  // namespace detail

inline uint8_t quantize_8bit(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return uint8_t(std::lround(c * 255.0));
}

inline std::vector<uint8_t> encode_png(const Image& img) {
  using namespace detail;
  if (img.width < 1 || img.height < 1) throw std::invalid_argument("empty image");
  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, uint32_t(img.width));
  put_u32_be(ihdr, uint32_t(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  append_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve(size_t(img.height) * (size_t(img.width) * 3 + 1));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter type none
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) raw.push_back(quantize_8bit(img.at(x, y, c)));
  }
  append_chunk(out, "IDAT", zlib_deflate(raw));
  append_chunk(out, "IEND", {});
  return out;
}

inline Image decode_png(const std::vector<uint8_t>& bytes) {
  using namespace detail;
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
    throw std::runtime_error("not a PNG file");

  int width = 0, height = 0, color_type = -1;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = get_u32_be(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw std::runtime_error("truncated PNG chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = int(get_u32_be(data));
      height = int(get_u32_be(data + 4));
      const int bit_depth = data[8];
      color_type = data[9];
      if (bit_depth != 8) throw std::runtime_error("only 8-bit PNGs supported");
      if (color_type != 0 && color_type != 2 && color_type != 6)
        throw std::runtime_error("unsupported PNG color type");
      if (data[12] != 0) throw std::runtime_error("interlaced PNGs not supported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width < 1 || height < 1 || idat.empty()) throw std::runtime_error("malformed PNG");

  const int channels = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
  const size_t stride = size_t(width) * channels;
  std::vector<uint8_t> raw = zlib_inflate(idat, size_t(height) * (stride + 1));

  // Undo per-row filters in place.
  std::vector<uint8_t> pix(size_t(height) * stride, 0);
  for (int y = 0; y < height; ++y) {
    const uint8_t filter = raw[size_t(y) * (stride + 1)];
    const uint8_t* src = &raw[size_t(y) * (stride + 1) + 1];
    uint8_t* dst = &pix[size_t(y) * stride];
    const uint8_t* up = y > 0 ? &pix[size_t(y - 1) * stride] : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= size_t(channels) ? dst[i - channels] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= size_t(channels)) ? up[i - channels] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += detail::paeth(a, b, c); break;
        default: throw std::runtime_error("bad PNG filter type");
      }
      dst[i] = uint8_t(v);
    }
  }

  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const uint8_t* p = &pix[size_t(y) * stride + size_t(x) * channels];
      if (channels == 1) {
        const double v = p[0] / 255.0;
        img.at(x, y, 0) = img.at(x, y, 1) = img.at(x, y, 2) = v;
      } else {
        img.at(x, y, 0) = p[0] / 255.0;
        img.at(x, y, 1) = p[1] / 255.0;
        img.at(x, y, 2) = p[2] / 255.0;
      }
    }
  return img;
}

inline void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open: " + path);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(size_t(n), 0);
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw std::runtime_error("short read: " + path);
  return bytes;
}

inline void write_png(const std::string& path, const Image& img) {
  write_file_bytes(path, encode_png(img));
}

inline Image read_png(const std::string& path) { return decode_png(read_file_bytes(path)); }

inline void write_depth_raster(const std::string& path, int width, int height,
                               const std::vector<double>& depth) {
  if (depth.size() != size_t(width) * height) throw std::invalid_argument("depth size mismatch");
  std::vector<uint8_t> out;
  const char magic[4] = {'S', 'F', 'D', 'R'};
  out.insert(out.end(), magic, magic + 4);
  auto put_u32 = [&out](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
  };
  put_u32(1);
  put_u32(uint32_t(width));
  put_u32(uint32_t(height));
  for (const double d : depth) {
    const float f = float(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
  write_file_bytes(path, out);
}

inline std::vector<double> read_depth_raster(const std::string& path, int* width, int* height) {
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "SFDR", 4) != 0)
    throw std::runtime_error("not a depth raster: " + path);
  auto get_u32 = [&bytes](size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[off + i]) << (8 * i);
    return v;
  };
  if (get_u32(4) != 1) throw std::runtime_error("unsupported depth raster version");
  const int w = int(get_u32(8)), h = int(get_u32(12));
  if (bytes.size() != 16 + size_t(w) * h * 4) throw std::runtime_error("truncated depth raster");
  std::vector<double> depth(size_t(w) * h);
  for (size_t i = 0; i < depth.size(); ++i) {
    const uint32_t bits = get_u32(16 + i * 4);
    float f;
    std::memcpy(&f, &bits, 4);
    depth[i] = double(f);
  }
  if (width) *width = w;
  if (height) *height = h;
  return depth;
}

}  // namespace scenefield
