// Copyright 2026 the vcx authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal deterministic PNG codec over zlib. The writer always emits 8-bit
// non-interlaced images with filter type 0 and a fixed compression level, so
// the same pixels produce the same bytes on every run and platform. The
// reader accepts 8-bit grayscale, gray+alpha, RGB, and RGBA with any of the
// five standard scanline filters; palette and 16-bit images are rejected.

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcx::io {

// Row-major interleaved 8-bit image. channels is 1, 2, 3, or 4.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int y, int x, int c) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::uint8_t* data, std::size_t len) {
  put_u32_be(out, static_cast<std::uint32_t>(len));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  if (len > 0) out.insert(out.end(), data, data + len);
  const auto crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), out.data() + type_at, static_cast<uInt>(4 + len)));
  put_u32_be(out, crc);
}

inline std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

inline std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  const int rc = compress2(out.data(), &bound, raw.data(),
                           static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION);
  if (rc != Z_OK) throw std::runtime_error("png: deflate failed");
  out.resize(bound);
  return out;
}

inline std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t len,
                                              std::size_t expect) {
  std::vector<std::uint8_t> out(expect);
  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  if (inflateInit(&zs) != Z_OK) throw std::runtime_error("png: inflate init failed");
  zs.next_in = const_cast<Bytef*>(data);
  zs.avail_in = static_cast<uInt>(len);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const uLong got = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || got != expect)
    throw std::runtime_error("png: compressed data does not match declared size");
  return out;
}

// Reverses one scanline filter in place. prev is null for the first row.
inline void unfilter_row(std::uint8_t filter, std::uint8_t* row, const std::uint8_t* prev,
                         std::size_t len, std::size_t bpp) {
  switch (filter) {
    case 0:
      break;
    case 1:
      for (std::size_t i = bpp; i < len; ++i) row[i] = static_cast<std::uint8_t>(row[i] + row[i - bpp]);
      break;
    case 2:
      if (prev != nullptr)
        for (std::size_t i = 0; i < len; ++i) row[i] = static_cast<std::uint8_t>(row[i] + prev[i]);
      break;
    case 3:
      for (std::size_t i = 0; i < len; ++i) {
        const int left = i >= bpp ? row[i - bpp] : 0;
        const int up = prev != nullptr ? prev[i] : 0;
        row[i] = static_cast<std::uint8_t>(row[i] + (left + up) / 2);
      }
      break;
    case 4:
      for (std::size_t i = 0; i < len; ++i) {
        const int left = i >= bpp ? row[i - bpp] : 0;
        const int up = prev != nullptr ? prev[i] : 0;
        const int ul = (prev != nullptr && i >= bpp) ? prev[i - bpp] : 0;
        row[i] = static_cast<std::uint8_t>(row[i] + paeth(left, up, ul));
      }
      break;
    default:
      throw std::runtime_error("png: unknown filter type " + std::to_string(filter));
  }
}

inline int channels_of_color_type(std::uint8_t color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 4: return 2;
    case 6: return 4;
    case 3:
      throw std::runtime_error("png: palette images are not supported; convert to gray or RGB");
    default:
      throw std::runtime_error("png: unsupported color type " + std::to_string(color_type));
  }
}

}  // namespace detail

// Serializes an image to PNG bytes. Deterministic: fixed zlib level, filter 0
// on every row, no ancillary chunks.
inline std::vector<std::uint8_t> encode_png(const ImageU8& img) {
  if (img.width <= 0 || img.height <= 0)
    throw std::invalid_argument("png: empty image");
  if (img.channels < 1 || img.channels > 4)
    throw std::invalid_argument("png: channels must be 1..4");
  const std::size_t want =
      static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (img.pixels.size() != want)
    throw std::invalid_argument("png: pixel buffer size mismatch");

  static const std::uint8_t kColorType[5] = {0, 0, 4, 2, 6};
  std::uint8_t ihdr[13];
  std::uint32_t w = static_cast<std::uint32_t>(img.width);
  std::uint32_t h = static_cast<std::uint32_t>(img.height);
  ihdr[0] = static_cast<std::uint8_t>(w >> 24);
  ihdr[1] = static_cast<std::uint8_t>(w >> 16);
  ihdr[2] = static_cast<std::uint8_t>(w >> 8);
  ihdr[3] = static_cast<std::uint8_t>(w);
  ihdr[4] = static_cast<std::uint8_t>(h >> 24);
  ihdr[5] = static_cast<std::uint8_t>(h >> 16);
  ihdr[6] = static_cast<std::uint8_t>(h >> 8);
  ihdr[7] = static_cast<std::uint8_t>(h);
  ihdr[8] = 8;
  ihdr[9] = kColorType[img.channels];
  ihdr[10] = 0;
  ihdr[11] = 0;
  ihdr[12] = 0;

  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = img.pixels.data() + static_cast<std::size_t>(y) * stride;
    raw.insert(raw.end(), row, row + stride);
  }
  const std::vector<std::uint8_t> idat = detail::zlib_deflate(raw);

  std::vector<std::uint8_t> out;
  static const std::uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.insert(out.end(), kSig, kSig + 8);
  detail::append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  detail::append_chunk(out, "IDAT", idat.data(), idat.size());
  detail::append_chunk(out, "IEND", nullptr, 0);
  return out;
}

// Parses PNG bytes. Accepts 8-bit non-interlaced gray, gray+alpha, RGB, RGBA.
inline ImageU8 decode_png(const std::uint8_t* data, std::size_t len) {
  static const std::uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (len < 8 || std::memcmp(data, kSig, 8) != 0)
    throw std::runtime_error("png: bad signature");

  std::size_t pos = 8;
  bool seen_ihdr = false;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int channels = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 8 <= len) {
    const std::uint32_t clen = detail::get_u32_be(data + pos);
    if (pos + 12 + static_cast<std::size_t>(clen) > len)
      throw std::runtime_error("png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(data + pos + 4);
    const std::uint8_t* body = data + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (clen != 13) throw std::runtime_error("png: bad IHDR length");
      width = detail::get_u32_be(body);
      height = detail::get_u32_be(body + 4);
      const std::uint8_t bit_depth = body[8];
      const std::uint8_t color_type = body[9];
      const std::uint8_t interlace = body[12];
      if (bit_depth != 8)
        throw std::runtime_error("png: only 8-bit depth is supported, got " +
                                 std::to_string(bit_depth));
      if (interlace != 0) throw std::runtime_error("png: interlaced images are not supported");
      channels = detail::channels_of_color_type(color_type);
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), body, body + clen);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + clen;
  }
  if (!seen_ihdr) throw std::runtime_error("png: missing IHDR");
  if (width == 0 || height == 0) throw std::runtime_error("png: zero dimension");

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  const std::size_t expect = (stride + 1) * height;
  std::vector<std::uint8_t> raw = detail::zlib_inflate(idat.data(), idat.size(), expect);

  ImageU8 img;
  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  img.channels = channels;
  img.pixels.resize(stride * height);
  const std::uint8_t* prev = nullptr;
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    std::uint8_t* row = img.pixels.data() + y * stride;
    std::memcpy(row, raw.data() + y * (stride + 1) + 1, stride);
    detail::unfilter_row(filter, row, prev, stride, static_cast<std::size_t>(channels));
    prev = row;
  }
  return img;
}

inline void write_png(const std::string& path, const ImageU8& img) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw std::runtime_error("png: cannot open for write: " + path);
  const std::size_t put = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (put != bytes.size()) throw std::runtime_error("png: short write: " + path);
}

inline ImageU8 read_png(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw std::runtime_error("png: cannot open: " + path);
  std::fseek(f, 0, SEEK_END);
  const long sz = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<std::uint8_t> bytes(sz > 0 ? static_cast<std::size_t>(sz) : 0);
  const std::size_t got = bytes.empty() ? 0 : std::fread(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (got != bytes.size()) throw std::runtime_error("png: short read: " + path);
  try {
    return decode_png(bytes.data(), bytes.size());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(e.what()) + " (" + path + ")");
  }
}

}  // namespace vcx::io
