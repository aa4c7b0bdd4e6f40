#include "nca/png.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace nca {

namespace {

void put_u32(std::string& s, uint32_t v) {
  s.push_back((char)(v >> 24));
  s.push_back((char)(v >> 16));
  s.push_back((char)(v >> 8));
  s.push_back((char)v);
}

uint32_t get_u32(const unsigned char* p) {
  return (uint32_t)p[0] << 24 | (uint32_t)p[1] << 16 | (uint32_t)p[2] << 8 | p[3];
}

void write_chunk(std::ofstream& f, const char type[4], const std::string& data) {
  std::string head;
  put_u32(head, (uint32_t)data.size());
  head.append(type, 4);
  std::string crc_input = head.substr(4) + data;
  uint32_t crc = crc32(0, (const Bytef*)crc_input.data(), (uInt)crc_input.size());
  f.write(head.data(), head.size());
  f.write(data.data(), data.size());
  std::string tail;
  put_u32(tail, crc);
  f.write(tail.data(), tail.size());
}

int paeth(int a, int b, int c) {
  int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace

void write_png_gray(const std::string& path, const Frame& frame) {
  const int h = (int)frame.rows(), w = (int)frame.cols();
  require(h > 0 && w > 0, "png: empty frame");
  std::string raw;
  raw.reserve((size_t)h * (w + 1));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    for (int x = 0; x < w; ++x) {
      float v = std::clamp(frame(y, x), 0.0f, 1.0f);
      raw.push_back((char)(unsigned char)std::lround(v * 255.0f));
    }
  }
  uLongf bound = compressBound((uLong)raw.size());
  std::string compressed(bound, '\0');
  require(compress2((Bytef*)compressed.data(), &bound, (const Bytef*)raw.data(),
                    (uLong)raw.size(), 6) == Z_OK,
          "png: deflate failed");
  compressed.resize(bound);

  std::ofstream f(path, std::ios::binary);
  require(f.good(), "png: cannot open " + path + " for writing");
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  f.write((const char*)sig, 8);
  std::string ihdr;
  put_u32(ihdr, (uint32_t)w);
  put_u32(ihdr, (uint32_t)h);
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(f, "IHDR", ihdr);
  write_chunk(f, "IDAT", compressed);
  write_chunk(f, "IEND", "");
  require(f.good(), "png: write failed for " + path);
}

Frame read_png_gray(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "png: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(data.size() > 8 && (unsigned char)data[1] == 'P', "png: not a PNG file: " + path);

  uint32_t w = 0, h = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::string idat;
  size_t at = 8;
  while (at + 8 <= data.size()) {
    uint32_t len = get_u32((const unsigned char*)data.data() + at);
    std::string type = data.substr(at + 4, 4);
    const char* payload = data.data() + at + 8;
    if (type == "IHDR") {
      w = get_u32((const unsigned char*)payload);
      h = get_u32((const unsigned char*)payload + 4);
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
    } else if (type == "IDAT") {
      idat.append(payload, len);
    } else if (type == "IEND") {
      break;
    }
    at += 12 + len;
  }
  require(w > 0 && h > 0 && bit_depth == 8 && interlace == 0,
          "png: only 8-bit non-interlaced images are supported: " + path);
  const int channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
  require(color_type == 0 || color_type == 2 || color_type == 4 || color_type == 6,
          "png: unsupported color type");

  const size_t stride = (size_t)w * channels;
  uLongf raw_len = (uLongf)((stride + 1) * h);
  std::string raw(raw_len, '\0');
  require(uncompress((Bytef*)raw.data(), &raw_len, (const Bytef*)idat.data(),
                     (uLong)idat.size()) == Z_OK && raw_len == (stride + 1) * h,
          "png: inflate failed for " + path);

  // undo per-row filters in place
  std::vector<unsigned char> img((size_t)h * stride);
  for (uint32_t y = 0; y < h; ++y) {
    const unsigned char filter = (unsigned char)raw[y * (stride + 1)];
    const unsigned char* src = (const unsigned char*)raw.data() + y * (stride + 1) + 1;
    unsigned char* dst = img.data() + y * stride;
    const unsigned char* above = y ? img.data() + (y - 1) * stride : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= (size_t)channels ? dst[x - channels] : 0;
      const int b = above ? above[x] : 0;
      const int c = (above && x >= (size_t)channels) ? above[x - channels] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: fail("png: bad filter byte");
      }
      dst[x] = (unsigned char)v;
    }
  }

  Frame out(h, w);
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) {
      const unsigned char* px = img.data() + y * stride + (size_t)x * channels;
      float v;
      if (channels <= 2)
        v = px[0] / 255.0f;
      else
        v = (0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2]) / 255.0f;
      out(y, x) = v;
    }
  return out;
}

}  // namespace nca
