#include "score/png.hpp"

#include <zlib.h>

#include "score/errors.hpp"

namespace score {

namespace {

void put_u32be(std::string& out, std::uint32_t v) {
  out.push_back(char(v >> 24));
  out.push_back(char(v >> 16));
  out.push_back(char(v >> 8));
  out.push_back(char(v));
}

void chunk(std::string& out, const char* type, const std::string& data) {
  put_u32be(out, std::uint32_t(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_u32be(out, std::uint32_t(crc32(0L, reinterpret_cast<const Bytef*>(body.data()), uInt(body.size()))));
}

}  // namespace

std::string encode_png(const RgbImage& img) {
  if (img.width == 0 || img.height == 0 ||
      img.pixels.size() != std::size_t(img.width) * img.height * 3)
    throw ShapeError("png: pixel buffer does not match dimensions");

  std::string raw;
  raw.reserve(std::size_t(img.height) * (std::size_t(img.width) * 3 + 1));
  for (std::uint32_t y = 0; y < img.height; ++y) {
    raw.push_back('\0');  // filter: none
    const auto* row = img.pixels.data() + std::size_t(y) * img.width * 3;
    raw.append(reinterpret_cast<const char*>(row), std::size_t(img.width) * 3);
  }
  uLongf zlen = compressBound(uLong(raw.size()));
  std::string z(zlen, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen,
                reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()), 6) != Z_OK)
    throw IoError("png: deflate failed");
  z.resize(zlen);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32be(ihdr, img.width);
  put_u32be(ihdr, img.height);
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", z);
  chunk(out, "IEND", std::string());
  return out;
}

}  // namespace score
