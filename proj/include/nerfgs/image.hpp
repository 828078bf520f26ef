#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

// Float RGB image in [0,1], row-major, (0,0) top-left.
struct Image {
  int width = 0, height = 0;
  std::vector<Vec3> pixels;

  Image() = default;
  Image(int w, int h, const Vec3& fill = {0, 0, 0}) : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

  Vec3& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  const Vec3& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }
};

inline unsigned char to_byte(real v) {
  real s = clamp(v, real(0), real(1)) * 255 + real(0.5);
  int b = int(s);
  return (unsigned char)(b > 255 ? 255 : b);
}

inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  require(bool(f), Errc::io, "cannot open for write: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(std::size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec3& p = img.at(x, y);
      row[x * 3 + 0] = to_byte(p.x);
      row[x * 3 + 1] = to_byte(p.y);
      row[x * 3 + 2] = to_byte(p.z);
    }
    f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
  require(bool(f), Errc::io, "write failed: " + path);
}

inline Image read_ppm(std::istream& f, const std::string& path) {
  std::string magic;
  f >> magic;
  require(magic == "P6", Errc::io, "unsupported PPM magic in " + path);
  auto next_token = [&f, &path]() {
    std::string tok;
    for (;;) {
      f >> tok;
      require(bool(f), Errc::io, "truncated PPM header: " + path);
      if (tok[0] == '#') {
        std::string line;
        std::getline(f, line);
        continue;
      }
      return tok;
    }
  };
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxv = std::stoi(next_token());
  require(maxv == 255, Errc::io, "only 8-bit PPM supported: " + path);
  f.get();  // the single whitespace after maxval
  Image img(w, h);
  std::vector<unsigned char> row(std::size_t(w) * 3);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
    require(f.gcount() == std::streamsize(row.size()), Errc::io, "truncated PPM data: " + path);
    for (int x = 0; x < w; ++x)
      img.at(x, y) = {real(row[x * 3 + 0]) / 255, real(row[x * 3 + 1]) / 255, real(row[x * 3 + 2]) / 255};
  }
  return img;
}

inline void write_png(const std::string& path, const Image& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  require(fp != nullptr, Errc::io, "cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(Errc::io, "libpng write error: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(std::size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec3& p = img.at(x, y);
      row[x * 3 + 0] = to_byte(p.x);
      row[x * 3 + 1] = to_byte(p.y);
      row[x * 3 + 2] = to_byte(p.z);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline Image read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  require(fp != nullptr, Errc::io, "cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(Errc::io, "libpng read error: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  int w = int(png_get_image_width(png, info));
  int h = int(png_get_image_height(png, info));
  require(png_get_channels(png, info) == 3, Errc::io, "unexpected channel count: " + path);
  Image img(w, h);
  std::vector<unsigned char> row(std::size_t(w) * 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      img.at(x, y) = {real(row[x * 3 + 0]) / 255, real(row[x * 3 + 1]) / 255, real(row[x * 3 + 2]) / 255};
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

// Dispatches on file magic: 8-bit PNG or binary PPM (P6).
inline Image read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), Errc::io, "cannot open: " + path);
  char magic[2] = {0, 0};
  f.read(magic, 2);
  f.seekg(0);
  if (magic[0] == 'P' && magic[1] == '6') return read_ppm(f, path);
  if ((unsigned char)magic[0] == 0x89 && magic[1] == 'P') {
    f.close();
    return read_png(path);
  }
  fail(Errc::io, "unsupported image format: " + path);
}

// Dispatches on extension (.png or .ppm).
inline void write_image(const std::string& path, const Image& img) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".png") return write_png(path, img);
  if (ext == ".ppm") return write_ppm(path, img);
  fail(Errc::io, "unsupported image extension: " + path);
}

}  // namespace nerfgs
