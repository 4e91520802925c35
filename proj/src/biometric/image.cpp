#include "facetts/biometric/image.hpp"

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "facetts/common/errors.hpp"

namespace facetts::bio {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void check_raster(const RgbImage& img) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height * 3) {
    throw ContractViolation("image raster size does not match its dimensions");
  }
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

struct PngErrorBuf {
  char message[256] = "";
};

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->bytes.size()) png_error(png, "truncated data");
  std::memcpy(out, st->bytes.data() + st->pos, n);
  st->pos += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_fn(png_structp) {}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<PngErrorBuf*>(png_get_error_ptr(png));
  std::snprintf(buf->message, sizeof(buf->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

RgbImage resize_nearest(const RgbImage& img, std::size_t width, std::size_t height) {
  check_raster(img);
  RgbImage out{width, height, std::vector<std::uint8_t>(width * height * 3)};
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * img.height / height;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = x * img.width / width;
      std::memcpy(out.at(x, y), img.at(sx, sy), 3);
    }
  }
  return out;
}

FaceImage to_face(const RgbImage& img) {
  const RgbImage r = (img.width == kFaceSize && img.height == kFaceSize) ? img : resize_nearest(img, kFaceSize, kFaceSize);
  FaceImage f;
  const std::size_t plane = kFaceSize * kFaceSize;
  f.chw.resize(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) f.chw[c * plane + p] = r.pixels[p * 3 + c] / 255.0;
  }
  return f;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  check_raster(img);
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (++digits > 9) throw IoError("PPM: header value too large");
    }
    if (digits == 0) throw IoError("PPM: malformed header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw IoError("PPM: missing P6 signature");
  pos = 2;
  RgbImage img;
  img.width = number();
  img.height = number();
  const std::size_t maxval = number();
  if (maxval == 0 || maxval > 255) throw IoError("PPM: only 8-bit maxval is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError("PPM: malformed header");
  ++pos;
  if (img.width == 0 || img.height == 0) throw IoError("PPM: empty image");
  const std::size_t n = img.width * img.height * 3;
  if (bytes.size() - pos < n) throw IoError("PPM: truncated pixel data");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::min<std::size_t>(255, p * 255 / maxval));
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  check_raster(img);
  std::vector<std::uint8_t> out;
  PngErrorBuf err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("PNG: cannot allocate encoder");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(std::string("PNG encode: ") + err.message);
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("PNG: missing signature");
  PngReadState st{bytes, 0};
  PngErrorBuf err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("PNG: cannot allocate decoder");
  }
  RgbImage img;
  std::vector<png_bytep> rows;
  bool bad_layout = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(std::string("PNG decode: ") + err.message);
  }
  png_set_read_fn(png, &st, png_read_fn);
  png_read_info(png, info);
  {
    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  if (png_get_rowbytes(png, info) != img.width * 3) {
    bad_layout = true;
  } else {
    img.pixels.resize(img.width * img.height * 3);
    rows.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.at(0, y);
    png_read_image(png, rows.data());
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (bad_layout) throw IoError("PNG: unsupported pixel layout");
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) { write_bytes(path, encode_ppm(img)); }

void write_png(const std::filesystem::path& path, const RgbImage& img) { write_bytes(path, encode_png(img)); }

RgbImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  throw IoError(path.string() + ": not a P6 or PNG image");
}

FaceImage load_face(const std::filesystem::path& path) { return to_face(read_image(path)); }

}  // namespace facetts::bio
