#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "bcs/error.hpp"
#include "bcs/imaging.hpp"

namespace bcs {

namespace {

// Reads the next whitespace-separated header token, skipping # comments.
std::string netpbm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

Index header_number(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = netpbm_token(in);
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used == tok.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw IoError(path + ": bad " + what + " in header ('" + tok + "')");
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

GrayImage read_pgm_stream(std::istream& in, const std::string& path) {
  const Index w = header_number(in, path, "width");
  const Index h = header_number(in, path, "height");
  const Index maxval = header_number(in, path, "maxval");
  if (maxval > 65535) throw IoError(path + ": maxval above 65535");
  const int bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError(path + ": truncated pixel data");
  GrayImage img;
  img.pixels.resize(h, w);
  const double scale = 255.0 / static_cast<double>(maxval);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const std::size_t at = static_cast<std::size_t>((r * w + c) * bytes);
      const double v = bytes == 1 ? raw[at] : (raw[at] << 8 | raw[at + 1]);
      img.pixels(r, c) = maxval == 255 ? v : v * scale;
    }
  return img;
}

GrayImage read_png_file(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError(path + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path + ": " + msg);
  }
  GrayImage img;
  img.pixels.resize(image.height, image.width);
  for (Index r = 0; r < static_cast<Index>(image.height); ++r)
    for (Index c = 0; c < static_cast<Index>(image.width); ++c)
      img.pixels(r, c) = buffer[static_cast<std::size_t>(r * image.width + c)];
  return img;
}

}  // namespace

GrayImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '5') {
    in.clear();
    in.seekg(2);
    return read_pgm_stream(in, path);
  }
  if (in.gcount() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(magic), 0, 8) == 0) return read_png_file(path);
  throw IoError(path + ": not a binary PGM (P5) or PNG file");
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(img.width()));
  for (Index r = 0; r < img.height(); ++r) {
    for (Index c = 0; c < img.width(); ++c) row[static_cast<std::size_t>(c)] = static_cast<char>(to_byte(img.pixels(r, c)));
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_png(const GrayImage& img, const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(static_cast<std::size_t>(img.width() * img.height()));
  for (Index r = 0; r < img.height(); ++r)
    for (Index c = 0; c < img.width(); ++c) buffer[static_cast<std::size_t>(r * img.width() + c)] = to_byte(img.pixels(r, c));
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw IoError(path + ": " + image.message);
}

void write_image(const GrayImage& img, const std::string& path) {
  if (ends_with(path, ".png"))
    write_png(img, path);
  else
    write_pgm(img, path);
}

Mask read_pbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask '" + path + "'");
  if (netpbm_token(in) != "P4") throw IoError(path + ": not a binary PBM (P4) file");
  const Index w = header_number(in, path, "width");
  const Index h = header_number(in, path, "height");
  const Index stride = (w + 7) / 8;
  std::vector<unsigned char> raw(static_cast<std::size_t>(stride * h));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError(path + ": truncated bit data");
  Mask mask(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) mask(r, c) = (raw[static_cast<std::size_t>(r * stride + c / 8)] >> (7 - c % 8)) & 1;
  return mask;
}

void write_pbm(const Mask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "P4\n" << mask.cols() << ' ' << mask.rows() << "\n";
  const Index stride = (mask.cols() + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(stride));
  for (Index r = 0; r < mask.rows(); ++r) {
    std::fill(row.begin(), row.end(), 0);
    for (Index c = 0; c < mask.cols(); ++c)
      if (mask(r, c)) row[static_cast<std::size_t>(c / 8)] |= static_cast<unsigned char>(1u << (7 - c % 8));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace bcs
