#include "spooky/image_io.hpp"

#include <png.h>

#include <fstream>
#include <iterator>
#include <memory>

namespace spooky {

namespace {

struct ImageGuard {
  png_image* image;
  ~ImageGuard() { png_image_free(image); }
};

std::vector<std::uint8_t> encode(int width, int height, png_uint_32 format,
                                 const std::uint8_t* pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  ImageGuard guard{&image};

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::IoFailure, std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::IoFailure, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

FrameBuffer decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  ImageGuard guard{&image};
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::UnreadableImage, std::string("not a readable PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  // Composite any alpha onto black so transparent areas read as background.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&image, &background, px.data(), 0, nullptr)) {
    throw Error(ErrorCode::UnreadableImage, std::string("PNG decode failed: ") + image.message);
  }
  return FrameBuffer(width, height, std::move(px));
}

std::vector<std::uint8_t> encode_png(const FrameBuffer& frame) {
  return encode(frame.width(), frame.height(), PNG_FORMAT_GRAY, frame.pixels().data());
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorCode::DimensionMismatch, "RGB buffer size does not match dimensions");
  }
  return encode(image.width, image.height, PNG_FORMAT_RGB, image.rgb.data());
}

std::vector<std::uint8_t> encode_png(const ContentMask& mask) {
  std::vector<std::uint8_t> px(mask.bits().begin(), mask.bits().end());
  for (auto& p : px) p = p ? 255 : 0;
  return encode(mask.width(), mask.height(), PNG_FORMAT_GRAY, px.data());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

FrameBuffer read_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_png(bytes);
}

void write_png(const std::filesystem::path& path, const FrameBuffer& frame) {
  write_file(path, encode_png(frame));
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_file(path, encode_png(image));
}

void write_png(const std::filesystem::path& path, const ContentMask& mask) {
  write_file(path, encode_png(mask));
}

}  // namespace spooky
