#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spooky/core_types.hpp"

namespace spooky {

/// Decodes any PNG to 8-bit grayscale (color inputs are converted to luma).
FrameBuffer decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const FrameBuffer& frame);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const ContentMask& mask);

FrameBuffer read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const FrameBuffer& frame);
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const ContentMask& mask);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace spooky
