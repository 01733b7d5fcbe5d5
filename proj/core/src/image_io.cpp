#include "imil/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "imil/errors.hpp"

namespace imil {
namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp, png_const_charp message) {
  throw IoError(std::string("png: ") + message);
}

void warning_callback(png_structp, png_const_charp) {}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes, int channels) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw IoError("not a PNG stream");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
  if (png == nullptr) throw IoError("png: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  ReadCursor cursor{bytes, 0};
  png_set_read_fn(png, &cursor, read_callback);
  png_read_info(png, info);

  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // host-order (little endian) 16-bit samples
  png_read_update_info(png, info);

  const int native_channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> raw(row_bytes * static_cast<std::size_t>(height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) rows[r] = raw.data() + row_bytes * r;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  const bool has_alpha = native_channels == 2 || native_channels == 4;
  const int color_channels = has_alpha ? native_channels - 1 : native_channels;
  const double scale = depth == 16 ? 65535.0 : 255.0;

  Image image(color_channels, height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (int ch = 0; ch < color_channels; ++ch) {
        const std::size_t sample = static_cast<std::size_t>(c) * native_channels + ch;
        double value;
        if (depth == 16) {
          std::uint16_t v;
          std::memcpy(&v, rows[r] + 2 * sample, 2);
          value = v;
        } else {
          value = rows[r][sample];
        }
        image.at(ch, r, c) = value / scale;
      }
    }
  }
  return channels == 0 ? image : convert_channels(image, channels);
}

Image read_png(const std::filesystem::path& path, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes, channels);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(std::span<const std::uint8_t> pixels, int width, int height,
                                     int channels) {
  if (channels != 1 && channels != 3) throw ValidationError("PNG encoder supports 1 or 3 channels");
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ValidationError("pixel buffer does not match PNG dimensions");
  }
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
  if (png == nullptr) throw IoError("png: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  std::vector<std::uint8_t> out;
  png_set_write_fn(png, &out, write_callback, flush_callback);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + stride * r));
  }
  png_write_end(png, nullptr);
  return out;
}

std::vector<std::uint8_t> quantize8(const Image& image) {
  std::vector<std::uint8_t> out(image.size());
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < image.channels; ++ch) {
        const double v = std::clamp(image.at(ch, r, c), 0.0, 1.0);
        out[(static_cast<std::size_t>(r) * image.width + c) * image.channels + ch] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.channels == 1 || image.channels == 3) {
    return encode_png(quantize8(image), image.width, image.height, image.channels);
  }
  throw ValidationError("only 1- or 3-channel images can be written as PNG");
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_bytes(path, encode_png(image));
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ValidationError("resize target must be positive");
  if (image.height == height && image.width == width) return image;
  Image out(image.channels, height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int r = 0; r < height; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ty = fy - y0;
    for (int c = 0; c < width; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double tx = fx - x0;
      for (int ch = 0; ch < image.channels; ++ch) {
        const double top = image.at(ch, y0, x0) * (1 - tx) + image.at(ch, y0, x1) * tx;
        const double bottom = image.at(ch, y1, x0) * (1 - tx) + image.at(ch, y1, x1) * tx;
        out.at(ch, r, c) = top * (1 - ty) + bottom * ty;
      }
    }
  }
  return out;
}

Image convert_channels(const Image& image, int channels) {
  if (channels != 1 && channels != 3) throw ValidationError("channels must be 1 or 3");
  if (image.channels == channels) return image;
  Image out(channels, image.height, image.width);
  if (channels == 1 && image.channels == 3) {
    for (int r = 0; r < image.height; ++r) {
      for (int c = 0; c < image.width; ++c) {
        out.at(0, r, c) = 0.299 * image.at(0, r, c) + 0.587 * image.at(1, r, c) +
                          0.114 * image.at(2, r, c);
      }
    }
    return out;
  }
  if (channels == 3 && image.channels == 1) {
    for (int ch = 0; ch < 3; ++ch) {
      std::copy(image.data.begin(), image.data.end(),
                out.data.begin() + static_cast<std::ptrdiff_t>(ch * image.plane_size()));
    }
    return out;
  }
  throw ValidationError("unsupported channel conversion");
}

}  // namespace imil
