#pragma once

#include <cmath>

#include <cstddef>
#include <vector>

namespace imil {

/// Half-open pixel rectangle [row0, row1) x [col0, col1).
struct Rect {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;

  int height() const { return row1 > row0 ? row1 - row0 : 0; }
  int width() const { return col1 > col0 ? col1 - col0 : 0; }
  long area() const { return static_cast<long>(height()) * width(); }
  bool empty() const { return area() == 0; }
  bool contains(int row, int col) const {
    return row >= row0 && row < row1 && col >= col0 && col < col1;
  }
  /// Rescales the corners from a `from`-pixel to a `to`-pixel image, rounding to nearest.
  Rect scaled(int from, int to) const {
    auto s = [&](int v) { return static_cast<int>(std::lround(static_cast<double>(v) * to / from)); };
    return {s(row0), s(col0), s(row1), s(col1)};
  }
  bool operator==(const Rect&) const = default;
};

Rect intersect(const Rect& a, const Rect& b);

/// Dense real-valued image in channel-major (CHW) layout.
struct Image {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int channels, int height, int width, double fill = 0.0);

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }

  double& at(int c, int row, int col) {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
  double at(int c, int row, int col) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }

  bool same_shape(const Image& other) const {
    return channels == other.channels && height == other.height && width == other.width;
  }
  Rect bounds() const { return {0, 0, height, width}; }

  bool operator==(const Image&) const = default;
};

}  // namespace imil
