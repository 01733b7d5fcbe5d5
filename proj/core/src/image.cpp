#include <algorithm>

#include "imil/image.hpp"

namespace imil {

Rect intersect(const Rect& a, const Rect& b) {
  Rect r{std::max(a.row0, b.row0), std::max(a.col0, b.col0), std::min(a.row1, b.row1),
         std::min(a.col1, b.col1)};
  if (r.row1 < r.row0) r.row1 = r.row0;
  if (r.col1 < r.col0) r.col1 = r.col0;
  return r;
}

Image::Image(int channels_, int height_, int width_, double fill)
    : channels(channels_),
      height(height_),
      width(width_),
      data(static_cast<std::size_t>(channels_) * height_ * width_, fill) {}

}  // namespace imil
