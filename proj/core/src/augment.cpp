#include "imil/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "imil/errors.hpp"

namespace imil {
namespace {

void require_same_shape(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b)) throw ValidationError(std::string(op) + ": image shapes differ");
}

void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0,1]");
}

void zero_box(Image& image, const Rect& box) {
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int r = box.row0; r < box.row1; ++r) {
      auto row = image.data.begin() + static_cast<std::ptrdiff_t>((ch * image.height + r) *
                                                                  static_cast<std::size_t>(image.width));
      std::fill(row + box.col0, row + box.col1, 0.0);
    }
  }
}

// Top-left corner uniform over every placement that keeps the box inside.
Rect place_inside(int height, int width, int box_h, int box_w, Rng& rng) {
  std::uniform_int_distribution<int> row_dist(0, height - box_h);
  std::uniform_int_distribution<int> col_dist(0, width - box_w);
  const int r0 = row_dist(rng);
  const int c0 = col_dist(rng);
  return {r0, c0, r0 + box_h, c0 + box_w};
}

}  // namespace

LabelVec one_hot(int label) {
  if (label < 0 || label > 1) throw ValidationError("label must be 0 or 1");
  LabelVec y{0.0, 0.0};
  y[label] = 1.0;
  return y;
}

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ValidationError("Beta alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double a = gamma(rng);
  const double b = gamma(rng);
  if (a + b == 0.0) return 0.5;  // both underflowed (tiny alpha); symmetric fallback
  return std::clamp(a / (a + b), 0.0, 1.0);
}

Mixed mixup(const Image& x_i, const LabelVec& y_i, const Image& x_j, const LabelVec& y_j,
            double lam) {
  require_same_shape(x_i, x_j, "mixup");
  require_unit(lam, "mixup lambda");
  Mixed out{x_i, {}};
  const double rest = 1.0 - lam;
  for (std::size_t k = 0; k < out.image.data.size(); ++k) {
    out.image.data[k] = lam * x_i.data[k] + rest * x_j.data[k];
  }
  for (std::size_t c = 0; c < out.label.size(); ++c) out.label[c] = lam * y_i[c] + rest * y_j[c];
  return out;
}

Rect sample_cutmix_box(int height, int width, double lam, Rng& rng) {
  require_unit(lam, "cutmix lambda");
  const double side = std::sqrt(1.0 - lam);
  const int box_h = std::clamp(static_cast<int>(std::lround(height * side)), 0, height);
  const int box_w = std::clamp(static_cast<int>(std::lround(width * side)), 0, width);
  return place_inside(height, width, box_h, box_w, rng);
}

Image paste_box(const Image& x_i, const Image& x_j, const Rect& box) {
  require_same_shape(x_i, x_j, "cutmix");
  Image out = x_i;
  for (int ch = 0; ch < out.channels; ++ch) {
    for (int r = box.row0; r < box.row1; ++r) {
      for (int c = box.col0; c < box.col1; ++c) out.at(ch, r, c) = x_j.at(ch, r, c);
    }
  }
  return out;
}

CutMixResult cutmix(const Image& x_i, const LabelVec& y_i, const Image& x_j, const LabelVec& y_j,
                    double lam, Rng& rng, const CutMixOptions& options) {
  require_same_shape(x_i, x_j, "cutmix");
  const Rect box = sample_cutmix_box(x_i.height, x_i.width, lam, rng);
  const double mu =
      options.independent_mu
          ? sample_lambda(options.mu_alpha, rng)
          : 1.0 - static_cast<double>(box.area()) / static_cast<double>(x_i.plane_size());
  CutMixResult out{paste_box(x_i, x_j, box), {}, {box, mu}};
  for (std::size_t c = 0; c < out.label.size(); ++c) {
    out.label[c] = mu * y_i[c] + (1.0 - mu) * y_j[c];
  }
  return out;
}

Rect sample_cutout_box(int height, int width, int mask_h, int mask_w, Rng& rng) {
  if (mask_h < 0 || mask_w < 0) throw ValidationError("cutout mask size must be non-negative");
  if (mask_h > height || mask_w > width) {
    throw ValidationError("cutout mask " + std::to_string(mask_h) + "x" + std::to_string(mask_w) +
                          " is larger than the " + std::to_string(height) + "x" +
                          std::to_string(width) + " image");
  }
  return place_inside(height, width, mask_h, mask_w, rng);
}

Image cutout(const Image& x, int mask_h, int mask_w, Rng& rng) {
  const Rect box = sample_cutout_box(x.height, x.width, mask_h, mask_w, rng);
  Image out = x;
  zero_box(out, box);
  return out;
}

void GridGeometry::validate() const {
  if (rows < 1 || cols < 1) throw ValidationError("grid must have at least one row and column");
  if (image_height < rows || image_width < cols) {
    throw ValidationError("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " does not fit a " + std::to_string(image_height) + "x" +
                          std::to_string(image_width) + " image");
  }
}

Rect cell_bounds(const GridGeometry& grid, int cell) {
  grid.validate();
  if (cell < 0 || cell >= grid.cell_count()) {
    throw ValidationError("cell index " + std::to_string(cell) + " outside [0, " +
                          std::to_string(grid.cell_count()) + ")");
  }
  const int cell_h = grid.image_height / grid.rows;
  const int cell_w = grid.image_width / grid.cols;
  const int r = cell / grid.cols;
  const int c = cell % grid.cols;
  return {r * cell_h, c * cell_w, r == grid.rows - 1 ? grid.image_height : (r + 1) * cell_h,
          c == grid.cols - 1 ? grid.image_width : (c + 1) * cell_w};
}

int cell_at(const GridGeometry& grid, int row, int col) {
  grid.validate();
  if (row < 0 || row >= grid.image_height || col < 0 || col >= grid.image_width) {
    throw ValidationError("pixel outside the grid");
  }
  const int r = std::min(row / (grid.image_height / grid.rows), grid.rows - 1);
  const int c = std::min(col / (grid.image_width / grid.cols), grid.cols - 1);
  return r * grid.cols + c;
}

GridSelection::GridSelection(GridGeometry geometry, std::set<int> cells)
    : geometry_(geometry), cells_(std::move(cells)) {
  geometry_.validate();
  if (cells_.empty()) throw ValidationError("at least one region must be selected");
  for (int cell : cells_) {
    if (cell < 0 || cell >= geometry_.cell_count()) {
      throw ValidationError("cell index " + std::to_string(cell) + " outside [0, " +
                            std::to_string(geometry_.cell_count()) + ")");
    }
  }
}

Image blackout(const Image& x, const GridSelection& selection) {
  const auto& grid = selection.geometry();
  if (grid.image_height != x.height || grid.image_width != x.width) {
    throw ValidationError("blackout: grid geometry does not match the image");
  }
  Image out(x.channels, x.height, x.width, 0.0);
  for (int cell : selection.cells()) {
    const Rect box = cell_bounds(grid, cell);
    for (int ch = 0; ch < x.channels; ++ch) {
      for (int r = box.row0; r < box.row1; ++r) {
        for (int c = box.col0; c < box.col1; ++c) out.at(ch, r, c) = x.at(ch, r, c);
      }
    }
  }
  return out;
}

}  // namespace imil
