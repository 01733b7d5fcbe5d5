#pragma once

#include <array>
#include <set>
#include <vector>

#include "imil/image.hpp"
#include "imil/rng.hpp"

namespace imil {

/// Per-class label weights; one-hot for hard labels, convex mix otherwise.
using LabelVec = std::array<double, 2>;

LabelVec one_hot(int label);

/// Draws lambda ~ Beta(alpha, alpha). Throws ValidationError for alpha <= 0.
double sample_lambda(double alpha, Rng& rng);

struct Mixed {
  Image image;
  LabelVec label;
};

/// x~ = lam*x_i + (1-lam)*x_j and y~ = lam*y_i + (1-lam)*y_j.
Mixed mixup(const Image& x_i, const LabelVec& y_i, const Image& x_j, const LabelVec& y_j,
            double lam);

/// Swapped-in box plus the label weight kept by the first image.
struct CutMixMask {
  Rect box;
  double mu = 1.0;
};

struct CutMixResult {
  Image image;
  LabelVec label;
  CutMixMask mask;
};

struct CutMixOptions {
  /// Draw mu ~ Beta(mu_alpha, mu_alpha) instead of tying it to the box area.
  bool independent_mu = false;
  double mu_alpha = 1.0;
};

/// Box of area fraction ~(1-lam), placed uniformly among positions inside the image.
Rect sample_cutmix_box(int height, int width, double lam, Rng& rng);

/// Pixels inside `box` from x_j, outside from x_i.
Image paste_box(const Image& x_i, const Image& x_j, const Rect& box);

CutMixResult cutmix(const Image& x_i, const LabelVec& y_i, const Image& x_j, const LabelVec& y_j,
                    double lam, Rng& rng, const CutMixOptions& options = {});

/// Fixed-size box placed uniformly inside the image.
Rect sample_cutout_box(int height, int width, int mask_h, int mask_w, Rng& rng);

Image cutout(const Image& x, int mask_h, int mask_w, Rng& rng);

/// rows x cols tiling of an image; cell i is row i / cols, column i % cols.
/// The last row and column absorb any remainder pixels.
struct GridGeometry {
  int rows = 4;
  int cols = 4;
  int image_height = 0;
  int image_width = 0;

  int cell_count() const { return rows * cols; }
  void validate() const;
  bool operator==(const GridGeometry&) const = default;
};

Rect cell_bounds(const GridGeometry& grid, int cell);

/// Index of the cell containing pixel (row, col).
int cell_at(const GridGeometry& grid, int row, int col);

/// A validated, nonempty set of grid cells.
class GridSelection {
 public:
  GridSelection(GridGeometry geometry, std::set<int> cells);

  const GridGeometry& geometry() const { return geometry_; }
  const std::set<int>& cells() const { return cells_; }
  std::vector<int> sorted_cells() const { return {cells_.begin(), cells_.end()}; }

  bool operator==(const GridSelection&) const = default;

 private:
  GridGeometry geometry_;
  std::set<int> cells_;
};

/// Keeps pixels of selected cells, zeroes everything else.
Image blackout(const Image& x, const GridSelection& selection);

}  // namespace imil
