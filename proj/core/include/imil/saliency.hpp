#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "imil/image.hpp"
#include "imil/model.hpp"

namespace imil {

/// Class-evidence map at image resolution, values in [0,1].
struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  int class_index = 0;
  std::string source_layer;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  bool operator==(const Heatmap&) const = default;
};

/// Rectified gradient-weighted activation map at feature resolution:
/// max(0, sum_k mean(dScore/dA_k) * A_k). Row-major h x w.
std::vector<double> weighted_activation_map(const SaliencyTap& tap);

/// Half-pixel-centred bilinear resize of a row-major single-plane map.
std::vector<double> upsample_bilinear(const std::vector<double>& map, int height, int width,
                                      int out_height, int out_width);

/// Builds the normalized heatmap from a tap; all zeros when nothing is positive.
Heatmap heatmap_from_tap(const SaliencyTap& tap, int image_height, int image_width,
                         int class_index);

/// Grad-CAM for `class_index`. Throws CapabilityError if the backend has no tap.
Heatmap grad_cam(const Backend& backend, const Image& image, int class_index);

/// Perceptual (viridis-like) colormap, v clamped to [0,1].
std::array<std::uint8_t, 3> colormap(double v);

/// RGB overlay: 50/50 blend of the grayscale image with colormap(heatmap).
std::vector<std::uint8_t> overlay_rgb(const Image& image, const Heatmap& heatmap);
std::vector<std::uint8_t> overlay_png(const Image& image, const Heatmap& heatmap);
void render_overlay(const Image& image, const Heatmap& heatmap,
                    const std::filesystem::path& output_path);

/// `{sample_id}_epoch{E}_cls{C}.png`
std::string overlay_filename(std::string_view sample_id, int epoch, int class_index);

}  // namespace imil
