#include "imil/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "imil/errors.hpp"
#include "imil/image_io.hpp"

namespace imil {
namespace {

struct ColorStop {
  double t;
  std::array<double, 3> rgb;
};

// Viridis sampled at nine evenly spaced points, linearly interpolated.
constexpr std::array<ColorStop, 9> kStops{{
    {0.000, {68, 1, 84}},
    {0.125, {71, 44, 122}},
    {0.250, {59, 81, 139}},
    {0.375, {44, 113, 142}},
    {0.500, {33, 144, 141}},
    {0.625, {39, 173, 129}},
    {0.750, {92, 200, 99}},
    {0.875, {170, 220, 50}},
    {1.000, {253, 231, 37}},
}};

}  // namespace

std::vector<double> weighted_activation_map(const SaliencyTap& tap) {
  const std::size_t plane = static_cast<std::size_t>(tap.height) * tap.width;
  if (tap.activations.size() != plane * tap.channels || tap.gradients.size() != plane * tap.channels) {
    throw ValidationError("saliency tap buffers do not match its shape");
  }
  std::vector<double> map(plane, 0.0);
  for (int k = 0; k < tap.channels; ++k) {
    const double* g = tap.gradients.data() + k * plane;
    const double* a = tap.activations.data() + k * plane;
    double alpha = 0.0;
    for (std::size_t i = 0; i < plane; ++i) alpha += g[i];
    alpha /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) map[i] += alpha * a[i];
  }
  for (auto& v : map) v = std::max(v, 0.0);
  return map;
}

std::vector<double> upsample_bilinear(const std::vector<double>& map, int height, int width,
                                      int out_height, int out_width) {
  Image plane(1, height, width);
  plane.data = map;
  return resize_bilinear(plane, out_height, out_width).data;
}

Heatmap heatmap_from_tap(const SaliencyTap& tap, int image_height, int image_width,
                         int class_index) {
  Heatmap heat;
  heat.height = image_height;
  heat.width = image_width;
  heat.class_index = class_index;
  heat.source_layer = tap.layer;
  heat.values = upsample_bilinear(weighted_activation_map(tap), tap.height, tap.width,
                                  image_height, image_width);
  const double peak = *std::max_element(heat.values.begin(), heat.values.end());
  if (peak > 0.0) {
    for (auto& v : heat.values) v = std::clamp(v / peak, 0.0, 1.0);
  } else {
    std::fill(heat.values.begin(), heat.values.end(), 0.0);
  }
  return heat;
}

Heatmap grad_cam(const Backend& backend, const Image& image, int class_index) {
  if (!backend.has_saliency_tap()) {
    throw CapabilityError("backend '" + backend.architecture() + "' has no saliency tap");
  }
  if (class_index < 0 || class_index > 1) throw ValidationError("class_index must be 0 or 1");
  return heatmap_from_tap(backend.saliency_tap(image, class_index), image.height, image.width,
                          class_index);
}

std::array<std::uint8_t, 3> colormap(double v) {
  v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  std::size_t hi = 1;
  while (hi + 1 < kStops.size() && v > kStops[hi].t) ++hi;
  const auto& a = kStops[hi - 1];
  const auto& b = kStops[hi];
  const double t = (v - a.t) / (b.t - a.t);
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(std::lround(a.rgb[c] + t * (b.rgb[c] - a.rgb[c])));
  }
  return out;
}

std::vector<std::uint8_t> overlay_rgb(const Image& image, const Heatmap& heatmap) {
  if (heatmap.height != image.height || heatmap.width != image.width) {
    throw ValidationError("overlay: heatmap and image sizes differ");
  }
  const Image gray = image.channels == 1 ? image : convert_channels(image, 1);
  const auto gray8 = quantize8(gray);
  std::vector<std::uint8_t> out(gray8.size() * 3);
  for (std::size_t i = 0; i < gray8.size(); ++i) {
    const auto color = colormap(heatmap.values[i]);
    for (int c = 0; c < 3; ++c) {
      out[3 * i + c] = static_cast<std::uint8_t>((gray8[i] + color[c] + 1) / 2);
    }
  }
  return out;
}

std::vector<std::uint8_t> overlay_png(const Image& image, const Heatmap& heatmap) {
  return encode_png(overlay_rgb(image, heatmap), image.width, image.height, 3);
}

void render_overlay(const Image& image, const Heatmap& heatmap,
                    const std::filesystem::path& output_path) {
  write_bytes(output_path, overlay_png(image, heatmap));
}

std::string overlay_filename(std::string_view sample_id, int epoch, int class_index) {
  return std::string(sample_id) + "_epoch" + std::to_string(epoch) + "_cls" +
         std::to_string(class_index) + ".png";
}

}  // namespace imil
