#include <algorithm>
#include <cmath>
#include <random>

#include "imil/errors.hpp"
#include "imil/model.hpp"
#include "imil/rng.hpp"

namespace imil {
namespace {

constexpr int kK1 = ReferenceCnn::kStage1Filters;
constexpr int kK2 = ReferenceCnn::kStage2Filters;

// 3x3 convolution, zero padding 1, stride 1. `out` is K x n x n and is overwritten.
void conv3x3(const double* in, int c_in, int n, const double* w, const double* b, int k_out,
             double* out) {
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (int k = 0; k < k_out; ++k) {
    double* o = out + k * plane;
    std::fill(o, o + plane, b[k]);
    for (int c = 0; c < c_in; ++c) {
      const double* src = in + c * plane;
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          const double wv = w[((k * c_in + c) * 3 + dy) * 3 + dx];
          const int y_lo = std::max(0, 1 - dy);
          const int y_hi = std::min(n, n + 1 - dy);
          const int x_lo = std::max(0, 1 - dx);
          const int x_hi = std::min(n, n + 1 - dx);
          for (int y = y_lo; y < y_hi; ++y) {
            double* orow = o + y * n;
            const double* srow = src + (y + dy - 1) * n + (dx - 1);
            for (int x = x_lo; x < x_hi; ++x) orow[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

// Accumulates dW, db and (when din != nullptr) dIn for conv3x3.
void conv3x3_backward(const double* in, int c_in, int n, const double* w, const double* dout,
                      int k_out, double* dw, double* db, double* din) {
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (int k = 0; k < k_out; ++k) {
    const double* g = dout + k * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += g[i];
    db[k] += sum;
    for (int c = 0; c < c_in; ++c) {
      const double* src = in + c * plane;
      double* dsrc = din ? din + c * plane : nullptr;
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          const std::size_t widx = ((k * c_in + c) * 3 + dy) * 3 + dx;
          const double wv = w[widx];
          const int y_lo = std::max(0, 1 - dy);
          const int y_hi = std::min(n, n + 1 - dy);
          const int x_lo = std::max(0, 1 - dx);
          const int x_hi = std::min(n, n + 1 - dx);
          double acc = 0.0;
          for (int y = y_lo; y < y_hi; ++y) {
            const double* grow = g + y * n;
            const std::ptrdiff_t off = (y + dy - 1) * n + (dx - 1);
            const double* srow = src + off;
            for (int x = x_lo; x < x_hi; ++x) acc += grow[x] * srow[x];
            if (dsrc) {
              double* drow = dsrc + off;
              for (int x = x_lo; x < x_hi; ++x) drow[x] += wv * grow[x];
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

// ReLU followed by 2x2 average pooling (floor). `z` is K x n x n, `out` K x n/2 x n/2.
void relu_pool(const double* z, int k_count, int n, double* out) {
  const int m = n / 2;
  for (int k = 0; k < k_count; ++k) {
    const double* src = z + static_cast<std::size_t>(k) * n * n;
    double* dst = out + static_cast<std::size_t>(k) * m * m;
    for (int i = 0; i < m; ++i) {
      const double* r0 = src + (2 * i) * n;
      const double* r1 = r0 + n;
      for (int j = 0; j < m; ++j) {
        dst[i * m + j] = 0.25 * (std::max(r0[2 * j], 0.0) + std::max(r0[2 * j + 1], 0.0) +
                                 std::max(r1[2 * j], 0.0) + std::max(r1[2 * j + 1], 0.0));
      }
    }
  }
}

// Gradient through pool then ReLU: dz = relu'(z) * upsample(dp / 4).
void relu_pool_backward(const double* z, int k_count, int n, const double* dp, double* dz) {
  const int m = n / 2;
  std::fill(dz, dz + static_cast<std::size_t>(k_count) * n * n, 0.0);
  for (int k = 0; k < k_count; ++k) {
    const double* zk = z + static_cast<std::size_t>(k) * n * n;
    double* dk = dz + static_cast<std::size_t>(k) * n * n;
    const double* gk = dp + static_cast<std::size_t>(k) * m * m;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double g = 0.25 * gk[i * m + j];
        for (int di = 0; di < 2; ++di) {
          for (int dj = 0; dj < 2; ++dj) {
            const std::size_t idx = static_cast<std::size_t>(2 * i + di) * n + 2 * j + dj;
            if (zk[idx] > 0.0) dk[idx] = g;
          }
        }
      }
    }
  }
}

}  // namespace

struct ReferenceCnn::Cache {
  std::vector<double> z1, p1, z2, features;
  std::array<double, kK2> pooled{};
};

ReferenceCnn::ReferenceCnn(int channels, int image_size, std::uint64_t seed)
    : channels_(channels), image_size_(image_size) {
  if (channels != 1 && channels != 3) throw ValidationError("reference backend: channels must be 1 or 3");
  if (image_size < 16) {
    throw ValidationError("reference backend: image_size " + std::to_string(image_size) +
                          " is below the minimum of 16");
  }
  w1_ = 0;
  b1_ = w1_ + static_cast<std::size_t>(kK1) * channels * 9;
  w2_ = b1_ + kK1;
  b2_ = w2_ + static_cast<std::size_t>(kK2) * kK1 * 9;
  wf_ = b2_ + kK2;
  bf_ = wf_ + 2 * kK2;
  params_.assign(bf_ + 2, 0.0);

  auto rng = make_rng(seed, {stream::kInit});
  auto fill = [&](std::size_t from, std::size_t count, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = 0; i < count; ++i) params_[from + i] = dist(rng);
  };
  fill(w1_, b1_ - w1_, std::sqrt(2.0 / (channels * 9)));
  fill(w2_, b2_ - w2_, std::sqrt(2.0 / (kK1 * 9)));
  fill(wf_, bf_ - wf_, std::sqrt(1.0 / kK2));
}

std::string ReferenceCnn::architecture() const {
  return "refcnn-c" + std::to_string(channels_) + "-s" + std::to_string(image_size_) + "-k" +
         std::to_string(kK1) + "x" + std::to_string(kK2);
}

std::span<double> ReferenceCnn::head_parameters() {
  return std::span<double>(params_).subspan(wf_);
}

void ReferenceCnn::check_input(const Image& image) const {
  if (image.channels != channels_ || image.height != image_size_ || image.width != image_size_) {
    throw ValidationError("reference backend expects " + std::to_string(channels_) + "x" +
                          std::to_string(image_size_) + "x" + std::to_string(image_size_) +
                          " input, got " + std::to_string(image.channels) + "x" +
                          std::to_string(image.height) + "x" + std::to_string(image.width));
  }
}

Logits ReferenceCnn::forward_one(const Image& image, Cache* cache) const {
  check_input(image);
  const int n0 = image_size_;
  const int n1 = n0 / 2;
  const int n2 = n1 / 2;
  Cache local;
  Cache& c = cache ? *cache : local;
  c.z1.resize(static_cast<std::size_t>(kK1) * n0 * n0);
  c.p1.resize(static_cast<std::size_t>(kK1) * n1 * n1);
  c.z2.resize(static_cast<std::size_t>(kK2) * n1 * n1);
  c.features.resize(static_cast<std::size_t>(kK2) * n2 * n2);

  const double* p = params_.data();
  conv3x3(image.data.data(), channels_, n0, p + w1_, p + b1_, kK1, c.z1.data());
  relu_pool(c.z1.data(), kK1, n0, c.p1.data());
  conv3x3(c.p1.data(), kK1, n1, p + w2_, p + b2_, kK2, c.z2.data());
  relu_pool(c.z2.data(), kK2, n1, c.features.data());

  const std::size_t plane = static_cast<std::size_t>(n2) * n2;
  for (int k = 0; k < kK2; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += c.features[k * plane + i];
    c.pooled[k] = s / static_cast<double>(plane);
  }
  Logits logits{p[bf_], p[bf_ + 1]};
  for (int cls = 0; cls < 2; ++cls) {
    for (int k = 0; k < kK2; ++k) logits[cls] += p[wf_ + cls * kK2 + k] * c.pooled[k];
  }
  return logits;
}

std::vector<Logits> ReferenceCnn::forward(std::span<const Image> images) const {
  std::vector<Logits> out;
  out.reserve(images.size());
  Cache cache;
  for (const auto& image : images) out.push_back(forward_one(image, &cache));
  return out;
}

double ReferenceCnn::do_loss_and_gradient(std::span<const Image> images,
                                          std::span<const LabelVec> targets,
                                          std::vector<double>& grad,
                                          std::vector<Logits>* logits_out) const {
  grad.assign(params_.size(), 0.0);
  const int n0 = image_size_;
  const int n1 = n0 / 2;
  const int n2 = n1 / 2;
  const std::size_t plane2 = static_cast<std::size_t>(n2) * n2;
  const double inv_batch = 1.0 / static_cast<double>(images.size());
  const double* p = params_.data();

  Cache cache;
  std::vector<double> d_features(static_cast<std::size_t>(kK2) * plane2);
  std::vector<double> dz2(static_cast<std::size_t>(kK2) * n1 * n1);
  std::vector<double> dp1(static_cast<std::size_t>(kK1) * n1 * n1);
  std::vector<double> dz1(static_cast<std::size_t>(kK1) * n0 * n0);

  double loss = 0.0;
  for (std::size_t s = 0; s < images.size(); ++s) {
    const Logits logits = forward_one(images[s], &cache);
    if (logits_out) logits_out->push_back(logits);
    const double m = std::max(logits[0], logits[1]);
    const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
    std::array<double, 2> dlogits{};
    for (int cls = 0; cls < 2; ++cls) {
      const double logp = logits[cls] - lse;
      loss -= targets[s][cls] * logp;
      dlogits[cls] = (std::exp(logp) * (targets[s][0] + targets[s][1]) - targets[s][cls]) * inv_batch;
    }

    std::array<double, kK2> d_pooled{};
    for (int cls = 0; cls < 2; ++cls) {
      grad[bf_ + cls] += dlogits[cls];
      for (int k = 0; k < kK2; ++k) {
        grad[wf_ + cls * kK2 + k] += dlogits[cls] * cache.pooled[k];
        d_pooled[k] += dlogits[cls] * p[wf_ + cls * kK2 + k];
      }
    }
    for (int k = 0; k < kK2; ++k) {
      std::fill_n(d_features.begin() + static_cast<std::ptrdiff_t>(k * plane2), plane2,
                  d_pooled[k] / static_cast<double>(plane2));
    }
    relu_pool_backward(cache.z2.data(), kK2, n1, d_features.data(), dz2.data());
    std::fill(dp1.begin(), dp1.end(), 0.0);
    conv3x3_backward(cache.p1.data(), kK1, n1, p + w2_, dz2.data(), kK2, grad.data() + w2_,
                     grad.data() + b2_, dp1.data());
    relu_pool_backward(cache.z1.data(), kK1, n0, dp1.data(), dz1.data());
    conv3x3_backward(images[s].data.data(), channels_, n0, p + w1_, dz1.data(), kK1,
                     grad.data() + w1_, grad.data() + b1_, nullptr);
  }
  return loss * inv_batch;
}

SaliencyTap ReferenceCnn::saliency_tap(const Image& image, int class_index) const {
  if (class_index < 0 || class_index > 1) throw ValidationError("class_index must be 0 or 1");
  Cache cache;
  forward_one(image, &cache);
  const int n2 = feature_size();
  const std::size_t plane = static_cast<std::size_t>(n2) * n2;
  SaliencyTap tap;
  tap.channels = kK2;
  tap.height = n2;
  tap.width = n2;
  tap.layer = "stage2.pool";
  tap.activations = cache.features;
  tap.gradients.resize(tap.activations.size());
  for (int k = 0; k < kK2; ++k) {
    const double g = params_[wf_ + class_index * kK2 + k] / static_cast<double>(plane);
    std::fill_n(tap.gradients.begin() + static_cast<std::ptrdiff_t>(k * plane), plane, g);
  }
  return tap;
}

}  // namespace imil
