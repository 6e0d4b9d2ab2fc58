#pragma once

// Synthetic two-modality scenes: Gaussian blobs, each visible to RGB, thermal
// or both. The reconstruction target is the element-wise maximum of the two
// maps, which neither modality alone can recover when blobs are exclusive.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dmff/rng.hpp"
#include "dmff/tensor.hpp"

namespace dmff {

struct SyntheticPairSpec {
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 16;
  std::size_t blob_count = 4;
  std::uint64_t seed = 42;
  double complementarity = 0.5;  // fraction of blobs visible to one modality only
};

template <class T>
struct SyntheticPair {
  Tensor<T> rgb;
  Tensor<T> thermal;
  Tensor<T> target;
};

template <class T>
SyntheticPair<T> gen_synthetic_pair(const SyntheticPairSpec& spec) {
  if (spec.height == 0 || spec.width == 0 || spec.channels == 0) {
    throw ConfigError("synthetic: extents must be >= 1");
  }
  if (!(spec.complementarity >= 0.0 && spec.complementarity <= 1.0)) {
    throw ConfigError("synthetic: complementarity must lie in [0, 1]");
  }
  const std::size_t h = spec.height, w = spec.width, c = spec.channels;
  Tensor<T> rgb({h, w, c}), thermal({h, w, c});
  Rng rng(spec.seed);
  const double span = static_cast<double>(std::min(h, w));
  std::vector<double> amp(c);
  for (std::size_t b = 0; b < spec.blob_count; ++b) {
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double sigma = rng.uniform(0.12, 0.25) * span;
    for (auto& a : amp) a = rng.uniform(0.2, 1.0);
    const bool exclusive = rng.unit() < spec.complementarity;
    const bool rgb_side = rng.unit() < 0.5;
    const bool in_rgb = !exclusive || rgb_side;
    const bool in_thermal = !exclusive || !rgb_side;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double dy = static_cast<double>(i) + 0.5 - cy;
        const double dx = static_cast<double>(j) + 0.5 - cx;
        const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T v = static_cast<T>(amp[ch] * g);
          if (in_rgb) rgb(i, j, ch) += v;
          if (in_thermal) thermal(i, j, ch) += v;
        }
      }
    }
  }
  Tensor<T> target({h, w, c});
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = std::max(rgb[i], thermal[i]);
  return {std::move(rgb), std::move(thermal), std::move(target)};
}

}  // namespace dmff
