#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radifusion/tensor.hpp"

namespace radif {

// Gray-level discretization of the masked region: equal-width bins over
// [min, max] of the masked pixels, levels in 1..n_bins (max value maps to
// bin n_bins). A constant region quantizes to all-level-1.
struct QuantizedImage {
    int h = 0, w = 0;
    int n_bins = 0;
    std::vector<int> levels; // flat H*W, 0 outside the mask
    std::vector<char> mask;  // flat H*W
    std::int64_t masked_count = 0;

    int level_at(int y, int x) const { return levels[static_cast<std::size_t>(y) * w + x]; }
    bool in_mask(int y, int x) const { return mask[static_cast<std::size_t>(y) * w + x] != 0; }
};

QuantizedImage quantize(const Tensor& img, const Tensor& mask, int n_bins = 32);

// Feature families. Each returns exactly the named features, in the
// documented order (see feature_names()).
std::vector<double> first_order_features(const Tensor& img, const Tensor& mask, int n_bins = 32);
std::vector<double> glcm_features(const QuantizedImage& q);   // 23
std::vector<double> glszm_features(const QuantizedImage& q);  // 16
std::vector<double> glrlm_features(const QuantizedImage& q);  // 16
std::vector<double> ngtdm_features(const QuantizedImage& q);  // 5
std::vector<double> gldm_features(const QuantizedImage& q);   // 14

// Orthonormal type-II 2-D DCT of the whole image.
Tensor dct2(const Tensor& img);
// 2-D DFT magnitude |F(m,n)| of the whole image.
Tensor fft2_magnitude(const Tensor& img);
// The 15 frequency-map statistics (applied to DCT coefficients and FFT
// magnitudes alike).
std::vector<double> frequency_features(const Tensor& map);

constexpr int kFirstOrderCount = 18;
constexpr int kGlcmCount = 23;
constexpr int kGlszmCount = 16;
constexpr int kGlrlmCount = 16;
constexpr int kNgtdmCount = 5;
constexpr int kGldmCount = 14;
constexpr int kFrequencyCount = 15;
constexpr int kFeatureCount = 122; // 18+23+16+16+5+14+15+15

// All 122 column names, family-prefixed, in extraction order.
const std::vector<std::string>& feature_names();

// Full 122-element vector: first-order, GLCM, GLSZM, GLRLM, NGTDM, GLDM,
// then DCT and FFT statistics. Matrix families use n_bins=32 quantization
// of the masked region; frequency maps are computed over the whole image.
std::vector<double> extract_all(const Tensor& img, const Tensor& mask);

} // namespace radif
