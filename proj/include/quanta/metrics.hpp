#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "quanta/core.hpp"

namespace quanta {

struct SeriesStats {
    double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
};

SeriesStats series_stats(const std::vector<double>& xs);

struct MetricReport {
    std::vector<double> psnr;
    std::vector<double> ssim;
    SeriesStats psnr_stats;
    SeriesStats ssim_stats;
};

// Both volumes are normalized to unit global mean (independently); the peak
// is the maximum of the normalized ground truth over the whole volume.
// Frame PSNR = 10*log10(peak^2 / MSE), capped at 99 dB.
constexpr double kPsnrCap = 99.0;
std::vector<double> psnr_frames(const DenseVolume& pred, const DenseVolume& gt);

// Frame-wise structural similarity on the mean-normalized volumes: 11x11
// Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03, computed over valid
// window positions. The dynamic range is the max over both normalized
// volumes, which keeps ssim(a, b) == ssim(b, a) exact.
std::vector<double> ssim_frames(const DenseVolume& pred, const DenseVolume& gt);

MetricReport evaluate(const DenseVolume& pred, const DenseVolume& gt);

struct HotPixelResult {
    DenseVolume corrected;
    std::vector<std::pair<std::int64_t, std::int64_t>> flagged;  // (y, x)
};

// A pixel is hot when its temporal mean exceeds the 5x5 neighbourhood median
// of the temporal-mean map by z_threshold * MAD. Flagged pixels are replaced
// per frame by the 3x3 spatial median of their unflagged neighbours.
HotPixelResult hot_pixel_correct(const DenseVolume& v, double z_threshold);

}  // namespace quanta
