#include "quanta/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "quanta/parallel.hpp"

namespace quanta {

SeriesStats series_stats(const std::vector<double>& xs) {
    SeriesStats s;
    if (xs.empty()) return s;
    double sum = 0.0, sq = 0.0;
    s.min = xs.front();
    s.max = xs.front();
    for (const double x : xs) {
        sum += x;
        sq += x * x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    const double n = static_cast<double>(xs.size());
    s.mean = sum / n;
    const double var = std::max(0.0, sq / n - s.mean * s.mean);
    s.stddev = std::sqrt(var);
    return s;
}

namespace {

std::vector<double> normalize_unit_mean(const DenseVolume& v, const char* label) {
    const double m = v.mean();
    if (!(m > 0.0))
        throw std::invalid_argument(std::string(label) + " mean must be > 0 for metrics");
    const double inv = 1.0 / m;
    std::vector<double> out(v.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(v[i]) * inv;
    return out;
}

void require_same_shape(const DenseVolume& a, const DenseVolume& b) {
    if (!(a.shape() == b.shape()))
        throw std::invalid_argument("metric volumes must have equal shapes");
}

}  // namespace

std::vector<double> psnr_frames(const DenseVolume& pred, const DenseVolume& gt) {
    require_same_shape(pred, gt);
    const auto p = normalize_unit_mean(pred, "prediction");
    const auto g = normalize_unit_mean(gt, "ground truth");
    double peak = 0.0;
    for (const double v : g) peak = std::max(peak, v);
    const Shape3 s = gt.shape();
    const std::int64_t frame = s.h * s.w;
    std::vector<double> out(static_cast<std::size_t>(s.t));
    for (std::int64_t t = 0; t < s.t; ++t) {
        double mse = 0.0;
        const std::int64_t base = t * frame;
        for (std::int64_t i = 0; i < frame; ++i) {
            const double d = p[static_cast<std::size_t>(base + i)] -
                             g[static_cast<std::size_t>(base + i)];
            mse += d * d;
        }
        mse /= static_cast<double>(frame);
        double db = kPsnrCap;
        if (mse > 0.0) db = std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
        out[static_cast<std::size_t>(t)] = db;
    }
    return out;
}

namespace {

constexpr int kWin = 11;

std::array<double, kWin> gaussian_window() {
    std::array<double, kWin> g{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// separable valid-mode Gaussian filter over one frame
void window_filter(const double* img, std::int64_t h, std::int64_t w,
                   const std::array<double, kWin>& g, std::vector<double>& tmp,
                   std::vector<double>& out) {
    const std::int64_t vw = w - kWin + 1;
    const std::int64_t vh = h - kWin + 1;
    tmp.assign(static_cast<std::size_t>(h * vw), 0.0);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k)
                acc += g[static_cast<std::size_t>(k)] * img[y * w + x + k];
            tmp[static_cast<std::size_t>(y * vw + x)] = acc;
        }
    out.assign(static_cast<std::size_t>(vh * vw), 0.0);
    for (std::int64_t y = 0; y < vh; ++y)
        for (std::int64_t x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k)
                acc += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>((y + k) * vw + x)];
            out[static_cast<std::size_t>(y * vw + x)] = acc;
        }
}

}  // namespace

std::vector<double> ssim_frames(const DenseVolume& pred, const DenseVolume& gt) {
    require_same_shape(pred, gt);
    const Shape3 s = gt.shape();
    if (s.h < kWin || s.w < kWin)
        throw std::invalid_argument("ssim: frames smaller than the 11x11 window");
    const auto p = normalize_unit_mean(pred, "prediction");
    const auto g = normalize_unit_mean(gt, "ground truth");
    double range = 0.0;
    for (const double v : p) range = std::max(range, v);
    for (const double v : g) range = std::max(range, v);
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    const auto win = gaussian_window();
    const std::int64_t frame = s.h * s.w;
    std::vector<double> out(static_cast<std::size_t>(s.t));
    parallel_for(0, s.t, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<double> xx(static_cast<std::size_t>(frame));
        std::vector<double> yy(static_cast<std::size_t>(frame));
        std::vector<double> xy(static_cast<std::size_t>(frame));
        std::vector<double> tmp, mu_x, mu_y, m_xx, m_yy, m_xy;
        for (std::int64_t t = lo; t < hi; ++t) {
            const double* px = p.data() + t * frame;
            const double* py = g.data() + t * frame;
            for (std::int64_t i = 0; i < frame; ++i) {
                xx[static_cast<std::size_t>(i)] = px[i] * px[i];
                yy[static_cast<std::size_t>(i)] = py[i] * py[i];
                xy[static_cast<std::size_t>(i)] = px[i] * py[i];
            }
            window_filter(px, s.h, s.w, win, tmp, mu_x);
            window_filter(py, s.h, s.w, win, tmp, mu_y);
            window_filter(xx.data(), s.h, s.w, win, tmp, m_xx);
            window_filter(yy.data(), s.h, s.w, win, tmp, m_yy);
            window_filter(xy.data(), s.h, s.w, win, tmp, m_xy);
            double acc = 0.0;
            for (std::size_t i = 0; i < mu_x.size(); ++i) {
                const double mx = mu_x[i], my = mu_y[i];
                const double vx = m_xx[i] - mx * mx;
                const double vy = m_yy[i] - my * my;
                const double cov = m_xy[i] - mx * my;
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
            out[static_cast<std::size_t>(t)] = acc / static_cast<double>(mu_x.size());
        }
    });
    return out;
}

MetricReport evaluate(const DenseVolume& pred, const DenseVolume& gt) {
    MetricReport r;
    r.psnr = psnr_frames(pred, gt);
    r.ssim = ssim_frames(pred, gt);
    r.psnr_stats = series_stats(r.psnr);
    r.ssim_stats = series_stats(r.ssim);
    return r;
}

// ---------------------------------------------------------------------------

namespace {

double median_of(std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t mid = xs.size() / 2;
    return xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

}  // namespace

HotPixelResult hot_pixel_correct(const DenseVolume& v, double z_threshold) {
    const Shape3 s = v.shape();
    if (s.t < 2) throw std::invalid_argument("hot_pixel_correct: need at least two frames");
    const std::int64_t frame = s.h * s.w;

    // temporal mean per pixel
    std::vector<double> mean(static_cast<std::size_t>(frame), 0.0);
    for (std::int64_t t = 0; t < s.t; ++t)
        for (std::int64_t i = 0; i < frame; ++i)
            mean[static_cast<std::size_t>(i)] += static_cast<double>(v[t * frame + i]);
    for (auto& m : mean) m /= static_cast<double>(s.t);

    std::vector<char> hot(static_cast<std::size_t>(frame), 0);
    std::vector<std::pair<std::int64_t, std::int64_t>> flagged;
    std::vector<double> nb;
    std::vector<double> dev;
    for (std::int64_t y = 0; y < s.h; ++y)
        for (std::int64_t x = 0; x < s.w; ++x) {
            nb.clear();
            for (std::int64_t dy = -2; dy <= 2; ++dy)
                for (std::int64_t dx = -2; dx <= 2; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const std::int64_t yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= s.h || xx < 0 || xx >= s.w) continue;
                    nb.push_back(mean[static_cast<std::size_t>(yy * s.w + xx)]);
                }
            const double med = median_of(nb);
            dev.clear();
            for (const double n : nb) dev.push_back(std::fabs(n - med));
            const double mad = median_of(dev);
            if (mean[static_cast<std::size_t>(y * s.w + x)] > med + z_threshold * mad) {
                hot[static_cast<std::size_t>(y * s.w + x)] = 1;
                flagged.emplace_back(y, x);
            }
        }

    DenseVolume corrected = v;
    for (const auto& [y, x] : flagged) {
        for (std::int64_t t = 0; t < s.t; ++t) {
            nb.clear();
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    const std::int64_t yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= s.h || xx < 0 || xx >= s.w) continue;
                    if (hot[static_cast<std::size_t>(yy * s.w + xx)]) continue;
                    nb.push_back(static_cast<double>(v[t * frame + yy * s.w + xx]));
                }
            if (nb.empty()) continue;  // an all-hot patch stays untouched
            corrected[t * frame + y * s.w + x] = static_cast<float>(median_of(nb));
        }
    }
    return HotPixelResult{std::move(corrected), std::move(flagged)};
}

}  // namespace quanta
