#include "holo/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace holo {

namespace {

void check_same_shape(const RealImage& a, const RealImage& b) {
    require(a.width == b.width && a.height == b.height && a.channels == b.channels,
            "ShapeMismatch", "metric arguments must share dimensions");
}

std::vector<double> gaussian_kernel(int window, double sigma) {
    std::vector<double> k(window);
    const double c = (window - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

double ssim_channel(const RealImage& a, const RealImage& b, int ch, int window, double k1,
                    double k2, double range) {
    const int w = a.width, h = a.height;
    const double c1 = (k1 * range) * (k1 * range);
    const double c2 = (k2 * range) * (k2 * range);

    // degenerate small images: one global window
    if (w < window || h < window) {
        double ma = 0, mb = 0;
        const size_t n = static_cast<size_t>(w) * h;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                ma += a.at(x, y, ch);
                mb += b.at(x, y, ch);
            }
        ma /= n;
        mb /= n;
        double va = 0, vb = 0, cab = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double da = a.at(x, y, ch) - ma, db = b.at(x, y, ch) - mb;
                va += da * da;
                vb += db * db;
                cab += da * db;
            }
        va /= n;
        vb /= n;
        cab /= n;
        return ((2 * ma * mb + c1) * (2 * cab + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }

    const std::vector<double> g = gaussian_kernel(window, 1.5);
    // separable filtering of the five moment maps, valid region only
    const int ow = w - window + 1, oh = h - window + 1;
    auto filter = [&](auto&& value) {
        // horizontal pass
        std::vector<double> tmp(static_cast<size_t>(ow) * h, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < window; ++i) s += g[i] * value(x + i, y);
                tmp[static_cast<size_t>(y) * ow + x] = s;
            }
        // vertical pass
        std::vector<double> out(static_cast<size_t>(ow) * oh, 0.0);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < window; ++i) s += g[i] * tmp[static_cast<size_t>(y + i) * ow + x];
                out[static_cast<size_t>(y) * ow + x] = s;
            }
        return out;
    };

    auto mu_a = filter([&](int x, int y) { return a.at(x, y, ch); });
    auto mu_b = filter([&](int x, int y) { return b.at(x, y, ch); });
    auto raw_aa = filter([&](int x, int y) { return a.at(x, y, ch) * a.at(x, y, ch); });
    auto raw_bb = filter([&](int x, int y) { return b.at(x, y, ch) * b.at(x, y, ch); });
    auto raw_ab = filter([&](int x, int y) { return a.at(x, y, ch) * b.at(x, y, ch); });

    double total = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        const double va = raw_aa[i] - mu_a[i] * mu_a[i];
        const double vb = raw_bb[i] - mu_b[i] * mu_b[i];
        const double cab = raw_ab[i] - mu_a[i] * mu_b[i];
        total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cab + c2)) /
                 ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    return total / static_cast<double>(mu_a.size());
}

}  // namespace

double ssim(const RealImage& a, const RealImage& b, int window, double k1, double k2,
            double dynamic_range) {
    check_same_shape(a, b);
    require(window >= 3 && window % 2 == 1, "BadParams", "ssim window must be odd and >= 3");
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c)
        total += ssim_channel(a, b, c, window, k1, k2, dynamic_range);
    return total / a.channels;
}

double psnr(const RealImage& a, const RealImage& b, double dynamic_range) {
    check_same_shape(a, b);
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(dynamic_range * dynamic_range / mse);
}

double pearson(const RealImage& a, const RealImage& b) {
    check_same_shape(a, b);
    const size_t n = a.data.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a.data[i];
        mb += b.data[i];
    }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cab = 0;
    for (size_t i = 0; i < n; ++i) {
        const double da = a.data[i] - ma, db = b.data[i] - mb;
        va += da * da;
        vb += db * db;
        cab += da * db;
    }
    if (va <= 1e-300 || vb <= 1e-300) return 0.0;
    return cab / std::sqrt(va * vb);
}

double contrast(const RealImage& img) {
    const double mean = image_mean(img);
    require(mean > 0.0, "ZeroBackground", "contrast requires mean > 0");
    double var = 0.0;
    for (double v : img.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(img.data.size());
    return std::sqrt(var) / mean;
}

MetricReport compare_images(const RealImage& a, const RealImage& b) {
    check_same_shape(a, b);
    MetricReport r;
    for (int c = 0; c < a.channels; ++c) {
        RealImage ac = a.channels == 1 ? a : extract_channel(a, c);
        RealImage bc = b.channels == 1 ? b : extract_channel(b, c);
        r.ssim_per_channel.push_back(ssim(ac, bc));
        r.psnr_per_channel.push_back(psnr(ac, bc));
        r.pearson_per_channel.push_back(pearson(ac, bc));
        r.contrast_per_channel.push_back(contrast(ac));
    }
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    r.ssim_mean = mean_of(r.ssim_per_channel);
    r.psnr_mean = mean_of(r.psnr_per_channel);
    r.pearson_mean = mean_of(r.pearson_per_channel);
    r.contrast_mean = mean_of(r.contrast_per_channel);
    return r;
}

std::string metric_csv_header() {
    return "plane,stage,ssim,psnr_db,pearson_r,contrast\n";
}

std::string metric_csv_row(int plane, const std::string& stage, const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.9g\n", plane, stage.c_str(),
                  r.ssim_mean, r.psnr_mean, r.pearson_mean, r.contrast_mean);
    return buf;
}

}  // namespace holo
