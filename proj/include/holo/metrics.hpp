#pragma once

#include <vector>

#include "holo/field.hpp"

namespace holo {

// Windowed SSIM (11x11 Gaussian, sigma 1.5) averaged over all positions
// where the window fits; multi-channel images are averaged over channels.
// Values are expected in [0, dynamic_range].
double ssim(const RealImage& a, const RealImage& b, int window = 11, double k1 = 0.01,
            double k2 = 0.03, double dynamic_range = 1.0);

// 10*log10(R^2/MSE); +inf when the images are identical.
double psnr(const RealImage& a, const RealImage& b, double dynamic_range = 1.0);

// Pearson correlation over all samples; 0 when either image is constant.
double pearson(const RealImage& a, const RealImage& b);

// std/mean; requires mean > 0.
double contrast(const RealImage& img);

struct MetricReport {
    std::vector<double> ssim_per_channel;
    std::vector<double> psnr_per_channel;
    std::vector<double> pearson_per_channel;
    std::vector<double> contrast_per_channel;  // of the first argument
    double ssim_mean = 0.0;
    double psnr_mean = 0.0;
    double pearson_mean = 0.0;
    double contrast_mean = 0.0;
};

MetricReport compare_images(const RealImage& a, const RealImage& b);

// CSV header/row for a report, keyed by (plane, stage).
std::string metric_csv_header();
std::string metric_csv_row(int plane, const std::string& stage, const MetricReport& r);

}  // namespace holo
