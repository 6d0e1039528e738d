#include "holo/propagate.hpp"

#include <cmath>

#include "holo/fft.hpp"

namespace holo {

void TransferSpec::validate() const {
    params.validate();
    require(std::abs(z_um) < 1e7, "BadParams", "|z_um| out of sanity bound");
}

ComplexField transfer_function(const TransferSpec& spec, int w, int h) {
    spec.validate();
    require(w >= 2 && h >= 2, "BadDims", "transfer function grid must be >= 2");
    const double pitch = spec.params.pixel_pitch_um;
    const double n_over_lambda = spec.params.refractive_index / spec.params.wavelength_um;
    const double cutoff_sq = n_over_lambda * n_over_lambda;
    const double dfx = 1.0 / (w * pitch);
    const double dfy = 1.0 / (h * pitch);
    const double z = spec.z_um;

    ComplexField H(w, h, spec.params);
    for (int iy = 0; iy < h; ++iy) {
        const double fy = freq_index(iy, h) * dfy;
        for (int ix = 0; ix < w; ++ix) {
            const double fx = freq_index(ix, w) * dfx;
            const double arg = cutoff_sq - fx * fx - fy * fy;
            if (arg >= 0.0) {
                const double phase = 2.0 * M_PI * z * std::sqrt(arg);
                H.at(ix, iy) = cplx(std::cos(phase), std::sin(phase));
            } else if (spec.evanescent_mode == EvanescentMode::Decay) {
                H.at(ix, iy) = cplx(std::exp(-2.0 * M_PI * std::abs(z) * std::sqrt(-arg)), 0.0);
            }  // Zero mode: leave at 0
        }
    }
    return H;
}

ComplexField spectral_propagate(const ComplexField& field, double z_um, EvanescentMode mode) {
    TransferSpec spec{z_um, field.params, mode};
    ComplexField H = transfer_function(spec, field.width, field.height);
    ComplexField out = field;
    fft2(out.data, out.width, out.height);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= H.data[i];
    ifft2(out.data, out.width, out.height);
    return out;
}

namespace {

cplx border_mean(const ComplexField& f) {
    cplx sum(0.0, 0.0);
    size_t count = 0;
    for (int x = 0; x < f.width; ++x) {
        sum += f.at(x, 0) + f.at(x, f.height - 1);
        count += 2;
    }
    for (int y = 1; y < f.height - 1; ++y) {
        sum += f.at(0, y) + f.at(f.width - 1, y);
        count += 2;
    }
    return sum / static_cast<double>(count);
}

}  // namespace

ComplexField propagate(const ComplexField& field, double z_um, EvanescentMode mode) {
    ComplexField padded = pad_to(field, 2 * field.width, 2 * field.height, border_mean(field));
    ComplexField prop = spectral_propagate(padded, z_um, mode);
    return center_crop(prop, field.width, field.height);
}

ComplexField back_propagate(const RealImage& hologram, double z_um, const OpticalParams& params,
                            EvanescentMode mode) {
    require(hologram.channels == 1, "BadDims", "hologram must be single-channel");
    RealImage norm = normalize_background(hologram);
    ComplexField field(hologram.width, hologram.height, params);
    for (size_t i = 0; i < norm.data.size(); ++i) field.data[i] = cplx(std::sqrt(norm.data[i]), 0.0);
    return propagate(field, -z_um, mode);
}

std::vector<ComplexField> zscan(const RealImage& hologram, const std::vector<double>& z_list,
                                const OpticalParams& params, EvanescentMode mode) {
    if (z_list.empty()) fail("EmptyZList", "zscan requires at least one z position");
    for (size_t i = 1; i < z_list.size(); ++i)
        if (z_list[i] <= z_list[i - 1]) fail("BadZList", "z_list must be strictly increasing");
    std::vector<ComplexField> out;
    out.reserve(z_list.size());
    for (double z : z_list) out.push_back(back_propagate(hologram, z, params, mode));
    return out;
}

double focus_metric(const RealImage& img) {
    require(img.channels == 1, "BadDims", "focus_metric expects a single channel");
    const int w = img.width, h = img.height;
    if (w < 3 || h < 3) return 0.0;
    // central-difference gradient magnitude over the interior
    std::vector<double> g;
    g.reserve(static_cast<size_t>(w - 2) * (h - 2));
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
            const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
            g.push_back(std::sqrt(gx * gx + gy * gy));
        }
    }
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    if (mean <= 1e-300) return 0.0;
    double var = 0.0;
    for (double v : g) var += (v - mean) * (v - mean);
    var /= static_cast<double>(g.size());
    return std::sqrt(std::sqrt(var) / mean);
}

}  // namespace holo
