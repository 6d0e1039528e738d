#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "holo/error.hpp"

namespace holo {

using cplx = std::complex<double>;

// Physical sampling parameters of a field or image grid.
struct OpticalParams {
    double wavelength_um = 0.85;   // illumination wavelength (lambda)
    double pixel_pitch_um = 1.12;  // grid sampling pitch
    double refractive_index = 1.0; // medium index n

    void validate() const;
};

// 2D grid of complex amplitudes, row-major, with physical pitch/wavelength.
// Immutable by convention once built; ops return new fields.
struct ComplexField {
    int width = 0;
    int height = 0;
    OpticalParams params;
    std::vector<cplx> data;

    ComplexField() = default;
    ComplexField(int w, int h, const OpticalParams& p, cplx fill = cplx(0.0, 0.0));

    cplx& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    const cplx& at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    void validate() const;  // dimensions, data length, finiteness
};

// Nonnegative intensity grid, 1 or 3 channels, channel-interleaved row-major.
struct RealImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    RealImage() = default;
    RealImage(int w, int h, int c = 1, double fill = 0.0);

    double& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    const double& at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    void validate() const;
};

// Ordered stack of same-shaped images at strictly increasing depths.
struct ZStack {
    std::vector<RealImage> planes;
    std::vector<double> z_positions_um;

    void validate() const;
};

// |u|^2 per pixel.
RealImage intensity(const ComplexField& field);

// img / mean(img). Throws ZeroBackground when the mean is <= 1e-15.
RealImage normalize_background(const RealImage& img);

// Centers the field in a w x h grid, border filled with `fill`.
// Throws ShrinkNotAllowed when the target is smaller than the field.
ComplexField pad_to(const ComplexField& field, int w, int h, cplx fill);

// Inverse of pad_to: extracts the centered w x h region.
ComplexField center_crop(const ComplexField& field, int w, int h);

// Sum over pixels of |u|^2.
double field_energy(const ComplexField& field);

// .cfld serialization, bit-exact round trip. Little-endian layout:
// "CFLD" | version u32=1 | width u32 | height u32 | wavelength f64 |
// pitch f64 | refractive_index f64 | width*height*(re,im) f64 row-major.
std::vector<uint8_t> save_cfld(const ComplexField& field);
ComplexField load_cfld(const std::vector<uint8_t>& bytes);
void save_cfld_file(const ComplexField& field, const std::filesystem::path& path);
ComplexField load_cfld_file(const std::filesystem::path& path);

// PGM (P5) / PPM (P6) export with maxval 65535, values linearly mapped from
// [0, max(img)]. Single-channel images go to PGM, 3-channel to PPM.
void save_pnm(const RealImage& img, const std::filesystem::path& path);
RealImage load_pnm(const std::filesystem::path& path);  // values are raw 0..65535 counts

// Helpers shared across modules.
RealImage amplitude(const ComplexField& field);          // |u| per pixel
RealImage extract_channel(const RealImage& img, int c);  // single channel copy
double image_mean(const RealImage& img);

}  // namespace holo
