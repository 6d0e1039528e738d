#pragma once

#include <utility>
#include <vector>

#include "holo/field.hpp"

namespace holo {

// Row-major 2x3 matrix in pixel units: [a11 a12 tx; a21 a22 ty].
struct AffineTransform2D {
    double a11 = 1.0, a12 = 0.0, tx = 0.0;
    double a21 = 0.0, a22 = 1.0, ty = 0.0;

    static AffineTransform2D identity() { return {}; }
    static AffineTransform2D translation(double dx, double dy) { return {1, 0, dx, 0, 1, dy}; }

    double det() const { return a11 * a22 - a12 * a21; }
    AffineTransform2D inverse() const;  // throws SingularTransform when |det| <= 1e-6

    std::pair<double, double> apply(double x, double y) const {
        return {a11 * x + a12 * y + tx, a21 * x + a22 * y + ty};
    }
};

// Per-block subpixel shifts at block centers.
struct DisplacementField {
    struct Block {
        double bx = 0.0, by = 0.0;  // block center, pixels
        double dx = 0.0, dy = 0.0;
        double peak = 0.0;
        bool valid = false;
    };
    int block_size = 0;
    int nx = 0, ny = 0;  // block grid
    std::vector<Block> blocks;
};

struct ShiftResult {
    double dx = 0.0;
    double dy = 0.0;
    double peak = 0.0;  // correlation peak value in (0, 1]
};

// Phase correlation: peak of IDFT of the unit-modulus cross-power spectrum,
// refined per axis by a 3-point parabolic fit. Returns the displacement of
// b's content relative to a, i.e. b(x) ~= a(x - dx, y - dy).
// Throws DegenerateInput when either image is constant.
ShiftResult phase_correlate(const RealImage& a, const RealImage& b);

struct AffineFit {
    AffineTransform2D transform;
    double rms = 0.0;  // residual RMS over the point pairs
};

// Least-squares affine from (src, dst) point pairs. Throws DegenerateGeometry
// for fewer than 3 pairs or collinear geometry.
AffineFit estimate_affine(const std::vector<std::pair<std::pair<double, double>,
                                                      std::pair<double, double>>>& pairs);

// output(x) = img(t^-1 * x), bilinear interpolation, border replication.
RealImage warp_affine(const RealImage& img, const AffineTransform2D& t);

// Per-block subpixel shifts of b relative to a via Hann-windowed phase
// correlation. Blocks with peak < 0.05 (or exceeding search_radius, or
// constant content) are invalid and filled from the nearest valid block.
DisplacementField local_refine(const RealImage& a, const RealImage& b, int block_size,
                               int search_radius);

struct AxialMatchResult {
    double z_offset_um = 0.0;
    // (bf plane index, bp plane index) for every bf plane paired under the offset
    std::vector<std::pair<int, int>> pairing;
};

// Axial alignment of a back-propagated amplitude stack against a bright-field
// stack: picks the integer-plane offset maximizing the normalized cross-
// correlation of the two focus_metric profiles. Throws NoOverlap when fewer
// than 3 planes can be paired.
AxialMatchResult axial_match(const std::vector<RealImage>& bp_amplitudes,
                             const std::vector<double>& bp_z_um, const ZStack& bf_stack);

// Cross-modality preprocessing used before correlating a back-propagated
// amplitude against a bright-field channel: mean-normalize, then take the
// gradient magnitude (contrast between the modalities is inverted; gradients
// are robust to that).
RealImage registration_preprocess(const RealImage& single_channel);

}  // namespace holo
