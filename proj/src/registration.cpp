#include "holo/registration.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "holo/fft.hpp"
#include "holo/propagate.hpp"

namespace holo {

AffineTransform2D AffineTransform2D::inverse() const {
    const double d = det();
    if (std::abs(d) <= 1e-6) fail("SingularTransform", "affine transform is not invertible");
    AffineTransform2D inv;
    inv.a11 = a22 / d;
    inv.a12 = -a12 / d;
    inv.a21 = -a21 / d;
    inv.a22 = a11 / d;
    inv.tx = -(inv.a11 * tx + inv.a12 * ty);
    inv.ty = -(inv.a21 * tx + inv.a22 * ty);
    return inv;
}

namespace {

double image_std(const RealImage& img) {
    const double mean = image_mean(img);
    double var = 0.0;
    for (double v : img.data) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(img.data.size()));
}

// 3-point parabolic peak refinement; returns the fractional offset in
// [-0.5, 0.5]. Fitted on log-values when all three samples are positive
// (exact for Gaussian-shaped peaks, much lower bias on tapered ones).
double parabolic_offset(double cm, double c0, double cp) {
    if (cm > 0.0 && c0 > 0.0 && cp > 0.0) {
        cm = std::log(cm);
        c0 = std::log(c0);
        cp = std::log(cp);
    }
    const double denom = cm - 2.0 * c0 + cp;
    if (std::abs(denom) < 1e-300) return 0.0;
    double off = 0.5 * (cm - cp) / denom;
    return std::clamp(off, -0.5, 0.5);
}

}  // namespace

ShiftResult phase_correlate(const RealImage& a, const RealImage& b) {
    require(a.channels == 1 && b.channels == 1, "BadDims", "phase_correlate expects single channel");
    require(a.width == b.width && a.height == b.height, "BadDims",
            "phase_correlate images must share dimensions");
    if (image_std(a) <= 1e-12 || image_std(b) <= 1e-12)
        fail("DegenerateInput", "phase correlation of a constant image is undefined");

    const int w = a.width, h = a.height;
    const size_t count = static_cast<size_t>(w) * h;
    std::vector<cplx> fa(a.data.begin(), a.data.end());
    std::vector<cplx> fb(b.data.begin(), b.data.end());
    fft2(fa, w, h);
    fft2(fb, w, h);
    // Unit-modulus cross-power spectrum with a separable Hann taper. The raw
    // surface is a Dirichlet-like spike whose 3-point parabola bias exceeds
    // 0.1 px; tapering smooths the peak so the fit lands within a few
    // hundredths of a pixel. The surface is rescaled so that identical
    // images still peak at exactly 1.
    double taper_sum = 0.0;
    for (int iy = 0; iy < h; ++iy) {
        const double fy = std::abs(static_cast<double>(freq_index(iy, h))) / (h / 2.0);
        const double wy = 0.5 * (1.0 + std::cos(M_PI * std::min(fy, 1.0)));
        for (int ix = 0; ix < w; ++ix) {
            const double fx = std::abs(static_cast<double>(freq_index(ix, w))) / (w / 2.0);
            const double wx = 0.5 * (1.0 + std::cos(M_PI * std::min(fx, 1.0)));
            const size_t i = static_cast<size_t>(iy) * w + ix;
            const cplx r = fa[i] * std::conj(fb[i]);
            const double mag = std::abs(r);
            const double taper = wx * wy;
            fa[i] = mag > 1e-300 ? r / mag * taper : cplx(0.0, 0.0);
            taper_sum += taper;
        }
    }
    ifft2(fa, w, h);
    const double rescale = static_cast<double>(count) / taper_sum;
    for (auto& v : fa) v *= rescale;

    // the surface is real up to roundoff; locate the peak of the real part
    int px = 0, py = 0;
    double peak = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = fa[static_cast<size_t>(y) * w + x].real();
            if (v > peak) {
                peak = v;
                px = x;
                py = y;
            }
        }
    }
    auto sample = [&](int x, int y) {
        x = (x % w + w) % w;
        y = (y % h + h) % h;
        return fa[static_cast<size_t>(y) * w + x].real();
    };
    const double ox = parabolic_offset(sample(px - 1, py), peak, sample(px + 1, py));
    const double oy = parabolic_offset(sample(px, py - 1), peak, sample(px, py + 1));

    // surface peak at p means b is displaced by -p relative to a under the
    // forward-DFT sign convention; unwrap to the signed range
    double dx = px + ox;
    double dy = py + oy;
    if (dx > w / 2.0) dx -= w;
    if (dy > h / 2.0) dy -= h;
    ShiftResult res;
    res.dx = -dx;
    res.dy = -dy;
    res.peak = std::clamp(peak, 0.0, 1.0);
    return res;
}

AffineFit estimate_affine(const std::vector<std::pair<std::pair<double, double>,
                                                      std::pair<double, double>>>& pairs) {
    if (pairs.size() < 3) fail("DegenerateGeometry", "estimate_affine needs at least 3 point pairs");

    // normal equations for [a b t]: M * p = r, shared 3x3 M for both rows
    double M[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double rx[3] = {0, 0, 0}, ry[3] = {0, 0, 0};
    for (const auto& [src, dst] : pairs) {
        const double v[3] = {src.first, src.second, 1.0};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) M[i][j] += v[i] * v[j];
            rx[i] += v[i] * dst.first;
            ry[i] += v[i] * dst.second;
        }
    }

    // gaussian elimination with partial pivoting on the 3x3 system
    double aug[3][5];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) aug[i][j] = M[i][j];
        aug[i][3] = rx[i];
        aug[i][4] = ry[i];
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
        if (std::abs(aug[piv][col]) < 1e-9)
            fail("DegenerateGeometry", "point pairs are collinear or degenerate");
        std::swap(aug[col], aug[piv]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = aug[r][col] / aug[col][col];
            for (int j = col; j < 5; ++j) aug[r][j] -= f * aug[col][j];
        }
    }
    AffineFit fit;
    fit.transform.a11 = aug[0][3] / aug[0][0];
    fit.transform.a12 = aug[1][3] / aug[1][1];
    fit.transform.tx = aug[2][3] / aug[2][2];
    fit.transform.a21 = aug[0][4] / aug[0][0];
    fit.transform.a22 = aug[1][4] / aug[1][1];
    fit.transform.ty = aug[2][4] / aug[2][2];

    double ss = 0.0;
    for (const auto& [src, dst] : pairs) {
        auto [x, y] = fit.transform.apply(src.first, src.second);
        const double ex = x - dst.first, ey = y - dst.second;
        ss += ex * ex + ey * ey;
    }
    fit.rms = std::sqrt(ss / static_cast<double>(pairs.size()));
    return fit;
}

RealImage warp_affine(const RealImage& img, const AffineTransform2D& t) {
    const AffineTransform2D inv = t.inverse();
    RealImage out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            auto [sx, sy] = inv.apply(x, y);
            // bilinear sample with border replication
            const double cx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
            const double cy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
            const int x0 = static_cast<int>(std::floor(cx));
            const int y0 = static_cast<int>(std::floor(cy));
            const int x1 = std::min(x0 + 1, img.width - 1);
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double fx = cx - x0, fy = cy - y0;
            for (int c = 0; c < img.channels; ++c) {
                const double v = (1 - fx) * (1 - fy) * img.at(x0, y0, c) +
                                 fx * (1 - fy) * img.at(x1, y0, c) +
                                 (1 - fx) * fy * img.at(x0, y1, c) + fx * fy * img.at(x1, y1, c);
                out.at(x, y, c) = v;
            }
        }
    }
    return out;
}

namespace {

RealImage hann_window(const RealImage& img) {
    RealImage out = img;
    for (int y = 0; y < img.height; ++y) {
        const double wy = 0.5 * (1.0 - std::cos(2.0 * M_PI * y / (img.height - 1)));
        for (int x = 0; x < img.width; ++x) {
            const double wx = 0.5 * (1.0 - std::cos(2.0 * M_PI * x / (img.width - 1)));
            out.at(x, y) *= wx * wy;
        }
    }
    return out;
}

RealImage crop_block(const RealImage& img, int x0, int y0, int size) {
    RealImage out(size, size, 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at(x, y) = img.at(x0 + x, y0 + y);
    return out;
}

}  // namespace

DisplacementField local_refine(const RealImage& a, const RealImage& b, int block_size,
                               int search_radius) {
    require(a.channels == 1 && b.channels == 1, "BadDims", "local_refine expects single channel");
    require(a.width == b.width && a.height == b.height, "BadDims", "images must share dimensions");
    require(block_size >= 16, "BadParams", "block_size must be >= 16");
    require(search_radius > 0, "BadParams", "search_radius must be > 0");

    DisplacementField field;
    field.block_size = block_size;
    field.nx = a.width / block_size;
    field.ny = a.height / block_size;
    require(field.nx >= 1 && field.ny >= 1, "BadParams", "block_size larger than image");

    for (int by = 0; by < field.ny; ++by) {
        for (int bx = 0; bx < field.nx; ++bx) {
            DisplacementField::Block blk;
            blk.bx = (bx + 0.5) * block_size;
            blk.by = (by + 0.5) * block_size;
            try {
                RealImage wa = hann_window(crop_block(a, bx * block_size, by * block_size, block_size));
                RealImage wb = hann_window(crop_block(b, bx * block_size, by * block_size, block_size));
                ShiftResult s = phase_correlate(wa, wb);
                blk.dx = s.dx;
                blk.dy = s.dy;
                blk.peak = s.peak;
                blk.valid = s.peak >= 0.05 && std::abs(s.dx) <= search_radius &&
                            std::abs(s.dy) <= search_radius;
            } catch (const Error&) {
                blk.valid = false;  // constant block
            }
            field.blocks.push_back(blk);
        }
    }

    bool any_valid = false;
    for (const auto& blk : field.blocks) any_valid |= blk.valid;
    if (!any_valid) fail("NoValidBlocks", "no block produced a usable correlation peak");

    // fill invalid blocks from the nearest valid one (ties: first in raster order)
    for (auto& blk : field.blocks) {
        if (blk.valid) continue;
        double best = std::numeric_limits<double>::infinity();
        const DisplacementField::Block* src = nullptr;
        for (const auto& cand : field.blocks) {
            if (!cand.valid) continue;
            const double d = (cand.bx - blk.bx) * (cand.bx - blk.bx) +
                             (cand.by - blk.by) * (cand.by - blk.by);
            if (d < best) {
                best = d;
                src = &cand;
            }
        }
        blk.dx = src->dx;
        blk.dy = src->dy;
        blk.peak = src->peak;
    }
    return field;
}

AxialMatchResult axial_match(const std::vector<RealImage>& bp_amplitudes,
                             const std::vector<double>& bp_z_um, const ZStack& bf_stack) {
    require(!bp_amplitudes.empty() && !bf_stack.planes.empty(), "BadDims",
            "axial_match requires nonempty stacks");
    require(bp_amplitudes.size() == bp_z_um.size(), "BadDims",
            "bp stack and z sampling size mismatch");

    std::vector<double> prof_bp, prof_bf;
    for (const auto& img : bp_amplitudes) prof_bp.push_back(focus_metric(img));
    for (const auto& img : bf_stack.planes)
        prof_bf.push_back(focus_metric(img.channels == 3 ? extract_channel(img, 1) : img));

    const int nbp = static_cast<int>(prof_bp.size());
    const int nbf = static_cast<int>(prof_bf.size());
    // normalized cross-correlation of the profiles over integer plane offsets;
    // bf plane j pairs with bp plane j + offset
    auto ncc_at = [&](int offset, int& overlap) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        overlap = 0;
        for (int j = 0; j < nbf; ++j) {
            const int i = j + offset;
            if (i < 0 || i >= nbp) continue;
            const double x = prof_bf[j], y = prof_bp[i];
            sa += x;
            sb += y;
            saa += x * x;
            sbb += y * y;
            sab += x * y;
            ++overlap;
        }
        if (overlap < 3) return -2.0;
        const double n = overlap;
        const double cov = sab - sa * sb / n;
        const double va = saa - sa * sa / n;
        const double vb = sbb - sb * sb / n;
        if (va <= 1e-300 || vb <= 1e-300) return 0.0;
        return cov / std::sqrt(va * vb);
    };

    int best_offset = 0;
    double best_ncc = -3.0;
    bool feasible = false;
    for (int offset = -(nbp - 1); offset <= nbp - 1; ++offset) {
        int overlap = 0;
        const double v = ncc_at(offset, overlap);
        if (overlap >= 3) feasible = true;
        if (v > best_ncc) {
            best_ncc = v;
            best_offset = offset;
        }
    }
    if (!feasible || best_ncc <= -2.0)
        fail("NoOverlap", "no axial offset leaves at least 3 paired planes");

    const double dz_bp =
        bp_z_um.size() > 1 ? bp_z_um[1] - bp_z_um[0] : (bf_stack.z_positions_um.size() > 1
                                                            ? bf_stack.z_positions_um[1] -
                                                                  bf_stack.z_positions_um[0]
                                                            : 0.0);
    AxialMatchResult res;
    res.z_offset_um = best_offset * dz_bp;
    for (int j = 0; j < nbf; ++j) {
        const int i = j + best_offset;
        if (i >= 0 && i < nbp) res.pairing.emplace_back(j, i);
    }
    return res;
}

RealImage registration_preprocess(const RealImage& single_channel) {
    RealImage norm = normalize_background(single_channel);
    RealImage out(norm.width, norm.height, 1, 0.0);
    for (int y = 1; y < norm.height - 1; ++y) {
        for (int x = 1; x < norm.width - 1; ++x) {
            const double gx = 0.5 * (norm.at(x + 1, y) - norm.at(x - 1, y));
            const double gy = 0.5 * (norm.at(x, y + 1) - norm.at(x, y - 1));
            out.at(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

}  // namespace holo
