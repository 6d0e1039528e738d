#include <doctest.h>

#include <cmath>

#include "holo/fft.hpp"
#include "holo/field.hpp"
#include "holo/propagate.hpp"
#include "holo/rng.hpp"

using namespace holo;

namespace {

// random field with its spectrum confined to |f| < frac * nyquist
ComplexField random_bandlimited(int w, int h, const OpticalParams& params, double frac, Rng& rng) {
    ComplexField f(w, h, params);
    for (auto& v : f.data) v = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    fft2(f.data, w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fx = static_cast<double>(freq_index(x, w)) / w;
            const double fy = static_cast<double>(freq_index(y, h)) / h;
            if (fx * fx + fy * fy > 0.25 * frac * frac) f.at(x, y) = 0.0;
        }
    }
    ifft2(f.data, w, h);
    return f;
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("transfer_function at z=0 is identically 1 on a fully propagating grid") {
    TransferSpec spec;
    spec.z_um = 0.0;  // default params: the whole grid sits inside the propagating band
    ComplexField H = transfer_function(spec, 32, 32);
    for (const auto& v : H.data) {
        CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("transfer_function on-axis entry is exp(i 2 pi n z / lambda)") {
    TransferSpec spec;
    spec.z_um = 37.5;
    spec.params.refractive_index = 1.33;
    ComplexField H = transfer_function(spec, 16, 16);
    const double phase = 2.0 * M_PI * spec.params.refractive_index * spec.z_um /
                         spec.params.wavelength_um;
    CHECK(H.at(0, 0).real() == doctest::Approx(std::cos(phase)).epsilon(1e-12));
    CHECK(H.at(0, 0).imag() == doctest::Approx(std::sin(phase)).epsilon(1e-12));
}

TEST_CASE("transfer_function zeroes the evanescent band in Zero mode") {
    TransferSpec spec;
    spec.z_um = 10.0;
    spec.params.pixel_pitch_um = 0.4;  // nyquist 1.25 > n/lambda 1.176: corner is evanescent
    ComplexField H = transfer_function(spec, 64, 64);
    const double cutoff = spec.params.refractive_index / spec.params.wavelength_um;
    bool saw_evanescent = false;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const double fx = freq_index(x, 64) / (64 * 0.4);
            const double fy = freq_index(y, 64) / (64 * 0.4);
            if (fx * fx + fy * fy > cutoff * cutoff) {
                saw_evanescent = true;
                CHECK(H.at(x, y) == cplx(0.0, 0.0));
            }
        }
    }
    CHECK(saw_evanescent);
}

TEST_CASE("transfer_function decays the evanescent band in Decay mode") {
    TransferSpec spec;
    spec.z_um = 2.0;
    spec.params.pixel_pitch_um = 0.4;
    spec.evanescent_mode = EvanescentMode::Decay;
    ComplexField H = transfer_function(spec, 64, 64);
    const double cutoff = spec.params.refractive_index / spec.params.wavelength_um;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const double fx = freq_index(x, 64) / (64 * 0.4);
            const double fy = freq_index(y, 64) / (64 * 0.4);
            const double fsq = fx * fx + fy * fy;
            if (fsq > cutoff * cutoff) {
                const double expect = std::exp(-2.0 * M_PI * spec.z_um *
                                               std::sqrt(fsq - cutoff * cutoff));
                CHECK(H.at(x, y).imag() == 0.0);
                CHECK(H.at(x, y).real() == doctest::Approx(expect).epsilon(1e-12));
                CHECK(std::abs(H.at(x, y)) <= 1.0);
            }
        }
    }
}

TEST_CASE("transfer_function magnitude never exceeds 1") {
    TransferSpec spec;
    spec.z_um = -123.0;
    spec.params.pixel_pitch_um = 0.4;
    for (auto mode : {EvanescentMode::Zero, EvanescentMode::Decay}) {
        spec.evanescent_mode = mode;
        ComplexField H = transfer_function(spec, 32, 48);
        for (const auto& v : H.data) CHECK(std::abs(v) <= 1.0 + 1e-12);
    }
}

TEST_CASE("transfer_function is even in frequency") {
    TransferSpec spec;
    spec.z_um = 55.0;
    ComplexField H = transfer_function(spec, 32, 32);
    for (int y = 1; y < 32; ++y)
        for (int x = 1; x < 32; ++x) {
            const cplx a = H.at(x, y);
            const cplx b = H.at(32 - x, 32 - y);  // (fx,fy) -> (-fx,-fy)
            CHECK(a.real() == doctest::Approx(b.real()).epsilon(1e-12));
            CHECK(a.imag() == doctest::Approx(b.imag()).epsilon(1e-12));
        }
}

TEST_CASE("transfer_function of z and -z multiply to 1 on the propagating band") {
    TransferSpec spec;
    spec.z_um = 77.0;
    spec.params.pixel_pitch_um = 0.4;
    TransferSpec back = spec;
    back.z_um = -77.0;
    ComplexField Hf = transfer_function(spec, 32, 32);
    ComplexField Hb = transfer_function(back, 32, 32);
    const double cutoff = 1.0 / spec.params.wavelength_um;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double fx = freq_index(x, 32) / (32 * 0.4);
            const double fy = freq_index(y, 32) / (32 * 0.4);
            if (fx * fx + fy * fy >= cutoff * cutoff) continue;
            const cplx prod = Hf.at(x, y) * Hb.at(x, y);
            CHECK(prod.real() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(prod.imag() == doctest::Approx(0.0).epsilon(1e-12));
        }
}

TEST_CASE("propagate by zero distance is the identity to 1e-12") {
    Rng rng(derive_seed(20, "prop-zero"));
    ComplexField u = random_bandlimited(64, 64, OpticalParams{}, 1.0, rng);
    ComplexField v = propagate(u, 0.0);
    CHECK(max_abs_diff(u, v) < 1e-12);
}

TEST_CASE("spectral round trip propagate(z) then propagate(-z) recovers the field") {
    Rng rng(derive_seed(21, "prop-roundtrip"));
    OpticalParams params;
    ComplexField u = random_bandlimited(64, 64, params, 0.5, rng);
    for (double z : {10.0, 100.0, 1000.0}) {
        ComplexField v = spectral_propagate(spectral_propagate(u, z), -z);
        CHECK(max_abs_diff(u, v) < 1e-9);
    }
}

TEST_CASE("spectral propagation conserves energy on the propagating band") {
    Rng rng(derive_seed(22, "prop-energy"));
    OpticalParams params;
    params.pixel_pitch_um = 0.4;
    // confine the spectrum inside the propagating circle so Zero mode removes nothing
    ComplexField u = random_bandlimited(64, 64, params, 0.6, rng);
    const double e0 = field_energy(u);
    for (double z : {5.0, 50.0, 500.0}) {
        const double e1 = field_energy(spectral_propagate(u, z));
        CHECK(std::abs(e1 - e0) / e0 < 1e-12);
    }
}

TEST_CASE("propagation composes: z1 then z2 equals z1+z2") {
    Rng rng(derive_seed(23, "prop-compose"));
    ComplexField u = random_bandlimited(64, 64, OpticalParams{}, 0.5, rng);
    ComplexField a = spectral_propagate(spectral_propagate(u, 30.0), 45.0);
    ComplexField b = spectral_propagate(u, 75.0);
    CHECK(max_abs_diff(a, b) < 1e-9);
}

TEST_CASE("gaussian beam width at one rayleigh range matches the analytic law") {
    // w0 = 10 um, lambda = 0.85 um: zR = pi w0^2 / lambda, w(zR) = w0 sqrt(2)
    OpticalParams params;  // pitch 1.12 um
    const double w0 = 10.0;
    const double zr = M_PI * w0 * w0 / params.wavelength_um;
    const int n = 256;
    ComplexField u(n, n, params);
    const double c = (n / 2) * params.pixel_pitch_um;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double dx = (x + 0.5) * params.pixel_pitch_um - c;
            const double dy = (y + 0.5) * params.pixel_pitch_um - c;
            u.at(x, y) = std::exp(-(dx * dx + dy * dy) / (w0 * w0));
        }
    ComplexField prop = propagate(u, zr);
    RealImage I = intensity(prop);
    // 1/e^2 radius via the second moment: <r^2> = w^2/2 for a gaussian
    double num = 0.0, den = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double dx = (x + 0.5) * params.pixel_pitch_um - c;
            const double dy = (y + 0.5) * params.pixel_pitch_um - c;
            num += I.at(x, y) * (dx * dx + dy * dy);
            den += I.at(x, y);
        }
    const double w_meas = std::sqrt(2.0 * num / den);
    const double w_expect = w0 * std::sqrt(2.0);
    CHECK(std::abs(w_meas - w_expect) / w_expect < 0.01);
}

TEST_CASE("back_propagate of an all-ones hologram has unit intensity") {
    RealImage holo_img(64, 64, 1, 1.0);
    ComplexField f = back_propagate(holo_img, 137.0, OpticalParams{});
    RealImage I = intensity(f);
    for (double v : I.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("back_propagate requires a nonzero hologram") {
    RealImage holo_img(16, 16, 1, 0.0);
    CHECK_THROWS_WITH_AS(back_propagate(holo_img, 10.0, OpticalParams{}),
                         doctest::Contains("ZeroBackground"), Error);
}

TEST_CASE("zscan of a single z is a single back-propagation") {
    Rng rng(derive_seed(24, "zscan-single"));
    RealImage holo_img(32, 32, 1);
    for (auto& v : holo_img.data) v = rng.uniform(0.5, 1.5);
    auto fields = zscan(holo_img, {42.0}, OpticalParams{});
    REQUIRE(fields.size() == 1);
    ComplexField direct = back_propagate(holo_img, 42.0, OpticalParams{});
    CHECK(fields[0].data == direct.data);
}

TEST_CASE("zscan produces 81 planes at 0.5 um spacing") {
    RealImage holo_img(16, 16, 1, 1.0);
    holo_img.at(8, 8) = 2.0;
    std::vector<double> z;
    for (int i = 0; i < 81; ++i) z.push_back(280.0 + 0.5 * i);
    auto fields = zscan(holo_img, z, OpticalParams{});
    CHECK(fields.size() == 81);
}

TEST_CASE("zscan rejects empty and non-increasing z lists") {
    RealImage holo_img(16, 16, 1, 1.0);
    CHECK_THROWS_WITH_AS(zscan(holo_img, {}, OpticalParams{}), doctest::Contains("EmptyZList"),
                         Error);
    CHECK_THROWS_WITH_AS(zscan(holo_img, {10.0, 10.0}, OpticalParams{}),
                         doctest::Contains("BadZList"), Error);
    CHECK_THROWS_WITH_AS(zscan(holo_img, {10.0, 9.0}, OpticalParams{}),
                         doctest::Contains("BadZList"), Error);
}

TEST_CASE("focus_metric of a uniform image is zero") {
    RealImage img(32, 32, 1, 0.7);
    CHECK(focus_metric(img) == 0.0);
}

TEST_CASE("focus_metric ranks a checkerboard above its box blur") {
    const int n = 32;
    RealImage sharp(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) sharp.at(x, y) = ((x / 4 + y / 4) % 2) ? 1.0 : 0.0;
    RealImage blurred(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double s = 0.0;
            int count = 0;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= n || yy < 0 || yy >= n) continue;
                    s += sharp.at(xx, yy);
                    ++count;
                }
            blurred.at(x, y) = s / count;
        }
    CHECK(focus_metric(sharp) > focus_metric(blurred));
}

TEST_CASE("focus_metric is invariant to positive rescaling") {
    Rng rng(derive_seed(25, "focus-scale"));
    RealImage img(24, 24, 1);
    for (auto& v : img.data) v = rng.uniform(0.0, 1.0);
    RealImage scaled = img;
    for (auto& v : scaled.data) v *= 7.3;
    CHECK(focus_metric(img) == doctest::Approx(focus_metric(scaled)).epsilon(1e-12));
}
