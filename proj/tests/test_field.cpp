#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "holo/field.hpp"
#include "holo/rng.hpp"

using namespace holo;

namespace {

ComplexField random_field(int w, int h, Rng& rng) {
    ComplexField f(w, h, OpticalParams{});
    for (auto& v : f.data) v = cplx(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    return f;
}

}  // namespace

TEST_CASE("intensity of a unit plane wave is all ones") {
    ComplexField f(8, 8, OpticalParams{}, cplx(1.0, 0.0));
    RealImage img = intensity(f);
    for (double v : img.data) CHECK(v == 1.0);
    CHECK(img.channels == 1);
    CHECK(img.width == 8);
}

TEST_CASE("intensity of a zero field is all zeros") {
    ComplexField f(4, 6, OpticalParams{});
    RealImage img = intensity(f);
    for (double v : img.data) CHECK(v == 0.0);
}

TEST_CASE("intensity of 3+4i is 25") {
    ComplexField f(4, 4, OpticalParams{});
    f.at(2, 1) = cplx(3.0, 4.0);
    RealImage img = intensity(f);
    CHECK(img.at(2, 1) == doctest::Approx(25.0).epsilon(1e-15));
}

TEST_CASE("intensity is invariant to a global unit-modulus phase") {
    Rng rng(derive_seed(3, "phase-invariance"));
    ComplexField f = random_field(16, 12, rng);
    const cplx phase(std::cos(0.7), std::sin(0.7));
    ComplexField g = f;
    for (auto& v : g.data) v *= phase;
    RealImage ia = intensity(f), ib = intensity(g);
    for (size_t i = 0; i < ia.data.size(); ++i)
        CHECK(ia.data[i] == doctest::Approx(ib.data[i]).epsilon(1e-12));
}

TEST_CASE("normalize_background leaves an all-ones image unchanged") {
    RealImage img(5, 5, 1, 1.0);
    RealImage out = normalize_background(img);
    for (double v : out.data) CHECK(v == 1.0);
}

TEST_CASE("normalize_background maps constant 4 to constant 1") {
    RealImage img(3, 3, 1, 4.0);
    RealImage out = normalize_background(img);
    for (double v : out.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("normalize_background of {1,3} gives {0.5,1.5}") {
    RealImage img(2, 1, 1);
    img.at(0, 0) = 1.0;
    img.at(1, 0) = 3.0;
    RealImage out = normalize_background(img);
    CHECK(out.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.at(1, 0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(image_mean(out) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize_background rejects a zero image") {
    RealImage img(4, 4, 1, 0.0);
    CHECK_THROWS_WITH_AS(normalize_background(img), doctest::Contains("ZeroBackground"), Error);
}

TEST_CASE("pad_to with the same size is the identity") {
    Rng rng(derive_seed(4, "pad-identity"));
    ComplexField f = random_field(6, 7, rng);
    ComplexField p = pad_to(f, 6, 7, cplx(0, 0));
    CHECK(p.data == f.data);
}

TEST_CASE("pad_to centers a 2x2 field in 4x4 with fill on the border") {
    ComplexField f(2, 2, OpticalParams{}, cplx(5.0, -1.0));
    ComplexField p = pad_to(f, 4, 4, cplx(0, 0));
    CHECK(p.at(1, 1) == cplx(5.0, -1.0));
    CHECK(p.at(2, 2) == cplx(5.0, -1.0));
    CHECK(p.at(0, 0) == cplx(0.0, 0.0));
    CHECK(p.at(3, 3) == cplx(0.0, 0.0));
    CHECK(p.at(0, 2) == cplx(0.0, 0.0));
}

TEST_CASE("pad then center-crop recovers the original bit-exactly") {
    Rng rng(derive_seed(5, "pad-crop"));
    ComplexField f = random_field(11, 9, rng);
    ComplexField p = pad_to(f, 32, 17, cplx(0.25, 0.5));
    ComplexField c = center_crop(p, 11, 9);
    CHECK(c.data == f.data);
}

TEST_CASE("pad_to refuses to shrink") {
    ComplexField f(8, 8, OpticalParams{});
    CHECK_THROWS_WITH_AS(pad_to(f, 4, 8, cplx(0, 0)), doctest::Contains("ShrinkNotAllowed"), Error);
}

TEST_CASE("field_energy of an 8x8 unit plane wave is 64") {
    ComplexField f(8, 8, OpticalParams{}, cplx(1.0, 0.0));
    CHECK(field_energy(f) == doctest::Approx(64.0).epsilon(1e-15));
}

TEST_CASE("field_energy of the zero field is 0") {
    ComplexField f(8, 4, OpticalParams{});
    CHECK(field_energy(f) == 0.0);
}

TEST_CASE("field_energy of a single 3+4i pixel is 25") {
    ComplexField f(4, 4, OpticalParams{});
    f.at(0, 3) = cplx(3.0, 4.0);
    CHECK(field_energy(f) == doctest::Approx(25.0).epsilon(1e-15));
}

TEST_CASE("field_energy equals the sum of intensity exactly") {
    Rng rng(derive_seed(6, "energy-sum"));
    ComplexField f = random_field(13, 10, rng);
    RealImage img = intensity(f);
    double sum = 0.0;
    for (double v : img.data) sum += v;
    CHECK(field_energy(f) == sum);  // identical summation order
}

TEST_CASE("cfld round trip is bit-exact over random fields") {
    Rng rng(derive_seed(7, "cfld-roundtrip"));
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 2 + static_cast<int>(rng.below(12));
        const int h = 2 + static_cast<int>(rng.below(12));
        ComplexField f = random_field(w, h, rng);
        f.params.wavelength_um = rng.uniform(0.4, 1.0);
        f.params.pixel_pitch_um = rng.uniform(0.5, 2.0);
        ComplexField g = load_cfld(save_cfld(f));
        REQUIRE(g.width == f.width);
        REQUIRE(g.height == f.height);
        CHECK(g.data == f.data);
        CHECK(g.params.wavelength_um == f.params.wavelength_um);
        CHECK(g.params.pixel_pitch_um == f.params.pixel_pitch_um);
        CHECK(g.params.refractive_index == f.params.refractive_index);
    }
}

TEST_CASE("cfld with a corrupted magic is rejected") {
    Rng rng(derive_seed(8, "cfld-magic"));
    ComplexField f = random_field(4, 4, rng);
    std::vector<uint8_t> bytes = save_cfld(f);
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(load_cfld(bytes), doctest::Contains("BadMagic"), Error);
}

TEST_CASE("cfld shorter than the header claims is rejected") {
    Rng rng(derive_seed(9, "cfld-trunc"));
    ComplexField f = random_field(6, 6, rng);
    std::vector<uint8_t> bytes = save_cfld(f);
    bytes.resize(bytes.size() - 17);
    CHECK_THROWS_WITH_AS(load_cfld(bytes), doctest::Contains("TruncatedPayload"), Error);
}

TEST_CASE("cfld rejects non-finite payload values") {
    Rng rng(derive_seed(10, "cfld-nonfinite"));
    ComplexField f = random_field(4, 4, rng);
    std::vector<uint8_t> bytes = save_cfld(f);
    const double bad = std::numeric_limits<double>::infinity();
    std::memcpy(bytes.data() + bytes.size() - 16, &bad, 8);
    CHECK_THROWS_WITH_AS(load_cfld(bytes), doctest::Contains("NonFiniteValue"), Error);
}

TEST_CASE("pnm round trip preserves layout and the linear value map") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "holo_test_field";
    fs::create_directories(dir);

    RealImage gray(7, 5, 1);
    for (size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<double>(i);
    save_pnm(gray, dir / "g.pgm");
    RealImage gback = load_pnm(dir / "g.pgm");
    CHECK(gback.width == 7);
    CHECK(gback.height == 5);
    CHECK(gback.channels == 1);
    // linear map [0,max] -> [0,65535]
    CHECK(gback.data.back() == doctest::Approx(65535.0));
    CHECK(gback.data.front() == doctest::Approx(0.0));

    RealImage rgb(4, 3, 3);
    for (size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = (i % 7) / 7.0;
    save_pnm(rgb, dir / "c.ppm");
    RealImage cback = load_pnm(dir / "c.ppm");
    CHECK(cback.channels == 3);
    CHECK(cback.width == 4);
    fs::remove_all(dir);
}
