#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "holo/propagate.hpp"
#include "holo/rng.hpp"
#include "holo/sim.hpp"

using namespace holo;

namespace {

GridSpec small_grid(int n = 128) {
    GridSpec g;
    g.width = g.height = n;
    return g;
}

Particle make_particle(double x, double y, double z, double r, double a, double phi) {
    Particle p;
    p.x_um = x;
    p.y_um = y;
    p.z_um = z;
    p.radius_um = r;
    p.amplitude = a;
    p.phase_rad = phi;
    return p;
}

}  // namespace

TEST_CASE("build_object_plane with no particles is the unit field") {
    PhantomSpec spec;
    ComplexField f = build_object_plane(spec, 10.0, small_grid());
    for (const auto& v : f.data) CHECK(v == cplx(1.0, 0.0));
}

TEST_CASE("an opaque zero-phase disk is 0 inside, 1 outside, smooth at the edge") {
    GridSpec grid = small_grid();
    PhantomSpec spec;
    spec.particles.push_back(make_particle(70.0, 70.0, 50.0, 10.0, 0.0, 0.0));
    ComplexField f = build_object_plane(spec, 50.0, grid);
    const double pitch = grid.params.pixel_pitch_um;
    int inside = 0, outside = 0, edge = 0;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const double dx = (x + 0.5) * pitch - 70.0;
            const double dy = (y + 0.5) * pitch - 70.0;
            const double r = std::sqrt(dx * dx + dy * dy);
            const double v = f.at(x, y).real();
            CHECK(f.at(x, y).imag() == 0.0);
            if (r < 10.0 - pitch) {
                CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
                ++inside;
            } else if (r > 10.0 + pitch) {
                CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
                ++outside;
            } else {
                CHECK(v >= -1e-12);
                CHECK(v <= 1.0 + 1e-12);
                ++edge;
            }
        }
    CHECK(inside > 100);
    CHECK(outside > 1000);
    CHECK(edge > 10);
}

TEST_CASE("disjoint particles multiply like per-particle planes") {
    GridSpec grid = small_grid();
    PhantomSpec both, only_a, only_b;
    Particle a = make_particle(40.0, 40.0, 50.0, 6.0, 0.3, 0.9);
    Particle b = make_particle(100.0, 95.0, 50.0, 5.0, 0.6, 0.4);
    both.particles = {a, b};
    only_a.particles = {a};
    only_b.particles = {b};
    ComplexField fab = build_object_plane(both, 50.0, grid);
    ComplexField fa = build_object_plane(only_a, 50.0, grid);
    ComplexField fb = build_object_plane(only_b, 50.0, grid);
    for (size_t i = 0; i < fab.data.size(); ++i) {
        const cplx prod = fa.data[i] * fb.data[i];
        CHECK(std::abs(fab.data[i] - prod) < 1e-12);
    }
}

TEST_CASE("particles only affect planes within a quarter micron window") {
    GridSpec grid = small_grid();
    PhantomSpec spec;
    spec.particles.push_back(make_particle(70.0, 70.0, 50.0, 8.0, 0.2, 0.0));
    ComplexField near = build_object_plane(spec, 50.2, grid);
    ComplexField far = build_object_plane(spec, 51.0, grid);
    bool near_has_content = false;
    for (const auto& v : near.data) near_has_content |= std::abs(v - cplx(1.0, 0.0)) > 0.1;
    CHECK(near_has_content);
    for (const auto& v : far.data) CHECK(v == cplx(1.0, 0.0));
}

TEST_CASE("record_hologram of an empty phantom with no noise is exactly constant") {
    GridSpec grid = small_grid(64);
    PhantomSpec spec;
    SensorSpec sensor;
    sensor.read_noise_std = 0.0;
    RealImage img = record_hologram(spec, sensor, 400.0, grid);
    const double v0 = img.data[0];
    for (double v : img.data) CHECK(v == v0);
}

TEST_CASE("record_hologram matches the forward propagation oracle") {
    GridSpec grid = small_grid();
    PhantomSpec spec;
    spec.particles.push_back(make_particle(70.0, 72.0, 100.0, 5.0, 0.4, 0.8));
    SensorSpec sensor;
    sensor.read_noise_std = 0.0;
    sensor.bit_depth = 16;
    const double z2 = 400.0;
    RealImage recorded = record_hologram(spec, sensor, z2, grid);

    // oracle: object plane -> propagate to the sensor -> intensity -> same quantization
    ComplexField u = build_object_plane(spec, 100.0, grid);
    RealImage oracle = intensity(propagate(u, z2 - 100.0));
    const double levels = 65535.0;
    const double mean = image_mean(oracle);
    for (double& v : oracle.data) v = std::clamp(std::round(v / mean * levels / 2.0), 0.0, levels);
    CHECK(recorded.data == oracle.data);
}

TEST_CASE("a single weak scatterer records concentric fringes around its center") {
    GridSpec grid = small_grid(256);
    const double cx = 140.0, cy = 150.0;
    PhantomSpec spec;
    spec.particles.push_back(make_particle(cx, cy, 100.0, 4.0, 0.5, 0.6));
    SensorSpec sensor;
    sensor.read_noise_std = 0.0;
    sensor.bit_depth = 16;
    RealImage img = record_hologram(spec, sensor, 400.0, grid);

    // fringe energy centers on the particle
    const double mean = image_mean(img);
    double wx = 0.0, wy = 0.0, wsum = 0.0;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const double w = std::abs(img.at(x, y) - mean);
            wx += w * (x + 0.5) * grid.params.pixel_pitch_um;
            wy += w * (y + 0.5) * grid.params.pixel_pitch_um;
            wsum += w;
        }
    CHECK(std::abs(wx / wsum - cx) < 3.0);
    CHECK(std::abs(wy / wsum - cy) < 3.0);

    // radial profile oscillates around the background level
    const int bins = 40;
    std::vector<double> radial(bins, 0.0);
    std::vector<int> counts(bins, 0);
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const double dx = (x + 0.5) * grid.params.pixel_pitch_um - cx;
            const double dy = (y + 0.5) * grid.params.pixel_pitch_um - cy;
            const int bin = static_cast<int>(std::sqrt(dx * dx + dy * dy) / 2.0);
            if (bin < bins) {
                radial[bin] += img.at(x, y);
                counts[bin]++;
            }
        }
    int sign_changes = 0;
    double prev = 0.0;
    bool have_prev = false;
    for (int b = 0; b < bins; ++b) {
        if (!counts[b]) continue;
        const double dev = radial[b] / counts[b] - mean;
        if (have_prev && dev * prev < 0.0) ++sign_changes;
        if (std::abs(dev) > 1e-6) {
            prev = dev;
            have_prev = true;
        }
    }
    CHECK(sign_changes >= 3);
}

TEST_CASE("one-bit quantization leaves at most two distinct values") {
    GridSpec grid = small_grid(64);
    PhantomSpec spec;
    spec.particles.push_back(make_particle(35.0, 35.0, 20.0, 5.0, 0.3, 0.5));
    SensorSpec sensor;
    sensor.bit_depth = 1;
    sensor.read_noise_std = 0.05;
    RealImage img = record_hologram(spec, sensor, 60.0, grid);
    std::set<double> values(img.data.begin(), img.data.end());
    CHECK(values.size() <= 2);
}

TEST_CASE("record_hologram rejects particles beyond the sensor") {
    GridSpec grid = small_grid(64);
    PhantomSpec spec;
    spec.particles.push_back(make_particle(35.0, 35.0, 500.0, 5.0, 0.3, 0.5));
    SensorSpec sensor;
    CHECK_THROWS_WITH_AS(record_hologram(spec, sensor, 400.0, grid),
                         doctest::Contains("BadGeometry"), Error);
}

TEST_CASE("incoherent_psf sums to one at any defocus") {
    GridSpec grid = small_grid();
    BrightfieldSpec bf;
    for (double defocus : {0.0, 5.0, 40.0}) {
        RealImage psf = incoherent_psf(bf, defocus, grid);
        double sum = 0.0;
        for (double v : psf.data) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("in-focus psf peaks at the center and defocus lowers the peak") {
    GridSpec grid = small_grid();
    BrightfieldSpec bf;
    RealImage sharp = incoherent_psf(bf, 0.0, grid);
    double mx = 0.0;
    int mx_x = -1, mx_y = -1;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x)
            if (sharp.at(x, y) > mx) {
                mx = sharp.at(x, y);
                mx_x = x;
                mx_y = y;
            }
    CHECK(mx_x == grid.width / 2);
    CHECK(mx_y == grid.height / 2);
    RealImage blurred = incoherent_psf(bf, 5.0, grid);
    double mx_blur = 0.0;
    for (double v : blurred.data) mx_blur = std::max(mx_blur, v);
    CHECK(mx_blur < mx);
}

TEST_CASE("render_brightfield of an empty phantom is white") {
    GridSpec grid = small_grid(64);
    PhantomSpec spec;
    BrightfieldSpec bf;
    RealImage img = render_brightfield(spec, bf, 0.0, grid);
    CHECK(img.channels == 3);
    for (double v : img.data) CHECK(v == 1.0);
}

TEST_CASE("white-colored particles attenuate all channels identically") {
    GridSpec grid = small_grid();
    PhantomSpec spec;
    Particle p = make_particle(70.0, 70.0, 30.0, 8.0, 0.0, 0.0);
    p.rgb = {1.0, 1.0, 1.0};
    spec.particles.push_back(p);
    BrightfieldSpec bf;
    RealImage img = render_brightfield(spec, bf, 30.0, grid);
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            CHECK(img.at(x, y, 0) == img.at(x, y, 1));
            CHECK(img.at(x, y, 1) == img.at(x, y, 2));
        }
}

TEST_CASE("defocus softens the rendered particle edge") {
    GridSpec grid = small_grid();
    PhantomSpec spec;
    Particle p = make_particle(70.0, 70.0, 60.0, 8.0, 0.1, 0.0);
    p.rgb = {0.3, 0.5, 0.7};
    spec.particles.push_back(p);
    BrightfieldSpec bf;
    RealImage in_focus = render_brightfield(spec, bf, 60.0, grid);
    RealImage defocused = render_brightfield(spec, bf, 20.0, grid);  // 40 um out of focus
    CHECK(focus_metric(extract_channel(in_focus, 1)) >
          focus_metric(extract_channel(defocused, 1)));
}

TEST_CASE("render_brightfield is linear in absorbance where unclamped") {
    GridSpec grid = small_grid();
    PhantomSpec weak, strong;
    Particle p = make_particle(70.0, 70.0, 30.0, 8.0, 0.9, 0.0);  // 1-a = 0.1
    p.rgb = {0.0, 0.0, 0.0};
    weak.particles.push_back(p);
    p.amplitude = 0.8;  // 1-a = 0.2: doubled absorbance
    strong.particles.push_back(p);
    BrightfieldSpec bf;
    RealImage iw = render_brightfield(weak, bf, 30.0, grid);
    RealImage is = render_brightfield(strong, bf, 30.0, grid);
    for (size_t i = 0; i < iw.data.size(); ++i) {
        const double att_w = 1.0 - iw.data[i];
        const double att_s = 1.0 - is.data[i];
        if (att_s < 0.99)  // unclamped
            CHECK(att_s == doctest::Approx(2.0 * att_w).epsilon(1e-9));
    }
}

TEST_CASE("render_stack produces ordered planes and validates order") {
    GridSpec grid = small_grid(64);
    PhantomSpec spec;
    spec.particles.push_back(make_particle(35.0, 35.0, 10.0, 4.0, 0.4, 0.2));
    BrightfieldSpec bf;
    bf.z_positions_um = {8.0, 8.5, 9.0};
    ZStack stack = render_stack(spec, bf, grid);
    CHECK(stack.planes.size() == 3);
    CHECK(stack.z_positions_um[1] == 8.5);

    bf.z_positions_um = {9.0, 8.0};
    CHECK_THROWS_WITH_AS(render_stack(spec, bf, grid), doctest::Contains("BadZList"), Error);

    bf.z_positions_um = {12.0};
    ZStack single = render_stack(spec, bf, grid);
    CHECK(single.planes.size() == 1);
}

TEST_CASE("render_stack supports the 81-plane half-micron geometry") {
    GridSpec grid = small_grid(32);
    PhantomSpec spec;
    spec.particles.push_back(make_particle(18.0, 18.0, 20.0, 3.0, 0.4, 0.2));
    BrightfieldSpec bf;
    for (int i = 0; i < 81; ++i) bf.z_positions_um.push_back(i * 0.5);
    ZStack stack = render_stack(spec, bf, grid);
    CHECK(stack.planes.size() == 81);
}

TEST_CASE("phantom text format round trips") {
    GridSpec grid = small_grid();
    PhantomSpec spec = random_phantom(99, 12, {SpeciesSpec{}}, grid, 15.0, 20.0, 80.0);
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "holo_test_sim";
    fs::create_directories(dir);
    save_phantom(spec, dir / "p.txt");
    PhantomSpec back = load_phantom(dir / "p.txt");
    REQUIRE(back.particles.size() == spec.particles.size());
    for (size_t i = 0; i < spec.particles.size(); ++i) {
        CHECK(back.particles[i].x_um == spec.particles[i].x_um);
        CHECK(back.particles[i].z_um == spec.particles[i].z_um);
        CHECK(back.particles[i].amplitude == spec.particles[i].amplitude);
        CHECK(back.particles[i].rgb == spec.particles[i].rgb);
    }
    fs::remove_all(dir);
}

TEST_CASE("load_phantom rejects a missing header") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "holo_test_sim2";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "bad.txt");
        f << "NOT A PHANTOM\n1,2,3,4,5,6,7,8,9\n";
    }
    CHECK_THROWS_WITH_AS(load_phantom(dir / "bad.txt"), doctest::Contains("BadMagic"), Error);
    fs::remove_all(dir);
}

TEST_CASE("random_phantom is deterministic and respects bounds") {
    GridSpec grid = small_grid();
    auto species = std::vector<SpeciesSpec>{SpeciesSpec{}};
    PhantomSpec a = random_phantom(7, 20, species, grid, 12.0, 30.0, 60.0);
    PhantomSpec b = random_phantom(7, 20, species, grid, 12.0, 30.0, 60.0);
    REQUIRE(a.particles.size() == 20);
    for (size_t i = 0; i < 20; ++i) {
        CHECK(a.particles[i].x_um == b.particles[i].x_um);
        CHECK(a.particles[i].z_um == b.particles[i].z_um);
        CHECK(a.particles[i].z_um >= 30.0);
        CHECK(a.particles[i].z_um <= 60.0);
    }
    a.validate(grid.fov_w_um(), grid.fov_h_um());
}

TEST_CASE("coherent back-propagation carries fringes the incoherent render lacks") {
    // two particles separated axially; std in an annulus around the in-focus
    // one is much larger in the coherent amplitude than in the bright field
    GridSpec grid = small_grid(256);
    const double ax = 140.0, ay = 143.0, az = 100.0;
    PhantomSpec spec;
    spec.particles.push_back(make_particle(ax, ay, az, 6.0, 0.35, 1.0));
    Particle b = make_particle(165.0, 140.0, 160.0, 7.0, 0.35, 1.0);
    b.rgb = {0.6, 0.45, 0.2};
    spec.particles.push_back(b);

    SensorSpec sensor;
    sensor.read_noise_std = 0.0;
    sensor.bit_depth = 12;
    const double z2 = 400.0;
    RealImage holo_img = record_hologram(spec, sensor, z2, grid);
    ComplexField bp = back_propagate(holo_img, z2 - az, grid.params);
    RealImage bp_amp = amplitude(bp);

    BrightfieldSpec bf;
    RealImage bf_img = extract_channel(render_brightfield(spec, bf, az, grid), 1);

    auto annulus_std = [&](const RealImage& img) {
        double sum = 0.0, sum2 = 0.0;
        int count = 0;
        for (int y = 0; y < grid.height; ++y)
            for (int x = 0; x < grid.width; ++x) {
                const double dx = (x + 0.5) * grid.params.pixel_pitch_um - ax;
                const double dy = (y + 0.5) * grid.params.pixel_pitch_um - ay;
                const double r = std::sqrt(dx * dx + dy * dy);
                if (r < 9.0 || r > 26.0) continue;
                sum += img.at(x, y);
                sum2 += img.at(x, y) * img.at(x, y);
                ++count;
            }
        const double mean = sum / count;
        return std::sqrt(std::max(0.0, sum2 / count - mean * mean));
    };
    CHECK(annulus_std(bp_amp) >= 2.0 * annulus_std(bf_img));
}
