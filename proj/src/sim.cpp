#include "holo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "holo/fft.hpp"
#include "holo/rng.hpp"

namespace holo {

namespace {

constexpr double kPlaneBin = 0.5;      // axial grouping of particles into planes (um)
constexpr double kPlaneWindow = 0.25;  // particles within +-this of a plane belong to it

double snap_plane(double z) { return std::round(z / kPlaneBin) * kPlaneBin; }

}  // namespace

void PhantomSpec::validate(double fov_w_um, double fov_h_um) const {
    for (const Particle& p : particles) {
        require(p.radius_um > 0.0, "BadPhantom", "particle radius must be > 0");
        require(p.amplitude >= 0.0 && p.amplitude <= 1.0, "BadPhantom",
                "amplitude transmittance must be in [0,1]");
        require(p.x_um - p.radius_um >= 0.0 && p.x_um + p.radius_um <= fov_w_um &&
                    p.y_um - p.radius_um >= 0.0 && p.y_um + p.radius_um <= fov_h_um,
                "BadPhantom", "particle outside the lateral field of view");
        for (double c : p.rgb)
            require(c >= 0.0 && c <= 1.0, "BadPhantom", "rgb components must be in [0,1]");
    }
}

void SensorSpec::validate() const {
    require(bit_depth >= 1 && bit_depth <= 16, "BadParams", "bit_depth must be in [1,16]");
    require(read_noise_std >= 0.0, "BadParams", "read_noise_std must be >= 0");
}

// Raised-cosine disk indicator: 1 inside, 0 outside, one-pixel smooth edge.
static double disk_value(double r_um, double radius_um, double pitch_um) {
    const double inner = radius_um - 0.5 * pitch_um;
    const double outer = radius_um + 0.5 * pitch_um;
    if (r_um <= inner) return 1.0;
    if (r_um >= outer) return 0.0;
    return 0.5 * (1.0 + std::cos(M_PI * (r_um - inner) / pitch_um));
}

ComplexField build_object_plane(const PhantomSpec& spec, double z_um, const GridSpec& grid) {
    grid.params.validate();
    ComplexField field(grid.width, grid.height, grid.params, cplx(1.0, 0.0));
    const double pitch = grid.params.pixel_pitch_um;
    for (const Particle& p : spec.particles) {
        if (std::abs(p.z_um - z_um) > kPlaneWindow) continue;
        // only touch the particle's bounding box
        const double outer = p.radius_um + pitch;
        const int x0 = std::max(0, static_cast<int>(std::floor((p.x_um - outer) / pitch)));
        const int x1 = std::min(grid.width - 1, static_cast<int>(std::ceil((p.x_um + outer) / pitch)));
        const int y0 = std::max(0, static_cast<int>(std::floor((p.y_um - outer) / pitch)));
        const int y1 = std::min(grid.height - 1, static_cast<int>(std::ceil((p.y_um + outer) / pitch)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x + 0.5) * pitch - p.x_um;
                const double dy = (y + 0.5) * pitch - p.y_um;
                const double d = disk_value(std::sqrt(dx * dx + dy * dy), p.radius_um, pitch);
                if (d <= 0.0) continue;
                const cplx t = (1.0 - (1.0 - p.amplitude) * d) *
                               cplx(std::cos(p.phase_rad * d), std::sin(p.phase_rad * d));
                field.at(x, y) *= t;
            }
        }
    }
    return field;
}

std::vector<double> occupied_planes(const PhantomSpec& spec) {
    std::set<double> planes;
    for (const Particle& p : spec.particles) planes.insert(snap_plane(p.z_um));
    return {planes.begin(), planes.end()};
}

RealImage record_hologram(const PhantomSpec& spec, const SensorSpec& sensor, double z2_um,
                          const GridSpec& grid) {
    require(z2_um > 0.0, "BadGeometry", "sample-to-sensor distance must be > 0");
    sensor.validate();
    spec.validate(grid.fov_w_um(), grid.fov_h_um());
    for (const Particle& p : spec.particles)
        require(p.z_um < z2_um, "BadGeometry", "particle depth exceeds the sensor distance");

    ComplexField u(grid.width, grid.height, grid.params, cplx(1.0, 0.0));
    const std::vector<double> planes = occupied_planes(spec);
    double z = planes.empty() ? 0.0 : planes.front();
    for (size_t k = 0; k < planes.size(); ++k) {
        ComplexField t = build_object_plane(spec, planes[k], grid);
        for (size_t i = 0; i < u.data.size(); ++i) u.data[i] *= t.data[i];
        const double z_next = (k + 1 < planes.size()) ? planes[k + 1] : z2_um;
        u = propagate(u, z_next - planes[k]);
        z = z_next;
    }
    (void)z;

    RealImage img = intensity(u);
    const double levels = static_cast<double>((1u << sensor.bit_depth) - 1u);
    const double mid = levels / 2.0;
    const double mean = image_mean(img);
    require(mean > 0.0, "ZeroBackground", "recorded intensity has zero mean");
    Rng rng(derive_seed(sensor.seed, "sensor-noise"));
    for (double& v : img.data) {
        double counts = v / mean * mid;
        if (sensor.read_noise_std > 0.0) counts += sensor.read_noise_std * levels * rng.normal();
        v = std::clamp(std::round(counts), 0.0, levels);
    }
    return img;
}

namespace {

// PSF in wraparound layout (peak at index 0), unit sum.
RealImage incoherent_psf_wrap(const BrightfieldSpec& bf, double defocus_um, const GridSpec& grid) {
    grid.params.validate();
    require(bf.numerical_aperture > 0.0 && bf.numerical_aperture < grid.params.refractive_index,
            "BadParams", "NA must be in (0, refractive_index)");
    const int w = grid.width, h = grid.height;
    const double lambda = grid.params.wavelength_um;
    const double n_over_lambda = grid.params.refractive_index / lambda;
    const double f_cut_sq = (bf.numerical_aperture / lambda) * (bf.numerical_aperture / lambda);
    const double dfx = 1.0 / (w * grid.params.pixel_pitch_um);
    const double dfy = 1.0 / (h * grid.params.pixel_pitch_um);

    std::vector<cplx> pupil(static_cast<size_t>(w) * h, cplx(0.0, 0.0));
    for (int iy = 0; iy < h; ++iy) {
        const double fy = freq_index(iy, h) * dfy;
        for (int ix = 0; ix < w; ++ix) {
            const double fx = freq_index(ix, w) * dfx;
            const double f_sq = fx * fx + fy * fy;
            if (f_sq > f_cut_sq) continue;
            const double kz = std::sqrt(std::max(0.0, n_over_lambda * n_over_lambda - f_sq));
            const double phase = 2.0 * M_PI * defocus_um * kz;
            pupil[static_cast<size_t>(iy) * w + ix] = cplx(std::cos(phase), std::sin(phase));
        }
    }
    ifft2(pupil, w, h);
    RealImage psf(w, h, 1);
    double sum = 0.0;
    for (size_t i = 0; i < pupil.size(); ++i) {
        psf.data[i] = std::norm(pupil[i]);
        sum += psf.data[i];
    }
    for (double& v : psf.data) v /= sum;
    return psf;
}

RealImage fftshift(const RealImage& img) {
    RealImage out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at((x + img.width / 2) % img.width, (y + img.height / 2) % img.height, c) =
                    img.at(x, y, c);
    return out;
}

}  // namespace

RealImage incoherent_psf(const BrightfieldSpec& bf, double defocus_um, const GridSpec& grid) {
    return fftshift(incoherent_psf_wrap(bf, defocus_um, grid));
}

RealImage render_brightfield(const PhantomSpec& spec, const BrightfieldSpec& bf, double z_focus_um,
                             const GridSpec& grid) {
    spec.validate(grid.fov_w_um(), grid.fov_h_um());
    const int w = grid.width, h = grid.height;
    RealImage out(w, h, 3, 1.0);
    const double pitch = grid.params.pixel_pitch_um;

    for (double plane_z : occupied_planes(spec)) {
        // absorbance-weighted disks of every particle on this plane, per channel
        std::array<std::vector<cplx>, 3> disks;
        for (auto& d : disks) d.assign(static_cast<size_t>(w) * h, cplx(0.0, 0.0));
        bool any = false;
        for (const Particle& p : spec.particles) {
            if (std::abs(p.z_um - plane_z) > kPlaneWindow) continue;
            any = true;
            const double outer = p.radius_um + pitch;
            const int x0 = std::max(0, static_cast<int>(std::floor((p.x_um - outer) / pitch)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil((p.x_um + outer) / pitch)));
            const int y0 = std::max(0, static_cast<int>(std::floor((p.y_um - outer) / pitch)));
            const int y1 = std::min(h - 1, static_cast<int>(std::ceil((p.y_um + outer) / pitch)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double dx = (x + 0.5) * pitch - p.x_um;
                    const double dy = (y + 0.5) * pitch - p.y_um;
                    const double d = disk_value(std::sqrt(dx * dx + dy * dy), p.radius_um, pitch);
                    if (d <= 0.0) continue;
                    for (int c = 0; c < 3; ++c) {
                        const double absorbance = (1.0 - p.amplitude) * (1.0 - p.rgb[c]);
                        disks[c][static_cast<size_t>(y) * w + x] += absorbance * d;
                    }
                }
            }
        }
        if (!any) continue;

        RealImage psf = incoherent_psf_wrap(bf, plane_z - z_focus_um, grid);
        std::vector<cplx> psf_f(psf.data.begin(), psf.data.end());
        fft2(psf_f, w, h);
        for (int c = 0; c < 3; ++c) {
            fft2(disks[c], w, h);
            for (size_t i = 0; i < disks[c].size(); ++i) disks[c][i] *= psf_f[i];
            ifft2(disks[c], w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.at(x, y, c) -= disks[c][static_cast<size_t>(y) * w + x].real();
        }
    }
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

ZStack render_stack(const PhantomSpec& spec, const BrightfieldSpec& bf, const GridSpec& grid) {
    require(!bf.z_positions_um.empty(), "BadZList", "render_stack requires at least one z position");
    for (size_t i = 1; i < bf.z_positions_um.size(); ++i)
        require(bf.z_positions_um[i] > bf.z_positions_um[i - 1], "BadZList",
                "z positions must be strictly increasing");
    ZStack stack;
    stack.z_positions_um = bf.z_positions_um;
    stack.planes.reserve(bf.z_positions_um.size());
    for (double z : bf.z_positions_um) stack.planes.push_back(render_brightfield(spec, bf, z, grid));
    return stack;
}

PhantomSpec random_phantom(uint64_t seed, int count, const std::vector<SpeciesSpec>& species,
                           const GridSpec& grid, double margin_um, double z_min_um, double z_max_um) {
    require(!species.empty(), "BadParams", "need at least one species");
    require(count >= 0, "BadParams", "count must be >= 0");
    PhantomSpec spec;
    spec.seed = seed;
    spec.volume_thickness_um = z_max_um - z_min_um;
    Rng rng(derive_seed(seed, "phantom"));
    for (int i = 0; i < count; ++i) {
        const SpeciesSpec& s = species[rng.below(species.size())];
        Particle p;
        p.radius_um = rng.uniform(s.radius_min_um, s.radius_max_um);
        const double mx = margin_um + p.radius_um;
        p.x_um = rng.uniform(mx, grid.fov_w_um() - mx);
        p.y_um = rng.uniform(mx, grid.fov_h_um() - mx);
        p.z_um = rng.uniform(z_min_um, z_max_um);
        p.amplitude = rng.uniform(s.amplitude_min, s.amplitude_max);
        p.phase_rad = rng.uniform(s.phase_min_rad, s.phase_max_rad);
        p.rgb = s.rgb;
        spec.particles.push_back(p);
    }
    return spec;
}

void save_phantom(const PhantomSpec& spec, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) fail_runtime("IoError", "cannot open for writing: " + path.string());
    f << "PHANTOM v1\n";
    char line[512];
    for (const Particle& p : spec.particles) {
        std::snprintf(line, sizeof(line),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.x_um, p.y_um,
                      p.z_um, p.radius_um, p.amplitude, p.phase_rad, p.rgb[0], p.rgb[1], p.rgb[2]);
        f << line;
    }
    if (!f) fail_runtime("IoError", "write failed: " + path.string());
}

PhantomSpec load_phantom(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) fail("IoError", "cannot open: " + path.string());
    std::string header;
    std::getline(f, header);
    if (header != "PHANTOM v1") fail("BadMagic", "not a PHANTOM v1 file: " + path.string());
    PhantomSpec spec;
    std::string line;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        Particle p;
        double vals[9];
        std::stringstream ss(line);
        std::string tok;
        int i = 0;
        while (std::getline(ss, tok, ',') && i < 9) vals[i++] = std::stod(tok);
        if (i != 9)
            fail("SchemaMismatch",
                 "phantom line " + std::to_string(lineno) + " needs 9 comma-separated values");
        p.x_um = vals[0];
        p.y_um = vals[1];
        p.z_um = vals[2];
        p.radius_um = vals[3];
        p.amplitude = vals[4];
        p.phase_rad = vals[5];
        p.rgb = {vals[6], vals[7], vals[8]};
        spec.particles.push_back(p);
    }
    return spec;
}

}  // namespace holo
