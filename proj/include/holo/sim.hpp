#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "holo/field.hpp"
#include "holo/propagate.hpp"

namespace holo {

// One spherical-ish absorber/phase-shifter in the synthetic sample volume.
struct Particle {
    double x_um = 0.0;
    double y_um = 0.0;
    double z_um = 0.0;                       // depth; the sensor sits at z2 > z
    double radius_um = 1.0;
    double amplitude = 1.0;                  // amplitude transmittance in [0,1]
    double phase_rad = 0.0;                  // phase delay across the particle
    std::array<double, 3> rgb = {1.0, 1.0, 1.0};  // body color in [0,1]
};

struct PhantomSpec {
    std::vector<Particle> particles;
    double volume_thickness_um = 0.0;
    uint64_t seed = 0;

    void validate(double fov_w_um, double fov_h_um) const;
};

struct SensorSpec {
    int bit_depth = 10;
    double read_noise_std = 0.0;  // fraction of full scale
    uint64_t seed = 0;

    void validate() const;
};

struct BrightfieldSpec {
    double numerical_aperture = 0.75;
    std::vector<double> z_positions_um;  // strictly increasing focus planes
};

// Sampling grid shared by hologram and bright-field renders.
struct GridSpec {
    int width = 512;
    int height = 512;
    OpticalParams params;

    double fov_w_um() const { return width * params.pixel_pitch_um; }
    double fov_h_um() const { return height * params.pixel_pitch_um; }
};

// Complex transmission of the object plane at z_um: particles within
// +-0.25 um contribute (1 - (1-a)*disk) * exp(i*phi*disk), where disk is a
// raised-cosine indicator with a one-pixel edge. No particles -> unit field.
ComplexField build_object_plane(const PhantomSpec& spec, double z_um, const GridSpec& grid);

// Occupied object planes: particle depths snapped to a 0.5 um grid, sorted.
std::vector<double> occupied_planes(const PhantomSpec& spec);

// Coherent forward model: unit plane wave through the ordered object planes,
// propagated to the sensor at z2_um, recorded as intensity with Gaussian
// read noise, quantized to bit_depth counts (background at mid-scale).
RealImage record_hologram(const PhantomSpec& spec, const SensorSpec& sensor, double z2_um,
                          const GridSpec& grid);

// Incoherent PSF |IDFT(pupil)|^2 normalized to unit sum, returned centered.
// pupil = indicator(f <= NA/lambda) * exp(i*2*pi*defocus*sqrt((n/lambda)^2 - f^2)).
RealImage incoherent_psf(const BrightfieldSpec& bf, double defocus_um, const GridSpec& grid);

// Linear-absorbance bright-field render focused at z_focus_um:
// per channel, image = 1 - sum over particles of absorbance_c * (PSF * disk),
// absorbance_c = (1-a)*(1-rgb[c]); clamped to [0,1]. Intensities add, so the
// result is fringe-free by construction.
RealImage render_brightfield(const PhantomSpec& spec, const BrightfieldSpec& bf, double z_focus_um,
                             const GridSpec& grid);

// One render_brightfield per bf.z_positions_um entry.
ZStack render_stack(const PhantomSpec& spec, const BrightfieldSpec& bf, const GridSpec& grid);

// Particle species used by the random phantom generator.
struct SpeciesSpec {
    double radius_min_um = 3.0;
    double radius_max_um = 6.0;
    double amplitude_min = 0.4;
    double amplitude_max = 0.7;
    double phase_min_rad = 0.3;
    double phase_max_rad = 1.2;
    std::array<double, 3> rgb = {1.0, 1.0, 1.0};
};

// Seeded generator: `count` particles with species drawn uniformly, lateral
// positions inside the FOV with the given margin, depths in [z_min, z_max].
PhantomSpec random_phantom(uint64_t seed, int count, const std::vector<SpeciesSpec>& species,
                           const GridSpec& grid, double margin_um, double z_min_um, double z_max_um);

// Line-oriented text format: "PHANTOM v1" header, one particle per line
// "x_um,y_um,z_um,r_um,a,phi,R,G,B".
void save_phantom(const PhantomSpec& spec, const std::filesystem::path& path);
PhantomSpec load_phantom(const std::filesystem::path& path);

}  // namespace holo
