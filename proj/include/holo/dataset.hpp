#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "holo/field.hpp"

namespace holo {

// One aligned training pair. input holds the (re, im) planes of the
// back-propagated field, target the RGB bright-field patch, both stored
// channel-planar (c, y, x) at size SxS.
struct PairedPatch {
    int size = 0;
    int source_id = 0;  // in-memory provenance, not serialized
    double z_um = 0.0;
    int crop_x = 0;
    int crop_y = 0;
    std::vector<double> input;   // 2*S*S
    std::vector<double> target;  // 3*S*S, values in [0,1]
};

struct PairedPatchSet {
    std::vector<PairedPatch> patches;
    std::vector<uint32_t> train, val, test;  // disjoint index lists covering all patches
    uint64_t seed = 0;
};

// Raster-order crops at the given stride from registered (field, image)
// plane pairs. Patches whose target is >= 99% background (all channels
// > 0.98) are dropped with probability 0.9 (seeded); the survivors are
// split 80/10/10 by a seeded shuffle.
PairedPatchSet extract_pairs(const std::vector<ComplexField>& bp_fields,
                             const std::vector<RealImage>& bf_planes,
                             const std::vector<double>& z_um, int patch_size, int stride,
                             uint64_t seed);

// Dihedral-group augmentation: bit 2 mirrors horizontally, bits 0-1 rotate by
// 90 deg steps, applied identically to input and target. Code 0 is identity.
PairedPatch augment(const PairedPatch& p, int code);
int inverse_augment_code(int code);

// .ppds container, bit-exact round trip. Little-endian layout:
// "PPDS" | version u32=1 | count u32 | patch_size u32 |
// per patch: z_um f64, crop_x u32, crop_y u32, input 2*S^2 f64, target 3*S^2 f64 |
// three (length u32, u32 indices) arrays: train, val, test.
std::vector<uint8_t> save_dataset(const PairedPatchSet& set);
PairedPatchSet load_dataset(const std::vector<uint8_t>& bytes);
void save_dataset_file(const PairedPatchSet& set, const std::filesystem::path& path);
PairedPatchSet load_dataset_file(const std::filesystem::path& path);

}  // namespace holo
