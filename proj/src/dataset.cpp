#include "holo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "holo/rng.hpp"

namespace holo {

namespace {

bool is_background_patch(const RealImage& bf, int x0, int y0, int size) {
    size_t background = 0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            bool all_bright = true;
            for (int c = 0; c < bf.channels; ++c)
                all_bright &= bf.at(x0 + x, y0 + y, c) > 0.98;
            background += all_bright;
        }
    }
    return background >= static_cast<size_t>(std::ceil(0.99 * size * size));
}

}  // namespace

PairedPatchSet extract_pairs(const std::vector<ComplexField>& bp_fields,
                             const std::vector<RealImage>& bf_planes,
                             const std::vector<double>& z_um, int patch_size, int stride,
                             uint64_t seed) {
    require(bp_fields.size() == bf_planes.size() && bp_fields.size() == z_um.size(), "BadDims",
            "plane lists must have equal length");
    require(!bp_fields.empty(), "NoPatches", "no source planes");
    require(patch_size >= 2, "BadParams", "patch_size must be >= 2");
    require(stride >= 1, "BadParams", "stride must be >= 1");

    PairedPatchSet set;
    set.seed = seed;
    Rng drop_rng(derive_seed(seed, "background-drop"));

    for (size_t plane = 0; plane < bp_fields.size(); ++plane) {
        const ComplexField& f = bp_fields[plane];
        const RealImage& bf = bf_planes[plane];
        require(f.width == bf.width && f.height == bf.height, "BadDims",
                "field and image dimensions must match");
        require(bf.channels == 3, "BadDims", "targets must be 3-channel");
        require(patch_size <= f.width && patch_size <= f.height, "NoPatches",
                "patch_size exceeds the plane size");
        for (int y0 = 0; y0 + patch_size <= f.height; y0 += stride) {
            for (int x0 = 0; x0 + patch_size <= f.width; x0 += stride) {
                if (is_background_patch(bf, x0, y0, patch_size)) {
                    if (drop_rng.uniform01() < 0.9) continue;
                }
                PairedPatch p;
                p.size = patch_size;
                p.source_id = static_cast<int>(plane);
                p.z_um = z_um[plane];
                p.crop_x = x0;
                p.crop_y = y0;
                p.input.resize(2ull * patch_size * patch_size);
                p.target.resize(3ull * patch_size * patch_size);
                const size_t ps2 = static_cast<size_t>(patch_size) * patch_size;
                for (int y = 0; y < patch_size; ++y) {
                    for (int x = 0; x < patch_size; ++x) {
                        const cplx v = f.at(x0 + x, y0 + y);
                        const size_t i = static_cast<size_t>(y) * patch_size + x;
                        p.input[i] = v.real();
                        p.input[ps2 + i] = v.imag();
                        for (int c = 0; c < 3; ++c)
                            p.target[c * ps2 + i] = bf.at(x0 + x, y0 + y, c);
                    }
                }
                set.patches.push_back(std::move(p));
            }
        }
    }
    if (set.patches.empty()) fail("NoPatches", "all candidate patches were dropped or none fit");

    // seeded shuffle, then 80/10/10
    std::vector<uint32_t> order(set.patches.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    Rng split_rng(derive_seed(seed, "split-shuffle"));
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[split_rng.below(i)]);
    const size_t n = order.size();
    const size_t n_train = static_cast<size_t>(0.8 * static_cast<double>(n));
    const size_t n_val = static_cast<size_t>(0.1 * static_cast<double>(n));
    set.train.assign(order.begin(), order.begin() + n_train);
    set.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    set.test.assign(order.begin() + n_train + n_val, order.end());
    return set;
}

namespace {

// maps output pixel (x, y) to source pixel for the dihedral element `code`
void dihedral_src(int code, int size, int x, int y, int& sx, int& sy) {
    // inverse rotation first (output <- source), then mirror
    switch (code & 3) {
        case 0: sx = x; sy = y; break;
        case 1: sx = y; sy = size - 1 - x; break;            // 90 deg CCW
        case 2: sx = size - 1 - x; sy = size - 1 - y; break; // 180 deg
        default: sx = size - 1 - y; sy = x; break;           // 270 deg CCW
    }
    if (code & 4) sx = size - 1 - sx;  // horizontal mirror applied before rotation
}

}  // namespace

PairedPatch augment(const PairedPatch& p, int code) {
    if (code < 0 || code >= 8) fail("BadCode", "augment code must be in [0,8)");
    if (code == 0) return p;
    PairedPatch out = p;
    const int s = p.size;
    const size_t ps2 = static_cast<size_t>(s) * s;
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            int sx, sy;
            dihedral_src(code, s, x, y, sx, sy);
            const size_t di = static_cast<size_t>(y) * s + x;
            const size_t si = static_cast<size_t>(sy) * s + sx;
            for (int c = 0; c < 2; ++c) out.input[c * ps2 + di] = p.input[c * ps2 + si];
            for (int c = 0; c < 3; ++c) out.target[c * ps2 + di] = p.target[c * ps2 + si];
        }
    }
    return out;
}

int inverse_augment_code(int code) {
    if (code < 0 || code >= 8) fail("BadCode", "augment code must be in [0,8)");
    if (code & 4) return code;            // mirrored elements are involutions
    return (4 - (code & 3)) & 3;          // pure rotation: inverse rotation
}

namespace {

constexpr char kPpdsMagic[4] = {'P', 'P', 'D', 'S'};
constexpr uint32_t kPpdsVersion = 1;

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
    uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(const std::vector<uint8_t>& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) fail("TruncatedPayload", "unexpected end of data");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

void put_doubles(std::vector<uint8_t>& out, const std::vector<double>& v) {
    const size_t start = out.size();
    out.resize(start + v.size() * 8);
    std::memcpy(out.data() + start, v.data(), v.size() * 8);
}

}  // namespace

std::vector<uint8_t> save_dataset(const PairedPatchSet& set) {
    require(!set.patches.empty(), "BadDims", "cannot save an empty dataset");
    const int s = set.patches.front().size;
    for (const auto& p : set.patches)
        require(p.size == s, "BadDims", "all patches must share patch_size");

    std::vector<uint8_t> out;
    out.insert(out.end(), kPpdsMagic, kPpdsMagic + 4);
    put<uint32_t>(out, kPpdsVersion);
    put<uint32_t>(out, static_cast<uint32_t>(set.patches.size()));
    put<uint32_t>(out, static_cast<uint32_t>(s));
    for (const auto& p : set.patches) {
        put<double>(out, p.z_um);
        put<uint32_t>(out, static_cast<uint32_t>(p.crop_x));
        put<uint32_t>(out, static_cast<uint32_t>(p.crop_y));
        put_doubles(out, p.input);
        put_doubles(out, p.target);
    }
    for (const auto* split : {&set.train, &set.val, &set.test}) {
        put<uint32_t>(out, static_cast<uint32_t>(split->size()));
        for (uint32_t idx : *split) put<uint32_t>(out, idx);
    }
    return out;
}

PairedPatchSet load_dataset(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kPpdsMagic, 4) != 0)
        fail("BadMagic", "not a PPDS file");
    size_t pos = 4;
    const uint32_t version = get<uint32_t>(bytes, pos);
    if (version != kPpdsVersion) fail("SchemaMismatch", "unsupported PPDS version");
    const uint32_t count = get<uint32_t>(bytes, pos);
    const uint32_t patch_size = get<uint32_t>(bytes, pos);
    require(count > 0 && patch_size >= 2, "SchemaMismatch", "bad PPDS header");

    PairedPatchSet set;
    const size_t ps2 = static_cast<size_t>(patch_size) * patch_size;
    for (uint32_t i = 0; i < count; ++i) {
        PairedPatch p;
        p.size = static_cast<int>(patch_size);
        p.z_um = get<double>(bytes, pos);
        p.crop_x = static_cast<int>(get<uint32_t>(bytes, pos));
        p.crop_y = static_cast<int>(get<uint32_t>(bytes, pos));
        if (pos + (2 + 3) * ps2 * 8 > bytes.size())
            fail("TruncatedPayload", "PPDS payload shorter than header claims");
        p.input.resize(2 * ps2);
        std::memcpy(p.input.data(), bytes.data() + pos, 2 * ps2 * 8);
        pos += 2 * ps2 * 8;
        p.target.resize(3 * ps2);
        std::memcpy(p.target.data(), bytes.data() + pos, 3 * ps2 * 8);
        pos += 3 * ps2 * 8;
        set.patches.push_back(std::move(p));
    }
    for (auto* split : {&set.train, &set.val, &set.test}) {
        const uint32_t len = get<uint32_t>(bytes, pos);
        split->resize(len);
        for (uint32_t i = 0; i < len; ++i) {
            (*split)[i] = get<uint32_t>(bytes, pos);
            require((*split)[i] < count, "SchemaMismatch", "split index out of range");
        }
    }
    return set;
}

void save_dataset_file(const PairedPatchSet& set, const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = save_dataset(set);
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_runtime("IoError", "cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail_runtime("IoError", "write failed: " + path.string());
}

PairedPatchSet load_dataset_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("IoError", "cannot open: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return load_dataset(bytes);
}

}  // namespace holo
