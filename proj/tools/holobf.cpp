// holobf: synthetic holography-to-bright-field pipeline driver.
// Subcommands cover the full flow: phantom generation, hologram recording,
// digital back-propagation, virtual z-scans, registration, paired-dataset
// construction, GAN training, tiled inference, and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "holo/dataset.hpp"
#include "holo/fft.hpp"
#include "holo/field.hpp"
#include "holo/metrics.hpp"
#include "holo/net.hpp"
#include "holo/propagate.hpp"
#include "holo/registration.hpp"
#include "holo/rng.hpp"
#include "holo/sim.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace holo;
using cli::RunConfig;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", opts.seed, "seed override");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
    if (opts.seed) cfg.set("seed", std::to_string(*opts.seed));
    return cfg;
}

fs::path prepare_out(const CommonOpts& opts, const RunConfig& cfg,
                     const std::vector<fs::path>& inputs) {
    fs::path out(opts.out_dir);
    fs::create_directories(out);
    cfg.echo_to(out);
    std::vector<fs::path> manifest_inputs = inputs;
    if (!opts.config_path.empty()) manifest_inputs.insert(manifest_inputs.begin(), opts.config_path);
    cli::write_manifest(out, manifest_inputs, cfg.resolved_text());
    return out;
}

GridSpec grid_from(const RunConfig& cfg) {
    GridSpec grid;
    grid.width = grid.height = cfg.get_int("grid");
    grid.params.pixel_pitch_um = cfg.get_double("pitch_um");
    grid.params.wavelength_um = cfg.get_double("wavelength_um");
    grid.params.refractive_index = cfg.get_double("refractive_index");
    grid.params.validate();
    return grid;
}

std::vector<SpeciesSpec> default_species() {
    SpeciesSpec ragweed;  // yellow-brown, larger, strongly absorbing
    ragweed.radius_min_um = 5.0;
    ragweed.radius_max_um = 9.0;
    ragweed.amplitude_min = 0.25;
    ragweed.amplitude_max = 0.45;
    ragweed.phase_min_rad = 0.8;
    ragweed.phase_max_rad = 1.6;
    ragweed.rgb = {0.62, 0.45, 0.16};
    SpeciesSpec bermuda;  // white, smaller, weakly absorbing
    bermuda.radius_min_um = 2.5;
    bermuda.radius_max_um = 4.5;
    bermuda.amplitude_min = 0.3;
    bermuda.amplitude_max = 0.5;
    bermuda.phase_min_rad = 0.5;
    bermuda.phase_max_rad = 1.0;
    bermuda.rgb = {0.88, 0.88, 0.84};
    return {ragweed, bermuda};
}

struct ManifestEntry {
    int index = 0;
    double z_um = 0.0;
};

void write_plane_manifest(const fs::path& path, const std::vector<double>& z_list) {
    std::ofstream f(path);
    if (!f) fail_runtime("IoError", "cannot write manifest: " + path.string());
    f << "index,z_um\n";
    char buf[64];
    for (size_t i = 0; i < z_list.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, z_list[i]);
        f << buf;
    }
}

std::vector<ManifestEntry> read_plane_manifest(const fs::path& path) {
    std::ifstream f(path);
    if (!f) fail("IoError", "cannot open manifest: " + path.string());
    std::string line;
    std::getline(f, line);
    if (line != "index,z_um") fail("SchemaMismatch", "bad manifest header in " + path.string());
    std::vector<ManifestEntry> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos) fail("SchemaMismatch", "bad manifest line: " + line);
        ManifestEntry e;
        e.index = std::stoi(line.substr(0, comma));
        e.z_um = std::stod(line.substr(comma + 1));
        out.push_back(e);
    }
    if (out.empty()) fail("SchemaMismatch", "empty manifest: " + path.string());
    return out;
}

std::string plane_name(const char* prefix, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03d.%s", prefix, index, ext);
    return buf;
}

std::vector<double> z_range(double start, double step, int count) {
    require(count >= 1, "BadZList", "z count must be >= 1");
    require(step > 0.0, "BadZList", "z step must be > 0");
    std::vector<double> z(count);
    for (int i = 0; i < count; ++i) z[i] = start + i * step;
    return z;
}

RealImage load_target_ppm(const fs::path& path) {
    RealImage raw = load_pnm(path);
    require(raw.channels == 3, "BadDims", "expected a 3-channel PPM: " + path.string());
    for (double& v : raw.data) v /= 65535.0;
    return raw;
}

// ---- subcommand bodies ----

int run_phantom(const CommonOpts& common, int particles_override) {
    RunConfig cfg = resolve_config(common);
    if (particles_override > 0) cfg.set("particles", std::to_string(particles_override));
    const fs::path out = prepare_out(common, cfg, {});
    GridSpec grid = grid_from(cfg);
    PhantomSpec phantom = random_phantom(cfg.get_u64("seed"), cfg.get_int("particles"),
                                         default_species(), grid, cfg.get_double("margin_um"),
                                         cfg.get_double("z_min_um"), cfg.get_double("z_max_um"));
    phantom.validate(grid.fov_w_um(), grid.fov_h_um());
    save_phantom(phantom, out / "phantom.txt");
    std::cout << "wrote " << (out / "phantom.txt").string() << " (" << phantom.particles.size()
              << " particles)\n";
    return 0;
}

int run_record(const CommonOpts& common, const std::string& phantom_path, double bf_start,
               double bf_step, int bf_count) {
    RunConfig cfg = resolve_config(common);
    const fs::path out = prepare_out(common, cfg, {phantom_path});
    GridSpec grid = grid_from(cfg);
    PhantomSpec phantom = load_phantom(phantom_path);
    SensorSpec sensor;
    sensor.bit_depth = cfg.get_int("bit_depth");
    sensor.read_noise_std = cfg.get_double("read_noise");
    sensor.seed = cfg.get_u64("seed");
    RealImage holo_img = record_hologram(phantom, sensor, cfg.get_double("z2_um"), grid);
    save_pnm(holo_img, out / "hologram.pgm");
    std::cout << "wrote " << (out / "hologram.pgm").string() << "\n";

    if (bf_count > 0) {
        BrightfieldSpec bf;
        bf.numerical_aperture = cfg.get_double("na");
        bf.z_positions_um = z_range(bf_start, bf_step, bf_count);
        ZStack stack = render_stack(phantom, bf, grid);
        for (size_t i = 0; i < stack.planes.size(); ++i)
            save_pnm(stack.planes[i], out / plane_name("bf", static_cast<int>(i), "ppm"));
        write_plane_manifest(out / "bf_manifest.csv", stack.z_positions_um);
        std::cout << "wrote " << stack.planes.size() << " bright-field planes\n";
    }
    return 0;
}

int run_backprop(const CommonOpts& common, const std::string& holo_path, double z) {
    RunConfig cfg = resolve_config(common);
    const fs::path out = prepare_out(common, cfg, {holo_path});
    GridSpec grid = grid_from(cfg);
    RealImage holo_img = load_pnm(holo_path);
    require(holo_img.channels == 1, "BadDims", "hologram must be single-channel");
    ComplexField field = back_propagate(holo_img, z, grid.params);
    save_cfld_file(field, out / "field.cfld");
    save_pnm(amplitude(field), out / "amplitude.pgm");
    std::cout << "wrote " << (out / "field.cfld").string() << "\n";
    return 0;
}

int run_zscan(const CommonOpts& common, const std::string& holo_path, double z_start, double z_step,
              int z_count) {
    RunConfig cfg = resolve_config(common);
    const fs::path out = prepare_out(common, cfg, {holo_path});
    GridSpec grid = grid_from(cfg);
    RealImage holo_img = load_pnm(holo_path);
    require(holo_img.channels == 1, "BadDims", "hologram must be single-channel");
    const std::vector<double> z_list = z_range(z_start, z_step, z_count);
    std::vector<ComplexField> fields = zscan(holo_img, z_list, grid.params);
    for (size_t i = 0; i < fields.size(); ++i)
        save_cfld_file(fields[i], out / plane_name("plane", static_cast<int>(i), "cfld"));
    write_plane_manifest(out / "zscan_manifest.csv", z_list);
    std::cout << "wrote " << fields.size() << " planes\n";
    return 0;
}

// pairs bf planes (sample z) with bp planes (back-propagation distance from
// the sensor): matching when |z2 - d - z_focus| <= 0.25 um
std::vector<std::pair<ManifestEntry, ManifestEntry>> pair_planes(
    const std::vector<ManifestEntry>& bp, const std::vector<ManifestEntry>& bf, double z2_um) {
    std::vector<std::pair<ManifestEntry, ManifestEntry>> pairs;
    for (const auto& b : bf) {
        for (const auto& p : bp) {
            if (std::abs(z2_um - p.z_um - b.z_um) <= 0.25) {
                pairs.emplace_back(p, b);
                break;
            }
        }
    }
    return pairs;
}

int run_register(const CommonOpts& common, const std::string& bp_dir, const std::string& bf_dir) {
    RunConfig cfg = resolve_config(common);
    const fs::path out = prepare_out(common, cfg, {fs::path(bp_dir) / "zscan_manifest.csv",
                                                   fs::path(bf_dir) / "bf_manifest.csv"});
    const auto bp_entries = read_plane_manifest(fs::path(bp_dir) / "zscan_manifest.csv");
    const auto bf_entries = read_plane_manifest(fs::path(bf_dir) / "bf_manifest.csv");

    std::vector<RealImage> bp_amps;
    std::vector<double> bp_z;
    for (const auto& e : bp_entries) {
        ComplexField f = load_cfld_file(fs::path(bp_dir) / plane_name("plane", e.index, "cfld"));
        bp_amps.push_back(amplitude(f));
        bp_z.push_back(e.z_um);
    }
    ZStack bf_stack;
    for (const auto& e : bf_entries) {
        bf_stack.planes.push_back(load_target_ppm(fs::path(bf_dir) / plane_name("bf", e.index, "ppm")));
        bf_stack.z_positions_um.push_back(e.z_um);
    }
    bf_stack.validate();

    // bright-field stacks scan increasing sample z while back-propagation
    // distance decreases with sample z; flip the bp stack so both profiles
    // run in the same axial direction
    std::vector<RealImage> bp_for_axial(bp_amps.rbegin(), bp_amps.rend());
    std::vector<double> bp_axial_z;
    for (auto it = bp_z.rbegin(); it != bp_z.rend(); ++it) bp_axial_z.push_back(-*it);
    AxialMatchResult axial = axial_match(bp_for_axial, bp_axial_z, bf_stack);

    // lateral registration on the sharpest paired plane
    const auto& mid_pair = axial.pairing[axial.pairing.size() / 2];
    RealImage bp_img = registration_preprocess(bp_for_axial[mid_pair.second]);
    RealImage bf_img = registration_preprocess(extract_channel(bf_stack.planes[mid_pair.first], 1));
    ShiftResult global = phase_correlate(bf_img, bp_img);

    // block correspondences -> affine
    const int block = std::max(64, cfg.get_int("patch_size"));
    DisplacementField disp = local_refine(bf_img, bp_img, block, block / 2);
    std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>> pairs;
    for (const auto& blk : disp.blocks)
        pairs.push_back({{blk.bx + blk.dx, blk.by + blk.dy}, {blk.bx, blk.by}});
    AffineFit fit = estimate_affine(pairs);

    std::ofstream report(out / "report.csv");
    report << "stage,param,value\n";
    char buf[160];
    auto row = [&](const char* stage, const char* param, double v) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.9g\n", stage, param, v);
        report << buf;
    };
    row("axial", "z_offset_um", axial.z_offset_um);
    row("axial", "paired_planes", static_cast<double>(axial.pairing.size()));
    row("global", "dx", global.dx);
    row("global", "dy", global.dy);
    row("global", "peak", global.peak);
    row("affine", "a11", fit.transform.a11);
    row("affine", "a12", fit.transform.a12);
    row("affine", "tx", fit.transform.tx);
    row("affine", "a21", fit.transform.a21);
    row("affine", "a22", fit.transform.a22);
    row("affine", "ty", fit.transform.ty);
    row("affine", "rms", fit.rms);

    std::ofstream dispcsv(out / "displacement.csv");
    dispcsv << "bx,by,dx,dy,peak\n";
    for (const auto& blk : disp.blocks) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g\n", blk.bx, blk.by, blk.dx,
                      blk.dy, blk.peak);
        dispcsv << buf;
    }
    std::ofstream pairing(out / "pairing.csv");
    pairing << "bf_index,bp_index\n";
    for (const auto& [bf_i, bp_i] : axial.pairing)
        pairing << bf_i << "," << (static_cast<int>(bp_amps.size()) - 1 - bp_i) << "\n";
    std::cout << "axial offset " << axial.z_offset_um << " um, global shift (" << global.dx << ", "
              << global.dy << ")\n";
    return 0;
}

int run_make_dataset(const CommonOpts& common, const std::string& bp_dir, const std::string& bf_dir,
                     int patch_size, int stride) {
    RunConfig cfg = resolve_config(common);
    if (patch_size > 0) cfg.set("patch_size", std::to_string(patch_size));
    if (stride > 0) cfg.set("stride", std::to_string(stride));
    const fs::path out = prepare_out(common, cfg, {fs::path(bp_dir) / "zscan_manifest.csv",
                                                   fs::path(bf_dir) / "bf_manifest.csv"});
    const auto bp_entries = read_plane_manifest(fs::path(bp_dir) / "zscan_manifest.csv");
    const auto bf_entries = read_plane_manifest(fs::path(bf_dir) / "bf_manifest.csv");
    const auto paired = pair_planes(bp_entries, bf_entries, cfg.get_double("z2_um"));
    if (paired.empty()) fail("NoPatches", "no bp/bf plane pair shares a sample depth");

    std::vector<ComplexField> fields;
    std::vector<RealImage> targets;
    std::vector<double> z_list;
    for (const auto& [bp, bf] : paired) {
        fields.push_back(load_cfld_file(fs::path(bp_dir) / plane_name("plane", bp.index, "cfld")));
        targets.push_back(load_target_ppm(fs::path(bf_dir) / plane_name("bf", bf.index, "ppm")));
        z_list.push_back(bf.z_um);
    }
    PairedPatchSet set = extract_pairs(fields, targets, z_list, cfg.get_int("patch_size"),
                                       cfg.get_int("stride"), cfg.get_u64("seed"));
    save_dataset_file(set, out / "data.ppds");
    std::cout << "wrote " << set.patches.size() << " patches (" << set.train.size() << " train, "
              << set.val.size() << " val, " << set.test.size() << " test)\n";
    return 0;
}

TrainConfig train_config_from(const RunConfig& cfg) {
    TrainConfig tc;
    tc.lambda_l1 = cfg.get_double("lambda_l1");
    tc.lambda_adv = cfg.get_double("lambda_adv");
    tc.learning_rate = cfg.get_double("learning_rate");
    tc.batch_size = cfg.get_int("batch_size");
    tc.steps = cfg.get_int("steps");
    tc.val_interval = cfg.get_int("val_interval");
    tc.seed = cfg.get_u64("seed");
    return tc;
}

int run_train(const CommonOpts& common, const std::string& dataset_path, int steps_override) {
    RunConfig cfg = resolve_config(common);
    if (steps_override >= 0) cfg.set("steps", std::to_string(steps_override));
    const fs::path out = prepare_out(common, cfg, {dataset_path});
    PairedPatchSet ds = load_dataset_file(dataset_path);

    GeneratorConfig gcfg;
    gcfg.base_width = cfg.get_int("base_width");
    gcfg.depth = cfg.get_int("depth");
    DiscriminatorConfig dcfg;
    dcfg.base_width = cfg.get_int("base_width");
    dcfg.layers = cfg.get_int("d_layers");
    TrainConfig tcfg = train_config_from(cfg);

    Generator gen(gcfg, tcfg.seed);
    Discriminator dis(dcfg, tcfg.seed);
    TrainResult result = train(ds, gen, dis, tcfg);

    std::vector<ParamRef> all = gen.params();
    for (auto& p : dis.params()) all.push_back(p);
    save_weights(all, out / "weights.cmwt");
    std::ofstream hist(out / "history.csv");
    hist << history_csv(result.history);
    std::cout << "trained " << tcfg.steps << " steps";
    if (result.final_val_l1 >= 0.0) std::cout << ", final val L1 " << result.final_val_l1;
    std::cout << "\n";
    return 0;
}

Generator load_generator(const RunConfig& cfg, const std::string& weights_path) {
    GeneratorConfig gcfg;
    gcfg.base_width = cfg.get_int("base_width");
    gcfg.depth = cfg.get_int("depth");
    Generator gen(gcfg, cfg.get_u64("seed"));
    auto params = gen.params();
    load_weights(params, weights_path);
    return gen;
}

int run_infer(const CommonOpts& common, const std::string& weights_path, const std::string& field_path,
              const std::string& holo_path, double z, const std::string& bp_dir) {
    RunConfig cfg = resolve_config(common);
    std::vector<fs::path> inputs = {weights_path};
    if (!field_path.empty()) inputs.push_back(field_path);
    if (!holo_path.empty()) inputs.push_back(holo_path);
    const fs::path out = prepare_out(common, cfg, inputs);
    Generator gen = load_generator(cfg, weights_path);
    const int tile = cfg.get_int("tile");

    if (!bp_dir.empty()) {
        const auto entries = read_plane_manifest(fs::path(bp_dir) / "zscan_manifest.csv");
        std::vector<double> z_list;
        for (const auto& e : entries) {
            ComplexField f = load_cfld_file(fs::path(bp_dir) / plane_name("plane", e.index, "cfld"));
            RealImage rgb = infer(gen, f, tile);
            save_pnm(rgb, out / plane_name("out", e.index, "ppm"));
            z_list.push_back(e.z_um);
        }
        write_plane_manifest(out / "infer_manifest.csv", z_list);
        std::cout << "wrote " << entries.size() << " inferred planes\n";
        return 0;
    }

    ComplexField field;
    if (!field_path.empty()) {
        field = load_cfld_file(field_path);
    } else if (!holo_path.empty()) {
        GridSpec grid = grid_from(cfg);
        RealImage holo_img = load_pnm(holo_path);
        require(holo_img.channels == 1, "BadDims", "hologram must be single-channel");
        field = back_propagate(holo_img, z, grid.params);
    } else {
        fail("BadConfig", "infer needs --field, --hologram with --z, or --bp-dir");
    }
    RealImage rgb = infer(gen, field, tile);
    save_pnm(rgb, out / "output.ppm");
    std::cout << "wrote " << (out / "output.ppm").string() << "\n";
    return 0;
}

RealImage amplitude_rgb_from_patch(const PairedPatch& p) {
    RealImage img(p.size, p.size, 3);
    const size_t plane = static_cast<size_t>(p.size) * p.size;
    for (size_t i = 0; i < plane; ++i) {
        const double a = std::sqrt(p.input[i] * p.input[i] + p.input[plane + i] * p.input[plane + i]);
        const double v = std::clamp(a, 0.0, 1.0);
        img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = v;
    }
    return img;
}

RealImage target_rgb_from_patch(const PairedPatch& p) {
    RealImage img(p.size, p.size, 3);
    const size_t plane = static_cast<size_t>(p.size) * p.size;
    for (size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) img.data[3 * i + c] = p.target[c * plane + i];
    return img;
}

int run_eval(const CommonOpts& common, const std::string& weights_path,
             const std::string& dataset_path, const std::string& split) {
    RunConfig cfg = resolve_config(common);
    const fs::path out = prepare_out(common, cfg, {weights_path, dataset_path});
    PairedPatchSet ds = load_dataset_file(dataset_path);
    Generator gen = load_generator(cfg, weights_path);

    const std::vector<uint32_t>* indices = nullptr;
    if (split == "val") indices = &ds.val;
    else if (split == "test") indices = &ds.test;
    else if (split == "train") indices = &ds.train;
    else fail("BadConfig", "split must be train, val, or test");
    if (indices->empty()) fail("EmptyDataset", "selected split is empty");

    std::ofstream csv(out / "metrics.csv");
    csv << metric_csv_header();
    double ssim_out_sum = 0.0, ssim_in_sum = 0.0;
    for (uint32_t idx : *indices) {
        const PairedPatch& p = ds.patches[idx];
        RealImage target = target_rgb_from_patch(p);
        RealImage output = infer_patch(gen, p);
        RealImage input_amp = amplitude_rgb_from_patch(p);
        MetricReport out_rep = compare_images(output, target);
        MetricReport in_rep = compare_images(input_amp, target);
        csv << metric_csv_row(static_cast<int>(idx), "output", out_rep);
        csv << metric_csv_row(static_cast<int>(idx), "input", in_rep);
        ssim_out_sum += out_rep.ssim_mean;
        ssim_in_sum += in_rep.ssim_mean;
    }
    const double n = static_cast<double>(indices->size());
    std::cout << "mean SSIM: output " << ssim_out_sum / n << ", input " << ssim_in_sum / n << "\n";
    return 0;
}

int run_selftest() {
    struct Check {
        std::string name;
        bool pass;
        std::string detail;
    };
    std::vector<Check> checks;
    char buf[128];

    {
        // propagation round trip on random band-limited fields
        OpticalParams params;
        Rng rng(derive_seed(7, "selftest-fields"));
        double worst = 0.0;
        for (int trial = 0; trial < 4; ++trial) {
            ComplexField u(128, 128, params);
            for (auto& v : u.data) v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
            // band-limit to half Nyquist
            fft2(u.data, u.width, u.height);
            for (int y = 0; y < u.height; ++y)
                for (int x = 0; x < u.width; ++x) {
                    const double fx = static_cast<double>(freq_index(x, u.width)) / u.width;
                    const double fy = static_cast<double>(freq_index(y, u.height)) / u.height;
                    if (fx * fx + fy * fy > 0.25 * 0.25) u.at(x, y) = 0.0;
                }
            ifft2(u.data, u.width, u.height);
            ComplexField back = spectral_propagate(spectral_propagate(u, 100.0), -100.0);
            for (size_t i = 0; i < u.data.size(); ++i)
                worst = std::max(worst, std::abs(back.data[i] - u.data[i]));
        }
        std::snprintf(buf, sizeof(buf), "max abs err %.3g (tol 1e-9)", worst);
        checks.push_back({"propagation round trip", worst < 1e-9, buf});
    }
    {
        OpticalParams params;
        Rng rng(derive_seed(8, "selftest-energy"));
        ComplexField u(128, 128, params);
        for (auto& v : u.data) v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double e0 = field_energy(u);
        const double e1 = field_energy(spectral_propagate(u, 250.0));
        const double rel = std::abs(e1 - e0) / e0;
        std::snprintf(buf, sizeof(buf), "relative err %.3g (tol 1e-12)", rel);
        checks.push_back({"energy conservation", rel < 1e-12, buf});
    }
    {
        const double e_conv = gradient_check_conv2d(11);
        std::snprintf(buf, sizeof(buf), "max rel err %.3g (tol 1e-5)", e_conv);
        checks.push_back({"gradient check conv2d", e_conv < 1e-5, buf});
        const double e_gen = gradient_check_generator(12);
        std::snprintf(buf, sizeof(buf), "max rel err %.3g (tol 1e-4)", e_gen);
        checks.push_back({"gradient check generator", e_gen < 1e-4, buf});
    }
    {
        // registration oracle: known subpixel shift via the module's own warp
        Rng rng(derive_seed(9, "selftest-reg"));
        RealImage img(128, 128, 1);
        for (int k = 0; k < 40; ++k) {
            const double cx = rng.uniform(20, 108), cy = rng.uniform(20, 108);
            const double s = rng.uniform(2, 5), amp = rng.uniform(0.5, 1.0);
            for (int y = 0; y < 128; ++y)
                for (int x = 0; x < 128; ++x)
                    img.at(x, y) += amp * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                                                   (2 * s * s));
        }
        RealImage shifted = warp_affine(img, AffineTransform2D::translation(3.4, -2.6));
        ShiftResult s = phase_correlate(img, shifted);
        const double err = std::max(std::abs(s.dx - 3.4), std::abs(s.dy + 2.6));
        std::snprintf(buf, sizeof(buf), "max axis err %.3g px (tol 0.05)", err);
        checks.push_back({"registration subpixel oracle", err < 0.05, buf});
    }
    {
        // serialization round trip
        OpticalParams params;
        Rng rng(derive_seed(10, "selftest-serial"));
        ComplexField u(32, 16, params);
        for (auto& v : u.data) v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        ComplexField back = load_cfld(save_cfld(u));
        const bool same = back.data == u.data && back.width == u.width && back.height == u.height;
        checks.push_back({"cfld round trip", same, same ? "bit-exact" : "mismatch"});
    }

    bool all = true;
    for (const auto& c : checks) {
        std::printf("[%s] %-32s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
        all &= c.pass;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic holography-to-bright-field pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    int particles = 0;
    std::string phantom_path, holo_path, bp_dir, bf_dir, dataset_path, weights_path, field_path;
    std::string split = "val";
    double z = 0.0, z_start = 0.0, z_step = 0.5;
    int z_count = 1;
    double bf_start = 0.0, bf_step = 0.5;
    int bf_count = 0;
    int patch_size = 0, stride = 0, steps_override = -1;

    auto* c_phantom = app.add_subcommand("phantom", "generate a random phantom file");
    add_common(c_phantom, common);
    c_phantom->add_option("--particles", particles, "particle count override");

    auto* c_record = app.add_subcommand("record", "record a hologram (and bright-field stack)");
    add_common(c_record, common);
    c_record->add_option("--phantom", phantom_path, "phantom file")->required();
    c_record->add_option("--bf-z-start", bf_start, "first bright-field focus depth (um)");
    c_record->add_option("--bf-z-step", bf_step, "bright-field focus step (um)");
    c_record->add_option("--bf-z-count", bf_count, "bright-field plane count (0 = none)");

    auto* c_backprop = app.add_subcommand("backprop", "back-propagate a hologram to one depth");
    add_common(c_backprop, common);
    c_backprop->add_option("--hologram", holo_path, "hologram PGM")->required();
    c_backprop->add_option("--z", z, "back-propagation distance (um)")->required();

    auto* c_zscan = app.add_subcommand("zscan", "back-propagate a hologram to a range of depths");
    add_common(c_zscan, common);
    c_zscan->add_option("--hologram", holo_path, "hologram PGM")->required();
    c_zscan->add_option("--z-start", z_start, "first distance (um)")->required();
    c_zscan->add_option("--z-step", z_step, "distance step (um)");
    c_zscan->add_option("--z-count", z_count, "plane count")->required();

    auto* c_register = app.add_subcommand("register", "register a zscan against a bright-field stack");
    add_common(c_register, common);
    c_register->add_option("--bp-dir", bp_dir, "zscan output directory")->required();
    c_register->add_option("--bf-dir", bf_dir, "bright-field stack directory")->required();

    auto* c_dataset = app.add_subcommand("make-dataset", "build the paired patch dataset");
    add_common(c_dataset, common);
    c_dataset->add_option("--bp-dir", bp_dir, "zscan output directory")->required();
    c_dataset->add_option("--bf-dir", bf_dir, "bright-field stack directory")->required();
    c_dataset->add_option("--patch-size", patch_size, "patch size override");
    c_dataset->add_option("--stride", stride, "stride override");

    auto* c_train = app.add_subcommand("train", "train the GAN on a paired dataset");
    add_common(c_train, common);
    c_train->add_option("--dataset", dataset_path, "dataset .ppds")->required();
    c_train->add_option("--steps", steps_override, "training steps override");

    auto* c_infer = app.add_subcommand("infer", "run the generator on back-propagated fields");
    add_common(c_infer, common);
    c_infer->add_option("--weights", weights_path, "weights .cmwt")->required();
    c_infer->add_option("--field", field_path, "single field .cfld");
    c_infer->add_option("--hologram", holo_path, "hologram PGM (with --z)");
    c_infer->add_option("--z", z, "back-propagation distance for --hologram");
    c_infer->add_option("--bp-dir", bp_dir, "zscan directory for stack inference");

    auto* c_eval = app.add_subcommand("eval", "evaluate weights on a dataset split");
    add_common(c_eval, common);
    c_eval->add_option("--weights", weights_path, "weights .cmwt")->required();
    c_eval->add_option("--dataset", dataset_path, "dataset .ppds")->required();
    c_eval->add_option("--split", split, "train|val|test (default val)");

    auto* c_selftest = app.add_subcommand("selftest", "run built-in verification checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_phantom->parsed()) return run_phantom(common, particles);
        if (c_record->parsed()) return run_record(common, phantom_path, bf_start, bf_step, bf_count);
        if (c_backprop->parsed()) return run_backprop(common, holo_path, z);
        if (c_zscan->parsed()) return run_zscan(common, holo_path, z_start, z_step, z_count);
        if (c_register->parsed()) return run_register(common, bp_dir, bf_dir);
        if (c_dataset->parsed()) return run_make_dataset(common, bp_dir, bf_dir, patch_size, stride);
        if (c_train->parsed()) return run_train(common, dataset_path, steps_override);
        if (c_infer->parsed())
            return run_infer(common, weights_path, field_path, holo_path, z, bp_dir);
        if (c_eval->parsed()) return run_eval(common, weights_path, dataset_path, split);
        if (c_selftest->parsed()) return run_selftest();
    } catch (const Error& e) {
        std::cerr << "ERROR: " << e.what() << "\n";  // what() is "<code>: <msg>"
        return e.kind() == Error::Kind::Validation ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "ERROR: Internal: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
