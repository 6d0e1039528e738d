#include "run_config.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "holo/error.hpp"

namespace holo::cli {

RunConfig::RunConfig() {
    values_ = {
        {"grid", "512"},
        {"pitch_um", "1.12"},
        {"wavelength_um", "0.85"},
        {"refractive_index", "1.0"},
        {"z2_um", "500"},
        {"na", "0.75"},
        {"bit_depth", "10"},
        {"read_noise", "0.002"},
        {"seed", "1234"},
        {"particles", "30"},
        {"margin_um", "24"},
        {"z_min_um", "80"},
        {"z_max_um", "120"},
        {"patch_size", "64"},
        {"stride", "32"},
        {"steps", "2000"},
        {"batch_size", "4"},
        {"learning_rate", "1e-4"},
        {"lambda_l1", "100"},
        {"lambda_adv", "1"},
        {"base_width", "16"},
        {"depth", "3"},
        {"d_layers", "3"},
        {"val_interval", "100"},
        {"tile", "64"},
    };
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) fail("IoError", "cannot open config: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail("BadConfig", "line " + std::to_string(lineno) + " is not key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const size_t ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        const size_t vb = value.find_first_not_of(" \t");
        value = vb == std::string::npos ? "" : value.substr(vb);
        set(key, value);
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) fail("BadConfig", "unknown config key: " + key);
    it->second = value;
}

const std::string& RunConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail("BadConfig", "unknown config key: " + key);
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    try {
        return std::stod(get_string(key));
    } catch (const std::exception&) {
        fail("BadConfig", "config key " + key + " is not a number");
    }
}

int RunConfig::get_int(const std::string& key) const {
    try {
        return std::stoi(get_string(key));
    } catch (const std::exception&) {
        fail("BadConfig", "config key " + key + " is not an integer");
    }
}

uint64_t RunConfig::get_u64(const std::string& key) const {
    try {
        return std::stoull(get_string(key));
    } catch (const std::exception&) {
        fail("BadConfig", "config key " + key + " is not an unsigned integer");
    }
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
    return out.str();
}

void RunConfig::echo_to(const std::filesystem::path& out_dir) const {
    std::ofstream f(out_dir / "config.resolved");
    if (!f) fail_runtime("IoError", "cannot write resolved config");
    f << resolved_text();
}

static uint64_t fnv1a(const uint8_t* data, size_t len, uint64_t h = 1469598103934665603ull) {
    for (size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string fnv1a_hex_bytes(const std::string& content) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a(reinterpret_cast<const uint8_t*>(content.data()), content.size())));
    return buf;
}

std::string fnv1a_hex(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) fail("IoError", "cannot open for hashing: " + file.string());
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a_hex_bytes(content);
}

void write_manifest(const std::filesystem::path& out_dir,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::string& config_text) {
    std::ofstream f(out_dir / "manifest.txt");
    if (!f) fail_runtime("IoError", "cannot write manifest");
    f << "tool=holobf 1.0\n";
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    f << "created=" << stamp << "\n";
    f << "config_hash=" << fnv1a_hex_bytes(config_text) << "\n";
    for (const auto& in : inputs) f << "input " << in.string() << " fnv64=" << fnv1a_hex(in) << "\n";
}

}  // namespace holo::cli
