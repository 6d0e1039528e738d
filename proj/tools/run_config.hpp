#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace holo::cli {

// Plain key=value run configuration ("#" comments, one pair per line).
// Unknown keys are rejected; flags override file values; the fully resolved
// set is echoed to the output directory.
class RunConfig {
public:
    RunConfig();  // populates defaults

    void load_file(const std::filesystem::path& path);
    void set(const std::string& key, const std::string& value);  // rejects unknown keys

    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;

    std::string resolved_text() const;  // sorted key=value lines
    void echo_to(const std::filesystem::path& out_dir) const;

private:
    std::map<std::string, std::string> values_;
};

// FNV-1a 64-bit content hash, hex-encoded.
std::string fnv1a_hex(const std::filesystem::path& file);
std::string fnv1a_hex_bytes(const std::string& content);

// manifest.txt: tool version, creation timestamp, input hashes, config hash.
void write_manifest(const std::filesystem::path& out_dir,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::string& config_text);

}  // namespace holo::cli
