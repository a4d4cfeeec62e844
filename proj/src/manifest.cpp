#include "nops/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "nops/container.hpp"
#include "nops/errors.hpp"

namespace nops {

RunManifest::RunManifest(std::string command) {
    entries_.emplace_back("manifest_version", "1");
    entries_.emplace_back("command", std::move(command));
    entries_.emplace_back("container_format_version", std::to_string(kContainerVersion));

    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    entries_.emplace_back("wall_clock_utc", buf);
}

void RunManifest::add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
}

void RunManifest::add_input(const std::string& path) {
    entries_.emplace_back("input", path);
    entries_.emplace_back("input_hash", content_hash_hex(path));
}

void RunManifest::add_output(const std::string& path) { entries_.emplace_back("output", path); }

void RunManifest::write(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw data_error("manifest: cannot open " + path);
    f << format_metadata(entries_);
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string content_hash_hex(const std::string& file_path) {
    std::ifstream f(file_path, std::ios::binary);
    if (!f) throw data_error("manifest: cannot hash missing file " + file_path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a_bytes(bytes.data(), bytes.size())));
    return buf;
}

}  // namespace nops
