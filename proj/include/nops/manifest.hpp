#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace nops {

/// Reproducibility record written next to every command's outputs: the
/// command, the fully resolved configuration, seeds, input/output paths with
/// content hashes, format versions and the wall clock.
class RunManifest {
  public:
    explicit RunManifest(std::string command);

    void add(const std::string& key, const std::string& value);
    void add_input(const std::string& path);   // records path + content hash
    void add_output(const std::string& path);
    void write(const std::string& path) const;

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// FNV-1a 64-bit content hash, hex-encoded.
std::uint64_t fnv1a_bytes(const void* data, std::size_t n);
std::string content_hash_hex(const std::string& file_path);

}  // namespace nops
