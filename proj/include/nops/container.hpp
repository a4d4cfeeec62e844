#pragma once

#include <string>
#include <vector>

#include "nops/array.hpp"

namespace nops {

/// "NODS" binary container: magic (4 bytes), version u32 LE, metadata length
/// u32 LE + UTF-8 text, entry count u32 LE; per entry: name length u16 LE +
/// name, ndim u8, dims u32 LE each, dtype u8 (0 = float64 LE), raw row-major
/// payload. Writes are atomic (temp file + rename); round trips are bit-exact.
inline constexpr std::uint32_t kContainerVersion = 1;

struct ContainerEntry {
    std::string name;
    DenseArray array;
};

struct Container {
    std::string metadata;
    std::vector<ContainerEntry> entries;

    const ContainerEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

class ContainerError : public Error {
  public:
    enum class Cause { BadMagic, VersionMismatch, Truncated, DuplicateName, BadEntry, Io };

    ContainerError(Cause cause, const std::string& msg)
        : Error(ErrorKind::Data, msg), cause_(cause) {}
    Cause cause() const { return cause_; }

  private:
    Cause cause_;
};

void write_container(const std::string& path, const std::vector<ContainerEntry>& entries,
                     const std::string& metadata);

Container read_container(const std::string& path);

/// key: value lines used throughout metadata blocks. Writing preserves
/// insertion order; parsing splits on the first ':' and trims one leading
/// space of the value.
std::string format_metadata(const std::vector<std::pair<std::string, std::string>>& kv);
std::vector<std::pair<std::string, std::string>> parse_metadata(const std::string& text);
std::string metadata_get(const std::vector<std::pair<std::string, std::string>>& kv,
                         const std::string& key);
bool metadata_has(const std::vector<std::pair<std::string, std::string>>& kv,
                  const std::string& key);

}  // namespace nops
