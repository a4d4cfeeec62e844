#include "nops/container.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

namespace nops {

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) buf.push_back(static_cast<char>((v >> s) & 0xff));
}

class Reader {
  public:
    Reader(const std::string& bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size())
            throw ContainerError(ContainerError::Cause::Truncated,
                                 std::string("container: truncated while reading ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int s = 0; s < 2; ++s) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * s);
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * s);
        return v;
    }
    std::string raw(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const char* cursor() const { return bytes_.data() + pos_; }
    void skip(std::size_t n) { pos_ += n; }

  private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_container(const std::string& path, const std::vector<ContainerEntry>& entries,
                     const std::string& metadata) {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.name).second)
            throw ContainerError(ContainerError::Cause::DuplicateName,
                                 "container: duplicate entry name '" + e.name + "'");
        if (e.name.size() > 0xffff)
            throw ContainerError(ContainerError::Cause::BadEntry,
                                 "container: entry name too long: '" + e.name + "'");
        if (!e.array.all_finite())
            throw ContainerError(ContainerError::Cause::BadEntry,
                                 "container: non-finite values in entry '" + e.name + "'");
    }

    std::string buf;
    buf += "NODS";
    put_u32(buf, kContainerVersion);
    put_u32(buf, static_cast<std::uint32_t>(metadata.size()));
    buf += metadata;
    put_u32(buf, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_u16(buf, static_cast<std::uint16_t>(e.name.size()));
        buf += e.name;
        buf.push_back(static_cast<char>(e.array.shape.size()));
        for (int d : e.array.shape) put_u32(buf, static_cast<std::uint32_t>(d));
        buf.push_back(0);  // dtype: float64 LE
        const std::size_t bytes = e.array.data.size() * sizeof(double);
        const std::size_t off = buf.size();
        buf.resize(off + bytes);
        std::memcpy(buf.data() + off, e.array.data.data(), bytes);
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ContainerError(ContainerError::Cause::Io, "container: cannot open " + tmp);
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) throw ContainerError(ContainerError::Cause::Io, "container: write failed on " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw ContainerError(ContainerError::Cause::Io,
                             "container: rename to " + path + " failed: " + ec.message());
}

Container read_container(const std::string& path) {
    std::string bytes;
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ContainerError(ContainerError::Cause::Io, "container: cannot open " + path);
        bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }

    Reader r(bytes);
    if (r.raw(4, "magic") != "NODS")
        throw ContainerError(ContainerError::Cause::BadMagic, "container: bad magic in " + path);
    const std::uint32_t version = r.u32("version");
    if (version != kContainerVersion)
        throw ContainerError(ContainerError::Cause::VersionMismatch,
                             "container: unsupported version " + std::to_string(version));

    Container c;
    const std::uint32_t meta_len = r.u32("metadata length");
    c.metadata = r.raw(meta_len, "metadata");
    const std::uint32_t count = r.u32("entry count");
    std::set<std::string> seen;
    for (std::uint32_t e = 0; e < count; ++e) {
        ContainerEntry entry;
        const std::uint16_t name_len = r.u16("entry name length");
        entry.name = r.raw(name_len, "entry name");
        if (!seen.insert(entry.name).second)
            throw ContainerError(ContainerError::Cause::DuplicateName,
                                 "container: duplicate entry name '" + entry.name + "'");
        const std::uint8_t ndim = r.u8("ndim");
        std::vector<int> shape;
        std::size_t n = 1;
        for (int d = 0; d < ndim; ++d) {
            const std::uint32_t dim = r.u32("dim");
            if (dim == 0)
                throw ContainerError(ContainerError::Cause::BadEntry,
                                     "container: zero dimension in entry '" + entry.name + "'");
            shape.push_back(static_cast<int>(dim));
            n *= dim;
        }
        const std::uint8_t dtype = r.u8("dtype");
        if (dtype != 0)
            throw ContainerError(ContainerError::Cause::BadEntry,
                                 "container: unsupported dtype " + std::to_string(dtype));
        r.need(n * sizeof(double), "payload");
        std::vector<double> data(n);
        std::memcpy(data.data(), r.cursor(), n * sizeof(double));
        r.skip(n * sizeof(double));
        entry.array = DenseArray::from_external(std::move(shape), std::move(data));
        c.entries.push_back(std::move(entry));
    }
    if (r.remaining() != 0)
        throw ContainerError(ContainerError::Cause::BadEntry,
                             "container: trailing bytes after last entry");
    return c;
}

std::string format_metadata(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += ": ";
        out += v;
        out += "\n";
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_metadata(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = line.substr(0, colon);
        std::string val = line.substr(colon + 1);
        if (!val.empty() && val.front() == ' ') val.erase(val.begin());
        kv.emplace_back(std::move(key), std::move(val));
    }
    return kv;
}

std::string metadata_get(const std::vector<std::pair<std::string, std::string>>& kv,
                         const std::string& key) {
    for (const auto& [k, v] : kv)
        if (k == key) return v;
    throw data_error("metadata: missing key '" + key + "'");
}

bool metadata_has(const std::vector<std::pair<std::string, std::string>>& kv,
                  const std::string& key) {
    for (const auto& [k, v] : kv)
        if (k == key) return true;
    return false;
}

}  // namespace nops
