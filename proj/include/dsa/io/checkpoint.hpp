#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/core/tensor.hpp"

namespace dsa::io {

// Self-describing binary container of named float64 arrays with shape
// headers, an embedded config text, a module-specific metadata text, and a
// trailing checksum. Round trips are bit-exact. Little-endian on every
// platform this builds for.
class Checkpoint {
public:
    static constexpr char kMagic[8] = {'D', 'S', 'A', 'C', 'H', 'K', 'P', '1'};
    static constexpr std::uint32_t kVersion = 1;

    std::string config_text;
    std::string meta_text;
    std::vector<std::pair<std::string, Tensor>> arrays;

    void add(const std::string& name, Tensor t) { arrays.emplace_back(name, std::move(t)); }

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : arrays)
            if (n == name) return &t;
        return nullptr;
    }

    const Tensor& require_array(const std::string& name) const {
        const Tensor* t = find(name);
        if (!t) throw DataError("checkpoint: missing array " + name);
        return *t;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("checkpoint: cannot open " + path.string());
        Hasher hash;
        auto put = [&](const void* data, std::size_t n) {
            out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
            hash.update(data, n);
        };
        out.write(kMagic, sizeof kMagic);
        const std::uint32_t version = kVersion;
        put(&version, sizeof version);
        put_string(put, config_text);
        put_string(put, meta_text);
        const std::uint64_t count = arrays.size();
        put(&count, sizeof count);
        for (const auto& [name, tensor] : arrays) {
            put_string(put, name);
            const std::uint32_t ndim = static_cast<std::uint32_t>(tensor.rank());
            put(&ndim, sizeof ndim);
            for (int i = 0; i < tensor.rank(); ++i) {
                const std::uint64_t dim = static_cast<std::uint64_t>(tensor.dim(i));
                put(&dim, sizeof dim);
            }
            put(tensor.data(), tensor.size() * sizeof(double));
        }
        const std::uint64_t digest = hash.value;
        out.write(reinterpret_cast<const char*>(&digest), sizeof digest);
        if (!out) throw DataError("checkpoint: write failed for " + path.string());
    }

    static Checkpoint load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("checkpoint: cannot open " + path.string());
        Reader r{in, 0, Hasher{}};

        char magic[8];
        in.read(magic, sizeof magic);
        if (in.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof magic) != 0)
            throw DataError("checkpoint: bad magic at offset 0 in " + path.string());
        r.offset = sizeof magic;

        const auto version = r.get<std::uint32_t>();
        if (version != kVersion)
            throw DataError("checkpoint: unsupported format version " + std::to_string(version));

        Checkpoint c;
        c.config_text = r.get_string();
        c.meta_text = r.get_string();
        const auto count = r.get<std::uint64_t>();
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::string name = r.get_string();
            const auto ndim = r.get<std::uint32_t>();
            if (ndim > 8) throw DataError(r.context("implausible rank"));
            std::vector<int> shape;
            std::size_t total = 1;
            for (std::uint32_t d = 0; d < ndim; ++d) {
                const auto dim = r.get<std::uint64_t>();
                if (dim == 0 || dim > (1ull << 32)) throw DataError(r.context("bad dimension"));
                shape.push_back(static_cast<int>(dim));
                total *= static_cast<std::size_t>(dim);
            }
            Tensor t(shape);
            if (t.size() != total) throw DataError(r.context("shape header inconsistency"));
            r.get_raw(t.data(), total * sizeof(double));
            c.arrays.emplace_back(name, std::move(t));
        }
        const std::uint64_t computed = r.hash.value;
        std::uint64_t stored = 0;
        in.read(reinterpret_cast<char*>(&stored), sizeof stored);
        if (in.gcount() != sizeof stored)
            throw DataError(r.context("truncated checksum"));
        if (stored != computed) throw DataError(r.context("checksum mismatch"));
        return c;
    }

private:
    struct Hasher {
        // FNV-1a, 64-bit.
        std::uint64_t value = 1469598103934665603ull;
        void update(const void* data, std::size_t n) {
            const auto* p = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < n; ++i) {
                value ^= p[i];
                value *= 1099511628211ull;
            }
        }
    };

    template <class Put>
    static void put_string(Put&& put, const std::string& s) {
        const std::uint64_t n = s.size();
        put(&n, sizeof n);
        put(s.data(), s.size());
    }

    struct Reader {
        std::ifstream& in;
        std::size_t offset;
        Hasher hash;

        std::string context(const std::string& what) const {
            return "checkpoint: " + what + " at offset " + std::to_string(offset);
        }

        void get_raw(void* dst, std::size_t n) {
            in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
            if (static_cast<std::size_t>(in.gcount()) != n)
                throw DataError(context("truncated file"));
            hash.update(dst, n);
            offset += n;
        }

        template <class T>
        T get() {
            T v;
            get_raw(&v, sizeof v);
            return v;
        }

        std::string get_string() {
            const auto n = get<std::uint64_t>();
            if (n > (1ull << 30)) throw DataError(context("implausible string length"));
            std::string s(static_cast<std::size_t>(n), '\0');
            if (n) get_raw(s.data(), static_cast<std::size_t>(n));
            return s;
        }
    };
};

}  // namespace dsa::io
