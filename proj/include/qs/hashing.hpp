#ifndef QS_HASHING_HPP
#define QS_HASHING_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

namespace qs {

// FNV-1a 64-bit; used for artifact hashes and store integrity checksums.
class Fnv1a64 {
public:
    void update(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001B3ULL;
        }
    }

    void update(const std::string& s) { update(s.data(), s.size()); }

    uint64_t digest() const { return h_; }

private:
    uint64_t h_ = 0xCBF29CE484222325ULL;
};

inline uint64_t hash_bytes(const void* data, size_t n) {
    Fnv1a64 h;
    h.update(data, n);
    return h.digest();
}

inline uint64_t hash_string(const std::string& s) {
    return hash_bytes(s.data(), s.size());
}

uint64_t hash_file(const std::filesystem::path& path);

std::string hash_hex(uint64_t h);

} // namespace qs

#endif // QS_HASHING_HPP
