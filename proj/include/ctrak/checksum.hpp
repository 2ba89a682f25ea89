#ifndef CTRAK_CHECKSUM_HPP
#define CTRAK_CHECKSUM_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace ctrak {

// CRC-64/XZ (reflected, poly 0x42F0E1EBA9EA3693). Streaming interface so file
// writers can fold records in as they go.
class Crc64 {
public:
    Crc64() { init_table(); }

    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < len; ++i)
            crc_ = table()[(crc_ ^ p[i]) & 0xff] ^ (crc_ >> 8);
    }

    std::uint64_t value() const { return ~crc_; }

    static std::uint64_t of(const void* data, std::size_t len) {
        Crc64 c;
        c.update(data, len);
        return c.value();
    }

private:
    static const std::uint64_t* table() {
        static std::uint64_t t[256];
        static bool built = [] {
            for (std::uint64_t i = 0; i < 256; ++i) {
                std::uint64_t c = i;
                for (int b = 0; b < 8; ++b)
                    c = (c & 1) ? (c >> 1) ^ 0xC96C5795D7870F42ULL : c >> 1;
                t[i] = c;
            }
            return true;
        }();
        (void)built;
        return t;
    }
    static void init_table() { table(); }

    std::uint64_t crc_ = ~0ULL;
};

// 128-bit FNV-1a style fingerprint over a canonical byte string. Identifies a
// semantic configuration; artifacts produced under different fingerprints are
// refused when consumed together.
struct Fingerprint {
    std::array<std::uint8_t, 16> bytes{};

    bool operator==(const Fingerprint& o) const { return bytes == o.bytes; }
    bool operator!=(const Fingerprint& o) const { return bytes != o.bytes; }

    bool is_zero() const {
        for (auto b : bytes)
            if (b) return false;
        return true;
    }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string s;
        s.reserve(32);
        for (auto b : bytes) {
            s.push_back(digits[b >> 4]);
            s.push_back(digits[b & 0xf]);
        }
        return s;
    }
};

inline std::uint64_t hash_mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

inline Fingerprint fingerprint_of(const std::string& canonical) {
    // Two decorrelated 64-bit FNV-1a lanes.
    std::uint64_t h1 = 0xcbf29ce484222325ULL;
    std::uint64_t h2 = 0x84222325cbf29ce4ULL;
    for (unsigned char c : canonical) {
        h1 = (h1 ^ c) * 0x100000001b3ULL;
        h2 = (h2 ^ (c + 0x9eULL)) * 0x100000001b3ULL;
    }
    h1 = hash_mix(h1);
    h2 = hash_mix(h2 ^ h1);
    Fingerprint fp;
    for (int i = 0; i < 8; ++i) {
        fp.bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(h1 >> (8 * i));
        fp.bytes[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>(h2 >> (8 * i));
    }
    return fp;
}

}  // namespace ctrak

#endif
