#ifndef TEXTSR_COMMON_HPP
#define TEXTSR_COMMON_HPP

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace textsr {

// Error taxonomy. Every failure surfaced by the library derives from Error so
// the CLI can map categories to exit codes (config=2, stage-order=3, data=4).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error        { using Error::Error; };
struct DomainError : Error       { using Error::Error; };
struct IndexError : Error        { using Error::Error; };
struct UnknownGlyph : Error      { using Error::Error; };
struct ParseError : Error        { using Error::Error; };
struct EmptyPool : Error         { using Error::Error; };
struct MissingScore : Error      { using Error::Error; };
struct InsufficientPool : Error  { using Error::Error; };
struct ControlShapeError : Error { using Error::Error; };
struct SegmentationError : Error { using Error::Error; };
struct NumericalError : Error    { using Error::Error; };
struct StageOrderError : Error   { using Error::Error; };
struct StageMisuse : Error       { using Error::Error; };
struct ConfigError : Error       { using Error::Error; };
struct DataError : Error         { using Error::Error; };

// FNV-1a 64-bit, used for stable name-derived RNG streams and weight hashes.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; i--) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// UTF-8 <-> codepoints. Transcripts are UTF-8 strings; edit distance, glyph
// lookup and length filters all operate on codepoints.
inline std::vector<uint32_t> utf8_decode(const std::string& s) {
    std::vector<uint32_t> out;
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        uint32_t cp  = 0;
        int extra = 0;
        if (c < 0x80) {
            cp = c;
        } else if ((c >> 5) == 0x6) {
            cp = c & 0x1f; extra = 1;
        } else if ((c >> 4) == 0xe) {
            cp = c & 0x0f; extra = 2;
        } else if ((c >> 3) == 0x1e) {
            cp = c & 0x07; extra = 3;
        } else {
            throw ParseError("invalid UTF-8 byte at offset " + std::to_string(i));
        }
        if (i + extra >= s.size())
            throw ParseError("truncated UTF-8 sequence at offset " + std::to_string(i));
        for (int k = 1; k <= extra; k++) {
            unsigned char cc = s[i + k];
            if ((cc >> 6) != 0x2)
                throw ParseError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
            cp = (cp << 6) | (cc & 0x3f);
        }
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

inline std::string utf8_encode(const std::vector<uint32_t>& cps) {
    std::string s;
    for (uint32_t cp : cps) {
        if (cp < 0x80) {
            s += static_cast<char>(cp);
        } else if (cp < 0x800) {
            s += static_cast<char>(0xc0 | (cp >> 6));
            s += static_cast<char>(0x80 | (cp & 0x3f));
        } else if (cp < 0x10000) {
            s += static_cast<char>(0xe0 | (cp >> 12));
            s += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            s += static_cast<char>(0x80 | (cp & 0x3f));
        } else {
            s += static_cast<char>(0xf0 | (cp >> 18));
            s += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
            s += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            s += static_cast<char>(0x80 | (cp & 0x3f));
        }
    }
    return s;
}

inline std::string utf8_encode(uint32_t cp) {
    return utf8_encode(std::vector<uint32_t>{cp});
}

}  // namespace textsr

#endif  // TEXTSR_COMMON_HPP
