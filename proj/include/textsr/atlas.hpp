#ifndef TEXTSR_ATLAS_HPP
#define TEXTSR_ATLAS_HPP

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace textsr {

enum class Group { ChineseProxy, EnglishProxy, Digit };

inline std::string to_string(Group g) {
    switch (g) {
        case Group::ChineseProxy: return "chinese-proxy";
        case Group::EnglishProxy: return "english-proxy";
        default: return "digit";
    }
}

inline Group group_from_string(const std::string& s) {
    if (s == "chinese-proxy") return Group::ChineseProxy;
    if (s == "english-proxy") return Group::EnglishProxy;
    if (s == "digit") return Group::Digit;
    throw ParseError("unknown group: " + s);
}

// Monospace glyph atlas: binary bitmaps of identical cell size, one per
// codepoint, plus the ordered charset.
class GlyphAtlas {
public:
    GlyphAtlas(int64_t cell_h, int64_t cell_w) : cell_h_(cell_h), cell_w_(cell_w) {}

    int64_t cell_h() const { return cell_h_; }
    int64_t cell_w() const { return cell_w_; }
    const std::vector<uint32_t>& charset() const { return charset_; }

    void add_glyph(uint32_t cp, Tensor<uint8_t> bitmap) {
        if (bitmap.ndim() != 2 || bitmap.size(0) != cell_h_ || bitmap.size(1) != cell_w_)
            throw ShapeError("glyph bitmap must be (" + std::to_string(cell_h_) + "," +
                             std::to_string(cell_w_) + ")");
        if (glyphs_.count(cp))
            throw DomainError("duplicate charset entry: U+" + hex64(cp).substr(12));
        charset_.push_back(cp);
        glyphs_[cp] = std::move(bitmap);
    }

    bool has(uint32_t cp) const { return glyphs_.count(cp) > 0; }

    const Tensor<uint8_t>& glyph(uint32_t cp) const {
        auto it = glyphs_.find(cp);
        if (it == glyphs_.end())
            throw UnknownGlyph("no glyph for character '" + utf8_encode(cp) + "'");
        return it->second;
    }

    // Transcript-level group: any CJK-proxy char wins, digits-only is Digit.
    static Group classify(const std::vector<uint32_t>& cps) {
        bool all_digit = true;
        for (uint32_t cp : cps) {
            if (cp >= 0x4E00) return Group::ChineseProxy;
            if (cp < '0' || cp > '9') all_digit = false;
        }
        return all_digit ? Group::Digit : Group::EnglishProxy;
    }

    std::vector<uint32_t> charset_of_group(Group g) const {
        std::vector<uint32_t> out;
        for (uint32_t cp : charset_) {
            std::vector<uint32_t> one{cp};
            if (classify(one) == g) out.push_back(cp);
        }
        return out;
    }

    void save(const std::string& path) const {
        nlohmann::json j;
        j["format"] = "textsr-atlas";
        j["version"] = 1;
        j["cell_h"] = cell_h_;
        j["cell_w"] = cell_w_;
        auto& arr = j["glyphs"] = nlohmann::json::array();
        for (uint32_t cp : charset_) {
            nlohmann::json g;
            g["cp"] = cp;
            std::vector<std::string> rows;
            const auto& bm = glyphs_.at(cp);
            for (int64_t r = 0; r < cell_h_; r++) {
                std::string row(cell_w_, '0');
                for (int64_t c = 0; c < cell_w_; c++)
                    if (bm[r * cell_w_ + c]) row[c] = '1';
                rows.push_back(row);
            }
            g["rows"] = rows;
            arr.push_back(g);
        }
        std::ofstream f(path);
        if (!f) throw DataError("cannot write atlas to " + path);
        f << j.dump(1) << "\n";
    }

    static GlyphAtlas load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw DataError("cannot read atlas from " + path);
        nlohmann::json j;
        try {
            f >> j;
        } catch (const std::exception& e) {
            throw ParseError(std::string("atlas parse failure: ") + e.what());
        }
        if (j.value("format", "") != "textsr-atlas")
            throw ParseError("not a textsr atlas file: " + path);
        GlyphAtlas atlas(j.at("cell_h").get<int64_t>(), j.at("cell_w").get<int64_t>());
        for (const auto& g : j.at("glyphs")) {
            uint32_t cp = g.at("cp").get<uint32_t>();
            Tensor<uint8_t> bm({atlas.cell_h_, atlas.cell_w_});
            const auto& rows = g.at("rows");
            if (static_cast<int64_t>(rows.size()) != atlas.cell_h_)
                throw ParseError("glyph row count mismatch in " + path);
            for (int64_t r = 0; r < atlas.cell_h_; r++) {
                const std::string row = rows[r].get<std::string>();
                if (static_cast<int64_t>(row.size()) != atlas.cell_w_)
                    throw ParseError("glyph row width mismatch in " + path);
                for (int64_t c = 0; c < atlas.cell_w_; c++)
                    bm[r * atlas.cell_w_ + c] = row[c] == '1' ? 1 : 0;
            }
            atlas.add_glyph(cp, std::move(bm));
        }
        return atlas;
    }

private:
    int64_t cell_h_, cell_w_;
    std::vector<uint32_t> charset_;
    std::map<uint32_t, Tensor<uint8_t>> glyphs_;
};

namespace detail {

// Classic 5x7 monospace face for digits and uppercase letters, rows as
// 5-bit masks (bit 4 = leftmost column).
inline const uint8_t* font5x7(uint32_t cp) {
    static const uint8_t digits[10][7] = {
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
        {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
        {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
        {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
        {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
    };
    static const uint8_t letters[26][7] = {
        {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // A
        {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // B
        {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // C
        {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},  // D
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // E
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // F
        {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // G
        {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // H
        {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // I
        {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // J
        {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11},  // K
        {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},  // L
        {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},  // M
        {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},  // N
        {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // O
        {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},  // P
        {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D},  // Q
        {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},  // R
        {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E},  // S
        {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},  // T
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // U
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},  // V
        {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A},  // W
        {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},  // X
        {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04},  // Y
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},  // Z
    };
    if (cp >= '0' && cp <= '9') return digits[cp - '0'];
    if (cp >= 'A' && cp <= 'Z') return letters[cp - 'A'];
    return nullptr;
}

// Dense multi-stroke proxy glyph, deterministic per codepoint. Strokes are
// 2 px thick on a coarse lattice so stroke topology survives moderate
// degradation but breaks under severe blur, like real dense scripts.
inline Tensor<uint8_t> proxy_glyph(uint32_t cp, int64_t cell_h, int64_t cell_w) {
    Tensor<uint8_t> bm({cell_h, cell_w});
    const int64_t gw = 14, gh = 22;              // glyph box
    const int64_t x0 = (cell_w - gw) / 2;
    const int64_t y0 = (cell_h - gh) / 2;
    Rng rng = Rng::derive(0x9C7E, {cp});
    auto hline = [&](int64_t y, int64_t xa, int64_t xb) {
        for (int64_t t = 0; t < 2; t++)
            for (int64_t x = xa; x <= xb; x++)
                if (y + t < gh && x < gw) bm[(y0 + y + t) * cell_w + x0 + x] = 1;
    };
    auto vline = [&](int64_t x, int64_t ya, int64_t yb) {
        for (int64_t t = 0; t < 2; t++)
            for (int64_t y = ya; y <= yb; y++)
                if (x + t < gw && y < gh) bm[(y0 + y) * cell_w + x0 + x + t] = 1;
    };
    const int64_t rows[] = {0, 4, 8, 12, 16, 20};
    const int64_t cols[] = {0, 4, 8, 12};
    int nh = 2 + static_cast<int>(rng.uniform_int(0, 2));
    for (int i = 0; i < nh; i++) {
        int64_t y = rows[rng.uniform_int(0, 5)];
        int64_t a = rng.uniform_int(0, 1), b = rng.uniform_int(2, 3);
        hline(y, cols[a], cols[b] + 1);
    }
    int nv = 2 + static_cast<int>(rng.uniform_int(0, 1));
    for (int i = 0; i < nv; i++) {
        int64_t x = cols[rng.uniform_int(0, 3)];
        int64_t a = rng.uniform_int(0, 2), b = rng.uniform_int(3, 5);
        vline(x, rows[a], rows[b] + 1);
    }
    if (rng.uniform() < 0.45) {  // enclosure
        int64_t ra = rng.uniform_int(0, 1), rb = rng.uniform_int(3, 5);
        hline(rows[ra], 0, gw - 1);
        hline(rows[rb], 0, gw - 1);
        vline(0, rows[ra], rows[rb] + 1);
        vline(gw - 2, rows[ra], rows[rb] + 1);
    }
    return bm;
}

}  // namespace detail

// Bundled atlas: 32x16 cells, digits + A-Z from the 5x7 face scaled x3,
// plus 40 procedural dense glyphs at U+4E00..U+4E27.
inline GlyphAtlas builtin_atlas(int64_t cell_h = 32, int64_t cell_w = 16) {
    GlyphAtlas atlas(cell_h, cell_w);
    const int64_t scale = 3;
    const int64_t gx = (cell_w - 5 * scale) / 2;
    const int64_t gy = (cell_h - 7 * scale) / 2;
    auto add_font_glyph = [&](uint32_t cp) {
        const uint8_t* rows = detail::font5x7(cp);
        Tensor<uint8_t> bm({cell_h, cell_w});
        for (int64_t r = 0; r < 7; r++)
            for (int64_t c = 0; c < 5; c++)
                if (rows[r] & (1 << (4 - c)))
                    for (int64_t dy = 0; dy < scale; dy++)
                        for (int64_t dx = 0; dx < scale; dx++)
                            bm[(gy + r * scale + dy) * cell_w + gx + c * scale + dx] = 1;
        atlas.add_glyph(cp, std::move(bm));
    };
    for (uint32_t cp = '0'; cp <= '9'; cp++) add_font_glyph(cp);
    for (uint32_t cp = 'A'; cp <= 'Z'; cp++) add_font_glyph(cp);
    for (uint32_t cp = 0x4E00; cp < 0x4E28; cp++)
        atlas.add_glyph(cp, detail::proxy_glyph(cp, cell_h, cell_w));
    return atlas;
}

}  // namespace textsr

#endif  // TEXTSR_ATLAS_HPP
