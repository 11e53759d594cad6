#ifndef TEXTSR_RENDER_HPP
#define TEXTSR_RENDER_HPP

#include <string>

#include "atlas.hpp"
#include "image.hpp"

namespace textsr {

enum class Source { Synthetic };

struct TextLineSample {
    std::string id;
    Image hq;  // (C, cell_h, len*cell_w)
    std::string transcript;
    Group group = Group::EnglishProxy;
    Source source = Source::Synthetic;
};

struct RenderStyle {
    float foreground = 0.08f;
    float background = 0.92f;
    float contrast_jitter = 0.0f;  // per-glyph uniform jitter on the ink level
    int64_t channels = 1;
    uint64_t seed = 0;
};

// Deterministic monospace rendering: width = len(transcript) * cell_w.
inline TextLineSample render_text_line(const std::string& transcript, const GlyphAtlas& atlas,
                                       const RenderStyle& style = {}) {
    std::vector<uint32_t> cps = utf8_decode(transcript);
    if (cps.empty()) throw DomainError("render_text_line: empty transcript");
    for (uint32_t cp : cps)
        if (!atlas.has(cp))
            throw UnknownGlyph("render_text_line: no glyph for character '" + utf8_encode(cp) + "'");
    int64_t H = atlas.cell_h(), W = atlas.cell_w() * static_cast<int64_t>(cps.size());
    Rng rng = Rng::derive(style.seed, "render");
    float bg = img::clamp01(style.background +
                            style.contrast_jitter * static_cast<float>(rng.uniform(-1.0, 1.0)));
    Image hq({style.channels, H, W});
    hq.fill(bg);
    for (size_t gi = 0; gi < cps.size(); gi++) {
        const auto& bm = atlas.glyph(cps[gi]);
        float fg = img::clamp01(style.foreground +
                                style.contrast_jitter * static_cast<float>(rng.uniform(-1.0, 1.0)));
        int64_t xoff = static_cast<int64_t>(gi) * atlas.cell_w();
        for (int64_t r = 0; r < H; r++)
            for (int64_t c = 0; c < atlas.cell_w(); c++)
                if (bm[r * atlas.cell_w() + c])
                    for (int64_t ch = 0; ch < style.channels; ch++)
                        hq[(ch * H + r) * W + xoff + c] = fg;
    }
    TextLineSample s;
    s.hq = std::move(hq);
    s.transcript = transcript;
    s.group = GlyphAtlas::classify(cps);
    return s;
}

}  // namespace textsr

#endif  // TEXTSR_RENDER_HPP
