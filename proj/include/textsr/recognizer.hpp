#ifndef TEXTSR_RECOGNIZER_HPP
#define TEXTSR_RECOGNIZER_HPP

#include <cmath>

#include "atlas.hpp"
#include "image.hpp"

namespace textsr {

// Template recognizer: rescale to atlas cell height, segment into fixed-width
// cells, pick the nearest template by normalized correlation. Polarity
// agnostic (|NCC|) so inverted renders still resolve. Cells with no contrast
// fall back to the template with the least ink.
class TemplateRecognizer {
public:
    explicit TemplateRecognizer(const GlyphAtlas& atlas) : atlas_(atlas) {
        int64_t n = atlas.cell_h() * atlas.cell_w();
        for (uint32_t cp : atlas.charset()) {
            const auto& bm = atlas.glyph(cp);
            std::vector<float> t(n);
            double mean = 0;
            int64_t ink = 0;
            for (int64_t i = 0; i < n; i++) {
                t[i] = bm[i] ? 1.f : 0.f;
                mean += t[i];
                ink += bm[i];
            }
            mean /= static_cast<double>(n);
            double norm = 0;
            for (auto& v : t) {
                v -= static_cast<float>(mean);
                norm += static_cast<double>(v) * v;
            }
            norm = std::sqrt(norm);
            if (norm > 1e-12)
                for (auto& v : t) v /= static_cast<float>(norm);
            templates_.push_back(std::move(t));
            inks_.push_back(ink);
        }
        blank_most_ = 0;
        for (size_t i = 1; i < inks_.size(); i++)
            if (inks_[i] < inks_[blank_most_]) blank_most_ = i;
    }

    std::string recognize(const Image& image) const {
        Image g = img::luma(image);
        int64_t H = g.size(1), W = g.size(2);
        int64_t ch = atlas_.cell_h(), cw = atlas_.cell_w();
        double scaled_w = static_cast<double>(W) * ch / static_cast<double>(H);
        int64_t cells = static_cast<int64_t>(std::llround(scaled_w / static_cast<double>(cw)));
        if (cells < 1)
            throw SegmentationError("recognize: width " + std::to_string(W) +
                                    " not segmentable into cells");
        Image scaled = img::resize(g, ch, cells * cw, Resample::Bicubic);
        std::vector<uint32_t> out;
        int64_t n = ch * cw;
        std::vector<float> cell(n);
        for (int64_t k = 0; k < cells; k++) {
            double mean = 0;
            for (int64_t r = 0; r < ch; r++)
                for (int64_t c = 0; c < cw; c++) {
                    cell[r * cw + c] = scaled[r * cells * cw + k * cw + c];
                    mean += cell[r * cw + c];
                }
            mean /= static_cast<double>(n);
            double norm = 0;
            for (auto& v : cell) {
                v -= static_cast<float>(mean);
                norm += static_cast<double>(v) * v;
            }
            norm = std::sqrt(norm);
            size_t best = blank_most_;
            if (norm > 1e-6) {
                double best_score = -1;
                for (size_t t = 0; t < templates_.size(); t++) {
                    double dot = 0;
                    for (int64_t i = 0; i < n; i++) dot += cell[i] * templates_[t][i];
                    double score = std::abs(dot) / norm;
                    if (score > best_score) {
                        best_score = score;
                        best = t;
                    }
                }
            }
            out.push_back(atlas_.charset()[best]);
        }
        return utf8_encode(out);
    }

private:
    const GlyphAtlas& atlas_;
    std::vector<std::vector<float>> templates_;
    std::vector<int64_t> inks_;
    size_t blank_most_;
};

}  // namespace textsr

#endif  // TEXTSR_RECOGNIZER_HPP
