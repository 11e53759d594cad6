#ifndef TEXTSR_METRICS_HPP
#define TEXTSR_METRICS_HPP

#include <limits>

#include "frechet.hpp"
#include "image.hpp"
#include "perceptual.hpp"
#include "recognizer.hpp"
#include "textdist.hpp"

namespace textsr {

// 10*log10(peak^2 / MSE); identical inputs return the +inf sentinel.
inline double psnr(const Image& x, const Image& y, double peak = 1.0) {
    check_same_shape(x, y, "psnr");
    double mse = 0;
    for (int64_t i = 0; i < x.numel(); i++) {
        double d = static_cast<double>(x[i]) - y[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

struct SampleEval {
    std::string id;
    double psnr_db = 0;
    double perceptual = 0;
    double ned = 0;
    int acc_hit = 0;
};

struct EvalReport {
    std::vector<SampleEval> samples;
    double mean_psnr = 0;        // over finite entries
    int64_t psnr_inf_count = 0;  // exact matches
    double mean_perceptual = 0;
    double frechet = 0;  // frechet(proxy) over pyramid features
    double acc = 0;
    double mean_ned = 0;
    std::string acc_convention = "exact string match, no normalization";
};

// Pred/ref images are paired by index; transcripts come from the reference
// manifest. Frechet is computed between the two feature populations.
inline EvalReport evaluate(const std::vector<Image>& pred, const std::vector<Image>& ref,
                           const std::vector<std::string>& ids,
                           const std::vector<std::string>& transcripts, const GlyphAtlas& atlas,
                           const PerceptualPyramid<float>& pyramid) {
    if (pred.size() != ref.size() || pred.size() != transcripts.size() || pred.size() != ids.size())
        throw ShapeError("evaluate: pred/ref/transcript counts differ");
    if (pred.empty()) throw DataError("evaluate: nothing to evaluate");
    TemplateRecognizer rec(atlas);
    EvalReport report;
    double psnr_sum = 0;
    int64_t psnr_n = 0;
    int64_t C = pred[0].size(0);
    Tensor<double> feats_pred({static_cast<int64_t>(pred.size()), 64});
    Tensor<double> feats_ref({static_cast<int64_t>(pred.size()), 64});
    for (size_t i = 0; i < pred.size(); i++) {
        SampleEval s;
        s.id = ids[i];
        s.psnr_db = psnr(pred[i], ref[i]);
        s.perceptual = pyramid.distance(pred[i], ref[i]);
        std::string hyp = rec.recognize(pred[i]);
        s.ned = ned(hyp, transcripts[i]);
        s.acc_hit = acc(hyp, transcripts[i]);
        if (std::isinf(s.psnr_db))
            report.psnr_inf_count++;
        else {
            psnr_sum += s.psnr_db;
            psnr_n++;
        }
        report.mean_perceptual += s.perceptual;
        report.mean_ned += s.ned;
        report.acc += s.acc_hit;
        auto bp = pred[i].reshape({1, C, pred[i].size(1), pred[i].size(2)});
        auto fp = pyramid.features64(bp);
        auto br = ref[i].reshape({1, C, ref[i].size(1), ref[i].size(2)});
        auto fr = pyramid.features64(br);
        for (int64_t j = 0; j < 64; j++) {
            feats_pred[i * 64 + j] = fp[j];
            feats_ref[i * 64 + j] = fr[j];
        }
        report.samples.push_back(std::move(s));
    }
    size_t n = pred.size();
    report.mean_psnr = psnr_n ? psnr_sum / psnr_n : std::numeric_limits<double>::infinity();
    report.mean_perceptual /= static_cast<double>(n);
    report.mean_ned /= static_cast<double>(n);
    report.acc /= static_cast<double>(n);
    if (n >= 2)
        report.frechet =
            frechet_gaussian(summarize_gaussian(feats_pred), summarize_gaussian(feats_ref));
    return report;
}

}  // namespace textsr

#endif  // TEXTSR_METRICS_HPP
