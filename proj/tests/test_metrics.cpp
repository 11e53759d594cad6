#include <catch2/catch_amalgamated.hpp>

#include "textsr/degrade.hpp"
#include "textsr/metrics.hpp"
#include "textsr/render.hpp"
#include "textsr/rng.hpp"

using namespace textsr;

TEST_CASE("levenshtein / ned / acc hand cases") {
    CHECK(ned("abc", "abc") == Catch::Approx(1.0));
    CHECK(acc("abc", "abc") == 1);
    CHECK(ned("abc", "abd") == Catch::Approx(1.0 - 1.0 / 3.0));
    CHECK(acc("abc", "abd") == 0);
    CHECK(ned("", "abc") == Catch::Approx(0.0));
    CHECK_THROWS_AS(ned("abc", ""), DomainError);
    CHECK_THROWS_AS(acc("abc", ""), DomainError);
    // codepoint-level distance on multibyte strings
    std::string a = utf8_encode(0x4E00) + utf8_encode(0x4E01);
    std::string b = utf8_encode(0x4E00) + utf8_encode(0x4E02);
    CHECK(levenshtein(a, b) == 1);
    CHECK(ned(a, b) == Catch::Approx(0.5));
}

TEST_CASE("levenshtein metric axioms on random triples") {
    Rng rng(37);
    auto rand_str = [&]() {
        size_t n = rng.uniform_int(0, 8);
        std::vector<uint32_t> s(n);
        for (auto& c : s) c = 'a' + static_cast<uint32_t>(rng.uniform_int(0, 3));
        return s;
    };
    for (int t = 0; t < 300; t++) {
        auto a = rand_str(), b = rand_str(), c = rand_str();
        CHECK(levenshtein(a, a) == 0);
        CHECK(levenshtein(a, b) == levenshtein(b, a));
        CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
        if (a != b) CHECK(levenshtein(a, b) > 0);
    }
}

TEST_CASE("psnr hand cases and monotonicity") {
    Image x = Image::full({1, 4, 4}, 0.5f);
    CHECK(std::isinf(psnr(x, x)));

    // MSE = 1 on a peak-255 scale -> 10*log10(65025) = 48.1308 dB
    Image a({1, 2, 2}), b({1, 2, 2});
    for (int64_t i = 0; i < 4; i++) b[i] = 1.f;
    a.zero();
    CHECK(psnr(a, b, 255.0) == Catch::Approx(48.130803608679).margin(1e-4));

    // MSE = peak^2 -> 0 dB
    CHECK(psnr(a, b, 1.0) == Catch::Approx(0.0).margin(1e-9));

    CHECK_THROWS_AS(psnr(a, Image({1, 2, 3})), ShapeError);

    // strictly decreasing with noise variance
    GlyphAtlas atlas = builtin_atlas();
    auto s = render_text_line("NOISEMONO", atlas, {});
    double prev = std::numeric_limits<double>::infinity();
    for (float sigma : {0.01f, 0.02f, 0.04f, 0.08f, 0.16f}) {
        Image noisy = s.hq.clone();
        Rng rng(99);
        for (auto& v : noisy) v = img::clamp01(v + sigma * static_cast<float>(rng.normal()));
        double p = psnr(noisy, s.hq);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("frechet_gaussian hand cases and symmetry") {
    auto g1 = GaussianSummary{Tensor<double>::from({1}, {0.0}), Tensor<double>::from({1, 1}, {1.0})};
    auto g2 = GaussianSummary{Tensor<double>::from({1}, {1.0}), Tensor<double>::from({1, 1}, {1.0})};
    auto g3 = GaussianSummary{Tensor<double>::from({1}, {0.0}), Tensor<double>::from({1, 1}, {4.0})};

    CHECK(frechet_gaussian(g1, g1) == Catch::Approx(0.0).margin(1e-8));
    CHECK(frechet_gaussian(g1, g2) == Catch::Approx(1.0).margin(1e-8));
    CHECK(frechet_gaussian(g1, g3) == Catch::Approx(1.0).margin(1e-8));  // 1 + 4 - 2*2

    Rng rng(7);
    for (int t = 0; t < 10; t++) {
        int64_t d = 3;
        Tensor<double> f1({16, d}), f2({16, d});
        for (auto& v : f1) v = rng.normal();
        for (auto& v : f2) v = rng.normal() * 1.5 + 0.3;
        auto a = summarize_gaussian(f1);
        auto b = summarize_gaussian(f2);
        double ab = frechet_gaussian(a, b);
        double ba = frechet_gaussian(b, a);
        CHECK(ab >= 0.0);
        CHECK(ab == Catch::Approx(ba).margin(1e-8));
    }

    // non-PSD rejection
    auto bad = GaussianSummary{Tensor<double>::from({1}, {0.0}), Tensor<double>::from({1, 1}, {-1.0})};
    CHECK_THROWS_AS(frechet_gaussian(bad, g1), NumericalError);
}

TEST_CASE("recognizer round trip, blank totality, noise tolerance") {
    GlyphAtlas atlas = builtin_atlas();
    TemplateRecognizer rec(atlas);
    RenderStyle style;
    style.seed = 5;

    // clean renders recognize exactly (NED = 1.0), over all groups
    Rng rng(61);
    for (int t = 0; t < 20; t++) {
        Group g = t % 3 == 0 ? Group::ChineseProxy : (t % 3 == 1 ? Group::EnglishProxy : Group::Digit);
        auto chars = atlas.charset_of_group(g);
        std::vector<uint32_t> cps;
        size_t len = 1 + rng.uniform_int(0, 9);
        for (size_t i = 0; i < len; i++) cps.push_back(chars[rng.uniform_int(0, chars.size() - 1)]);
        std::string transcript = utf8_encode(cps);
        auto s = render_text_line(transcript, atlas, style);
        CHECK(rec.recognize(s.hq) == transcript);
        CHECK(ned(rec.recognize(s.hq), transcript) == Catch::Approx(1.0));
    }

    // inverted polarity still resolves
    {
        RenderStyle inv;
        inv.foreground = 0.9f;
        inv.background = 0.1f;
        auto s = render_text_line("INVERT", atlas, inv);
        CHECK(rec.recognize(s.hq) == "INVERT");
    }

    // blank image: never an error, yields the blank-most template per cell
    {
        Image blank = Image::full({1, 32, 64}, 0.7f);
        std::string out = rec.recognize(blank);
        CHECK(utf8_decode(out).size() == 4);
        std::string again = rec.recognize(blank);
        CHECK(out == again);
    }

    // 1-px sliver is not segmentable
    CHECK_THROWS_AS(rec.recognize(Image({1, 32, 1})), SegmentationError);

    // mildly noisy 10-char line keeps >= 9 correct cells
    {
        auto chars = atlas.charset_of_group(Group::EnglishProxy);
        std::vector<uint32_t> cps;
        for (int i = 0; i < 10; i++) cps.push_back(chars[rng.uniform_int(0, chars.size() - 1)]);
        std::string transcript = utf8_encode(cps);
        auto s = render_text_line(transcript, atlas, style);
        Image noisy = s.hq.clone();
        Rng nrng(77);
        for (auto& v : noisy) v = img::clamp01(v + 0.05f * static_cast<float>(nrng.normal()));
        std::string hyp = rec.recognize(noisy);
        auto hc = utf8_decode(hyp);
        REQUIRE(hc.size() == 10);
        int correct = 0;
        for (int i = 0; i < 10; i++)
            if (hc[i] == cps[i]) correct++;
        CHECK(correct >= 9);
    }
}

TEST_CASE("perceptual distance: identity, symmetry, positivity, batch invariance") {
    PerceptualPyramid<float> pyr(1, 7777);
    Rng rng(404);
    Image x({1, 1, 16, 32}), y({1, 1, 16, 32});
    for (auto& v : x) v = static_cast<float>(rng.uniform());
    for (auto& v : y) v = static_cast<float>(rng.uniform());

    CHECK(pyr.distance(x, x) == 0.f);
    CHECK(pyr.distance(x, y) == pyr.distance(y, x));

    for (int t = 0; t < 100; t++) {
        Image a({1, 1, 8, 16}), b({1, 1, 8, 16});
        for (auto& v : a) v = static_cast<float>(rng.uniform());
        for (auto& v : b) v = static_cast<float>(rng.uniform());
        CHECK(pyr.distance(a, b) > 0.f);
    }

    // invariant to evaluation batch size: per-pair distances match the
    // stacked-batch distance decomposition (mean over batch)
    Image x2({2, 1, 16, 32}), y2({2, 1, 16, 32});
    for (int64_t i = 0; i < x2.numel(); i++) {
        x2[i] = static_cast<float>(rng.uniform());
        y2[i] = static_cast<float>(rng.uniform());
    }
    auto slice = [](const Image& b, int64_t i) {
        Image out({1, 1, 16, 32});
        std::copy(b.data() + i * 16 * 32, b.data() + (i + 1) * 16 * 32, out.data());
        return out;
    };
    float d_batch = pyr.distance(x2, y2);
    float d_each = 0.5f * (pyr.distance(slice(x2, 0), slice(y2, 0)) +
                           pyr.distance(slice(x2, 1), slice(y2, 1)));
    CHECK(d_batch == Catch::Approx(d_each).margin(1e-5));

    // determinism across instances with the same seed
    PerceptualPyramid<float> pyr2(1, 7777);
    CHECK(pyr.distance(x, y) == pyr2.distance(x, y));

    // features are 64-dim
    auto f = pyr.features64(x);
    CHECK(f.shape() == std::vector<int64_t>{1, 64});
}

TEST_CASE("evaluate produces a coherent report") {
    GlyphAtlas atlas = builtin_atlas();
    PerceptualPyramid<float> pyr(1, 7777);
    RenderStyle style;
    std::vector<Image> pred, ref;
    std::vector<std::string> ids, transcripts;
    Rng rng(11);
    for (int i = 0; i < 6; i++) {
        auto chars = atlas.charset_of_group(Group::EnglishProxy);
        std::vector<uint32_t> cps;
        for (int k = 0; k < 8; k++) cps.push_back(chars[rng.uniform_int(0, chars.size() - 1)]);
        auto s = render_text_line(utf8_encode(cps), atlas, style);
        ref.push_back(s.hq);
        Image noisy = s.hq.clone();
        for (auto& v : noisy) v = img::clamp01(v + 0.02f * static_cast<float>(rng.normal()));
        pred.push_back(noisy);
        ids.push_back("s" + std::to_string(i));
        transcripts.push_back(s.transcript);
    }
    auto report = evaluate(pred, ref, ids, transcripts, atlas, pyr);
    CHECK(report.samples.size() == 6);
    CHECK(report.mean_ned > 0.9);
    CHECK(report.acc >= 0.5);
    CHECK(report.mean_psnr > 20.0);
    CHECK(report.frechet >= 0.0);
    for (auto& s : report.samples) {
        CHECK(s.ned >= 0.0);
        CHECK(s.ned <= 1.0);
    }
}
