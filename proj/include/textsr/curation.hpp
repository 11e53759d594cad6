#ifndef TEXTSR_CURATION_HPP
#define TEXTSR_CURATION_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>

#include "image.hpp"
#include "render.hpp"

namespace textsr {
namespace curation {

struct Candidate {
    TextLineSample sample;
    std::map<std::string, double> raw_scores;
    std::map<std::string, double> ranks;  // percentile ranks within group
    std::optional<double> quality;
};

// No-reference quality scorers, all mapped to "higher is better".
struct ScorerSuite {
    std::vector<std::pair<std::string, std::function<double(const Image&)>>> scorers;
    std::map<std::string, double> weights;

    void validate() const {
        double s = 0;
        for (auto& [name, w] : weights) s += w;
        if (std::abs(s - 1.0) > 1e-9)
            throw DomainError("scorer weights must sum to 1.0, got " + std::to_string(s));
    }

    static ScorerSuite defaults();
};

namespace scorers {

// Sharpness: variance of the 3x3 Laplacian response over the interior.
inline double laplacian_variance(const Image& x) {
    Image g = img::luma(x);
    int64_t H = g.size(1), W = g.size(2);
    if (H < 3 || W < 3) return 0.0;
    double sum = 0, sum2 = 0;
    int64_t n = 0;
    for (int64_t i = 1; i < H - 1; i++)
        for (int64_t j = 1; j < W - 1; j++) {
            double v = g[i * W + j - 1] + g[i * W + j + 1] + g[(i - 1) * W + j] +
                       g[(i + 1) * W + j] - 4.0 * g[i * W + j];
            sum += v;
            sum2 += v * v;
            n++;
        }
    double mean = sum / n;
    return sum2 / n - mean * mean;
}

// Mean of per-tile standard deviations over an 8x8 tiling.
inline double local_contrast(const Image& x) {
    Image g = img::luma(x);
    int64_t H = g.size(1), W = g.size(2);
    double acc = 0;
    int64_t tiles = 0;
    for (int64_t ti = 0; ti < H; ti += 8)
        for (int64_t tj = 0; tj < W; tj += 8) {
            int64_t h1 = std::min(ti + 8, H), w1 = std::min(tj + 8, W);
            double s = 0, s2 = 0;
            int64_t n = 0;
            for (int64_t i = ti; i < h1; i++)
                for (int64_t j = tj; j < w1; j++) {
                    double v = g[i * W + j];
                    s += v;
                    s2 += v * v;
                    n++;
                }
            double m = s / n;
            acc += std::sqrt(std::max(0.0, s2 / n - m * m));
            tiles++;
        }
    return tiles ? acc / tiles : 0.0;
}

// Inverted noise estimate: median absolute Laplacian, Immerkaer style.
inline double noise_inverse(const Image& x) {
    Image g = img::luma(x);
    int64_t H = g.size(1), W = g.size(2);
    if (H < 3 || W < 3) return 1.0;
    std::vector<double> resp;
    resp.reserve((H - 2) * (W - 2));
    for (int64_t i = 1; i < H - 1; i++)
        for (int64_t j = 1; j < W - 1; j++)
            resp.push_back(std::abs(g[i * W + j - 1] + g[i * W + j + 1] + g[(i - 1) * W + j] +
                                    g[(i + 1) * W + j] - 4.0 * g[i * W + j]));
    std::nth_element(resp.begin(), resp.begin() + resp.size() / 2, resp.end());
    double med = resp[resp.size() / 2];
    return 1.0 / (1.0 + 10.0 * med);
}

}  // namespace scorers

inline ScorerSuite ScorerSuite::defaults() {
    ScorerSuite s;
    s.scorers = {{"musiq-proxy", scorers::laplacian_variance},
                 {"maniqa-proxy", scorers::local_contrast},
                 {"clipiqa-proxy", scorers::noise_inverse}};
    s.weights = {{"musiq-proxy", 0.50}, {"maniqa-proxy", 0.35}, {"clipiqa-proxy", 0.15}};
    return s;
}

// Bicubic rescale to a fixed height, aspect ratio preserved.
inline Image normalize_height(const Image& x, int64_t target_h) {
    img::check_image(x, "normalize_height");
    int64_t H = x.size(1), W = x.size(2);
    if (H < 1) throw ShapeError("normalize_height: empty image");
    if (H == target_h) return x.clone();
    int64_t ow = std::max<int64_t>(1, std::llround(static_cast<double>(W) * target_h / H));
    return img::resize(x, target_h, ow, Resample::Bicubic);
}

// Fractional percentile ranks: min -> 0, max -> 1 for n > 1, ties get the
// mean of their occupied positions, single element -> 0.5.
inline std::vector<double> percentile_ranks(const std::vector<double>& scores) {
    size_t n = scores.size();
    if (n == 0) throw EmptyPool("percentile_ranks: empty score list");
    if (n == 1) return {0.5};
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) j++;
        double mean_pos = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        double r = (mean_pos - 1.0) / static_cast<double>(n - 1);
        for (size_t k = i; k <= j; k++) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Q = sum_i weight_i * rank_i
inline double quality_score(const std::map<std::string, double>& ranks, const ScorerSuite& suite) {
    suite.validate();
    double q = 0;
    for (auto& [name, w] : suite.weights) {
        auto it = ranks.find(name);
        if (it == ranks.end()) throw MissingScore("no rank for scorer '" + name + "'");
        q += w * it->second;
    }
    return q;
}

// Largest-remainder quota, lexicographic group-name tie break.
inline std::map<std::string, int64_t> allocate_quota(const std::map<std::string, int64_t>& sizes,
                                                     int64_t total) {
    int64_t pool = 0;
    for (auto& [g, n] : sizes) pool += n;
    if (total > pool)
        throw InsufficientPool("requested " + std::to_string(total) + " from pool of " +
                               std::to_string(pool));
    std::map<std::string, int64_t> quota;
    std::vector<std::pair<double, std::string>> remainders;
    int64_t assigned = 0;
    for (auto& [g, n] : sizes) {
        double share = pool > 0 ? static_cast<double>(total) * n / pool : 0.0;
        int64_t base = static_cast<int64_t>(std::floor(share + 1e-12));
        quota[g] = base;
        assigned += base;
        remainders.push_back({share - base, g});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int64_t k = 0; k < total - assigned; k++) quota[remainders[k].second]++;
    for (auto& [g, q] : quota)
        if (q > sizes.at(g)) throw NumericalError("quota exceeds group size for " + g);
    return quota;
}

struct FilterRules {
    double min_aspect = 2.0;
    double max_aspect = 8.0;
    int64_t max_transcript_len = 24;
};

struct Rejection {
    std::string id;
    std::string rule;  // first violated rule
};

// Keeps iff min_aspect <= W/H <= max_aspect, transcript length <= max, and
// transcript non-empty; checked in that order.
inline std::pair<std::vector<Candidate>, std::vector<Rejection>> apply_filters(
    std::vector<Candidate> candidates, const FilterRules& rules = {}) {
    std::vector<Candidate> kept;
    std::vector<Rejection> rejected;
    for (auto& c : candidates) {
        double ratio = static_cast<double>(c.sample.hq.size(2)) / c.sample.hq.size(1);
        int64_t len = static_cast<int64_t>(utf8_decode(c.sample.transcript).size());
        if (ratio < rules.min_aspect || ratio > rules.max_aspect)
            rejected.push_back({c.sample.id, "aspect-ratio"});
        else if (len > rules.max_transcript_len)
            rejected.push_back({c.sample.id, "transcript-length"});
        else if (len == 0)
            rejected.push_back({c.sample.id, "transcript-empty"});
        else
            kept.push_back(std::move(c));
    }
    return {std::move(kept), std::move(rejected)};
}

struct CurationResult {
    std::vector<Candidate> selected;  // sorted by id
    std::vector<Rejection> rejected;
    std::map<std::string, int64_t> quota;
};

// normalize -> filter -> per-group ranks -> Q sort -> per-group top quota.
inline CurationResult curate(std::vector<Candidate> pool, const ScorerSuite& suite,
                             const FilterRules& rules, int64_t total, int64_t target_height) {
    if (pool.empty()) throw EmptyPool("curate: empty candidate pool");
    suite.validate();
    for (auto& c : pool) c.sample.hq = normalize_height(c.sample.hq, target_height);
    auto [kept, rejected] = apply_filters(std::move(pool), rules);

    std::map<std::string, std::vector<size_t>> by_group;
    for (size_t i = 0; i < kept.size(); i++)
        by_group[to_string(kept[i].sample.group)].push_back(i);

    std::map<std::string, int64_t> sizes;
    for (auto& [g, v] : by_group) sizes[g] = static_cast<int64_t>(v.size());
    auto quota = allocate_quota(sizes, total);

    for (auto& [g, members] : by_group) {
        for (auto& [name, fn] : suite.scorers) {
            std::vector<double> scores;
            scores.reserve(members.size());
            for (size_t i : members) {
                auto it = kept[i].raw_scores.find(name);
                double s = it != kept[i].raw_scores.end() ? it->second : fn(kept[i].sample.hq);
                kept[i].raw_scores[name] = s;
                scores.push_back(s);
            }
            auto ranks = percentile_ranks(scores);
            for (size_t k = 0; k < members.size(); k++)
                kept[members[k]].ranks[name] = ranks[k];
        }
        for (size_t i : members) kept[i].quality = quality_score(kept[i].ranks, suite);
    }

    CurationResult result;
    result.rejected = std::move(rejected);
    result.quota = quota;
    for (auto& [g, members] : by_group) {
        std::vector<size_t> order = members;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (*kept[a].quality != *kept[b].quality) return *kept[a].quality > *kept[b].quality;
            return kept[a].sample.id < kept[b].sample.id;
        });
        int64_t q = quota[g];
        for (int64_t k = 0; k < q; k++) result.selected.push_back(kept[order[k]]);
    }
    std::sort(result.selected.begin(), result.selected.end(),
              [](const Candidate& a, const Candidate& b) { return a.sample.id < b.sample.id; });
    return result;
}

}  // namespace curation
}  // namespace textsr

#endif  // TEXTSR_CURATION_HPP
