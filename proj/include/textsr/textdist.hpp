#ifndef TEXTSR_TEXTDIST_HPP
#define TEXTSR_TEXTDIST_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "common.hpp"

namespace textsr {

// Levenshtein distance over codepoints, two-row DP.
inline int64_t levenshtein(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    const size_t m = a.size(), n = b.size();
    if (m == 0) return static_cast<int64_t>(n);
    if (n == 0) return static_cast<int64_t>(m);
    std::vector<int64_t> prev(n + 1), cur(n + 1);
    for (size_t j = 0; j <= n; j++) prev[j] = static_cast<int64_t>(j);
    for (size_t i = 1; i <= m; i++) {
        cur[0] = static_cast<int64_t>(i);
        for (size_t j = 1; j <= n; j++) {
            int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

inline int64_t levenshtein(const std::string& a, const std::string& b) {
    return levenshtein(utf8_decode(a), utf8_decode(b));
}

// NED = 1 - distance / max(len); higher is better.
inline double ned(const std::string& pred, const std::string& ref) {
    auto cp = utf8_decode(pred);
    auto cr = utf8_decode(ref);
    if (cr.empty()) throw DomainError("ned: empty reference transcript");
    int64_t d = levenshtein(cp, cr);
    return 1.0 - static_cast<double>(d) /
                     static_cast<double>(std::max(cp.size(), cr.size()));
}

// Exact string match, no normalization.
inline int acc(const std::string& pred, const std::string& ref) {
    if (ref.empty()) throw DomainError("acc: empty reference transcript");
    return pred == ref ? 1 : 0;
}

}  // namespace textsr

#endif  // TEXTSR_TEXTDIST_HPP
