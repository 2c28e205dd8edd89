#include "sfmt/wer.hpp"

#include <algorithm>
#include <cmath>

#include "sfmt/error.hpp"

namespace sfmt {

size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    size_t n = a.size(), m = b.size();
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

CorruptResult corrupt_transcript(const std::vector<std::string>& tokens, double target_wer,
                                 Rng& rng, const std::vector<std::string>& pool,
                                 const EditRatios& ratios) {
    if (tokens.empty()) throw DimError("corrupt_transcript: empty token list");
    if (target_wer < 0.0 || target_wer > 0.5)
        throw ConfigError("corrupt_transcript: target_wer must lie in [0, 0.5]");
    double rsum = ratios.sub + ratios.ins + ratios.del;
    if (rsum <= 0.0) throw ConfigError("corrupt_transcript: edit ratios sum to zero");
    if (pool.empty() && target_wer > 0.0)
        throw ConfigError("corrupt_transcript: empty replacement pool");

    size_t n = tokens.size();
    // stochastic rounding keeps the corpus-level edit count unbiased
    double want = target_wer * static_cast<double>(n);
    size_t k = static_cast<size_t>(want);
    if (rng.uniform() < want - static_cast<double>(k)) ++k;

    size_t n_sub = 0, n_ins = 0, n_del = 0;
    for (size_t e = 0; e < k; ++e) {
        double u = rng.uniform() * rsum;
        if (u < ratios.sub) ++n_sub;
        else if (u < ratios.sub + ratios.ins) ++n_ins;
        else ++n_del;
    }
    // substitutions and deletions hit distinct reference positions
    if (n_sub + n_del > n) {
        size_t over = n_sub + n_del - n;
        size_t cut = std::min(over, n_sub);
        n_sub -= cut;
        over -= cut;
        n_del -= std::min(over, n_del);
    }

    auto pick_pool = [&](const std::string& avoid) {
        for (int tries = 0; tries < 16; ++tries) {
            const std::string& w = pool[rng.uniform_int(pool.size())];
            if (w != avoid) return w;
        }
        return pool[rng.uniform_int(pool.size())];
    };

    std::vector<size_t> positions(n);
    for (size_t i = 0; i < n; ++i) positions[i] = i;
    for (size_t i = n; i > 1; --i) std::swap(positions[i - 1], positions[rng.uniform_int(i)]);

    enum class Op { Keep, Sub, Del };
    std::vector<Op> ops(n, Op::Keep);
    size_t cursor = 0;
    for (size_t i = 0; i < n_sub; ++i) ops[positions[cursor++]] = Op::Sub;
    for (size_t i = 0; i < n_del; ++i) ops[positions[cursor++]] = Op::Del;

    CorruptResult out;
    for (size_t i = 0; i < n; ++i) {
        switch (ops[i]) {
            case Op::Keep: out.tokens.push_back(tokens[i]); break;
            case Op::Sub: out.tokens.push_back(pick_pool(tokens[i])); break;
            case Op::Del: break;
        }
    }
    for (size_t i = 0; i < n_ins; ++i) {
        size_t at = rng.uniform_int(out.tokens.size() + 1);
        out.tokens.insert(out.tokens.begin() + static_cast<std::ptrdiff_t>(at),
                          pool[rng.uniform_int(pool.size())]);
    }

    out.measured_wer = static_cast<double>(levenshtein(tokens, out.tokens)) / static_cast<double>(n);
    return out;
}

}  // namespace sfmt
