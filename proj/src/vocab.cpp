#include "sfmt/vocab.hpp"

#include <algorithm>

#include "sfmt/levels.hpp"

namespace sfmt {

Vocabulary Vocabulary::build(std::vector<std::string> words) {
    Vocabulary v;
    v.id_to_token_ = {"<PAD>", "<BOS>", "<NULLTEXT>", "<ASSESS_C>", "<ASSESS_D>",
                      "<ASSESS_L>", "<ASSESS_H>"};
    for (int i = 0; i < kNumLevels; ++i) v.id_to_token_.push_back("<LV_" + std::to_string(i) + ">");

    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    for (auto& w : words) {
        if (w.empty()) throw ConfigError("vocabulary: empty word");
        if (w.front() == '<') throw ConfigError("vocabulary: word collides with special syntax: " + w);
        v.id_to_token_.push_back(w);
    }
    if (v.size() > 1024) throw ConfigError("vocabulary exceeds 1024 tokens");
    for (int i = 0; i < v.size(); ++i) v.token_to_id_[v.id_to_token_[static_cast<size_t>(i)]] = i;
    return v;
}

int Vocabulary::instruction_token(char aspect) {
    switch (aspect) {
        case 'C': return ASSESS_C;
        case 'D': return ASSESS_D;
        case 'L': return ASSESS_L;
        case 'H': return ASSESS_H;
        default: throw ConfigError(std::string("unknown aspect code: ") + aspect);
    }
}

int Vocabulary::level_to_label(int level) {
    check_level(level);
    return LABEL_BASE + level;
}

}  // namespace sfmt
