#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sfmt/error.hpp"

namespace sfmt {

// Token table with a fixed reserved prefix: control tokens, one instruction
// token per aspect, and the eight contiguous label tokens, followed by the
// word vocabulary in sorted order.
class Vocabulary {
public:
    static constexpr int PAD = 0;
    static constexpr int BOS = 1;
    static constexpr int NULLTEXT = 2;
    static constexpr int ASSESS_C = 3;
    static constexpr int ASSESS_D = 4;
    static constexpr int ASSESS_L = 5;
    static constexpr int ASSESS_H = 6;
    static constexpr int LABEL_BASE = 7;  // <LV_0> ... <LV_7> at 7..14
    static constexpr int NUM_SPECIALS = 15;

    static Vocabulary build(std::vector<std::string> words);

    int id(const std::string& token) const {
        auto it = token_to_id_.find(token);
        if (it == token_to_id_.end()) throw IndexError("unknown token: " + token);
        return it->second;
    }

    const std::string& token(int id) const {
        if (id < 0 || id >= size()) throw IndexError("token id " + std::to_string(id) + " out of range");
        return id_to_token_[static_cast<size_t>(id)];
    }

    int size() const { return static_cast<int>(id_to_token_.size()); }

    // Aspect code is one of 'C', 'D', 'L', 'H'.
    static int instruction_token(char aspect);

    static bool is_label(int id) { return id >= LABEL_BASE && id < LABEL_BASE + 8; }
    static int label_to_level(int id) {
        if (!is_label(id)) throw IndexError("id " + std::to_string(id) + " is not a label token");
        return id - LABEL_BASE;
    }
    static int level_to_label(int level);

    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace sfmt
