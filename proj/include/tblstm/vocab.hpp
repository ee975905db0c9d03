#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "tblstm/common.hpp"

// Reduced wordpiece vocabulary: a dense id space with five reserved control
// tokens up front and "##"-prefixed continuation pieces. Greedy
// longest-match-first segmentation; a word that cannot be fully segmented
// becomes a single [UNK].
namespace tblstm {

struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecial = 5;

    static const std::array<const char*, kNumSpecial>& special_names() {
        static const std::array<const char*, kNumSpecial> n = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                               "[MASK]"};
        return n;
    }

    static Vocab with_specials() {
        Vocab v;
        for (const char* s : special_names()) v.add(s);
        return v;
    }

    int add(const std::string& tok) {
        if (tok.empty()) throw VocabError("empty token cannot enter the vocabulary");
        if (ids_.count(tok)) throw VocabError("duplicate token '" + tok + "'");
        int id = static_cast<int>(tokens_.size());
        tokens_.push_back(tok);
        ids_.emplace(tok, id);
        return id;
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    const std::string& token(int id) const {
        if (id < 0 || id >= size())
            throw VocabError("token id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(size()));
        return tokens_[static_cast<size_t>(id)];
    }

    // -1 when absent; never throws, the tokenizer probes freely.
    int id_of(const std::string& tok) const {
        auto it = ids_.find(tok);
        return it == ids_.end() ? -1 : it->second;
    }

    bool is_special(int id) const { return id >= 0 && id < kNumSpecial; }

    // Continuation pieces are spelled with a leading "##"; everything else,
    // specials included, starts a word.
    bool begins_word(int id) const { return token(id).rfind("##", 0) != 0; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

// One token per line, line number = id; the first five lines must spell the
// reserved tokens in order.
Vocab load_vocab(const std::string& path);
void save_vocab(const Vocab& v, const std::string& path);

struct Tokenized {
    std::vector<int> ids;
    std::vector<char> begins;  // parallel to ids: piece starts a word
};

// Whitespace-split words, each segmented greedy longest-match-first.
// Specials never match as pieces, so literal "[CLS]" in text becomes [UNK].
Tokenized tokenize(const std::string& text, const Vocab& v);

}  // namespace tblstm
