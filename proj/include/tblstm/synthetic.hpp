#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tblstm/data.hpp"

// Synthetic corpora with a hidden bigram rule: a fixed permutation maps each
// content word to its likely successor, so a masked token is recoverable
// from its neighbors about follow_prob of the time. The same word set also
// feeds two labeled tasks: a marker-classification task and a
// marked-span-extraction task. Everything is a pure function of (spec, seed).
namespace tblstm {

struct SyntheticSpec {
    int64_t content_words = 200;  // ids 5.. in the derived vocabulary
    int64_t docs = 20;
    int64_t sentences_per_doc = 100;
    int64_t len_min = 8;
    int64_t len_max = 16;
    double follow_prob = 0.95;
    int64_t classes = 3;   // classification task labels; markers are content words 0..classes-1
    int64_t span_max = 4;  // longest marked span, in tokens
};

// Content word i is spelled "w" + zero-padded i; its vocabulary id is
// kNumSpecial + i.
std::string content_word(const SyntheticSpec& s, int64_t i);
Vocab synthetic_vocab(const SyntheticSpec& s);

// The hidden rule: content index -> successor content index (a bijection,
// so the predecessor is equally informative).
std::vector<int64_t> successor_permutation(const SyntheticSpec& s, uint64_t seed);

// Sentence starts walk round-robin over the content words, so every word
// appears whenever docs * sentences_per_doc >= content_words. After the
// start, each token follows the successor rule with follow_prob, otherwise
// it is uniform.
Corpus gen_synthetic_corpus(const SyntheticSpec& s, uint64_t seed);

// Content-word indices reserved by the labeled tasks. The fillers of both
// tasks exclude all of them, so a marker or answer token in a labeled
// sentence is unambiguous.
inline int64_t marker_index(const SyntheticSpec&, int64_t cls) { return cls; }
inline int64_t answer_index(const SyntheticSpec& s) { return s.classes; }

struct ClassifyExample {
    int label = 0;
    std::vector<std::string> words;  // exactly one marker word somewhere
};

struct SpanExample {
    int64_t start = 0, end = 0;      // word indices, inclusive
    std::vector<std::string> words;  // words[start..end] are the answer token
};

std::vector<ClassifyExample> gen_classify_data(const SyntheticSpec& s, int64_t n, uint64_t seed);
std::vector<SpanExample> gen_span_data(const SyntheticSpec& s, int64_t n, uint64_t seed);

// One example per line. classify: "label<TAB>words". span:
// "start<TAB>end<TAB>words". Words space-separated.
void save_classify_data(const std::vector<ClassifyExample>& xs, const std::string& path);
std::vector<ClassifyExample> load_classify_data(const std::string& path);
void save_span_data(const std::vector<SpanExample>& xs, const std::string& path);
std::vector<SpanExample> load_span_data(const std::string& path);

// Accuracy of the best neighbor predictor on the masked positions: successor
// of the left neighbor when that is a content word, else predecessor of the
// right neighbor. Establishes the learnability ceiling the trained model is
// measured against. Examples must carry their masking labels.
double bigram_oracle_accuracy(const SyntheticSpec& s, uint64_t seed,
                              const std::vector<PretrainExample>& masked, const Vocab& v);

}  // namespace tblstm
