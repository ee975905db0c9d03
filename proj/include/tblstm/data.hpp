#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tblstm/rng.hpp"
#include "tblstm/vocab.hpp"

// Corpus handling and pretraining example construction: sentence-pair
// sampling, "[CLS] x1 [SEP] x2 [SEP]" formatting with tail-first truncation,
// whole-word masking, batching, and a flat text serialization.
namespace tblstm {

// A document is a list of sentences. On disk: one sentence per line,
// documents separated by blank lines.
struct Corpus {
    std::vector<std::vector<std::string>> docs;
};

Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& c, const std::string& path);
std::string corpus_to_string(const Corpus& c);

// Frequency-based reduced vocabulary: reserved tokens, then every single
// character seen (plain and continuation form, so segmentation never dead-
// ends on known alphabet), then whole words by descending frequency until
// max_size.
Vocab build_vocab(const Corpus& c, int max_size);

struct SentencePair {
    std::string a, b;
    bool is_next = false;
};

// Fair coin: consecutive sentences from one document, or sentences from two
// distinct documents. Throws ConfigError when the corpus cannot supply both
// kinds (fewer than two documents, or no document with two sentences).
SentencePair sample_sentence_pair(const Corpus& c, Pcg32& rng);

struct PretrainExample {
    std::vector<int> tokens;    // [CLS] x1 [SEP] x2 [SEP], unpadded
    std::vector<int> segments;  // 0 through the first [SEP], then 1
    std::vector<int> mlm_positions;
    std::vector<int> mlm_labels;  // original ids at those positions
    int nsp_label = 0;            // 1 = consecutive pair
};

// Formats a tokenized pair. When the assembled sequence would exceed
// max_len, the tail of x2 is trimmed first, then the tail of x1; one token
// of each segment and both separators always survive.
PretrainExample build_pretrain_example(const Tokenized& a, const Tokenized& b, bool is_next,
                                       int64_t max_len);

// Selects whole words (shuffled order, greedily until at least mask_rate of
// maskable positions are covered). One 80/10/10 treatment draw per word, all
// pieces share it; per_piece switches to an independent draw per piece.
// Returns false, leaving the example untouched, when nothing is maskable.
bool whole_word_mask(PretrainExample& ex, const Vocab& v, Pcg32& rng, double mask_rate = 0.15,
                     bool per_piece = false);

// One example per line. Fields tab-separated in this order: nsp_label,
// tokens, segments, mlm_positions, mlm_labels; list items space-separated
// decimal integers.
std::string example_to_line(const PretrainExample& ex);
PretrainExample example_from_line(const std::string& line);

struct Batch {
    std::vector<PretrainExample> examples;  // tokens/segments right-padded in place
    std::vector<int64_t> valid_lens;
    int64_t padded_len = 0;
};

// Right-pads every example to the longest in the slice. The slice is the
// batch; callers cut the stream into batch_size pieces.
Batch make_batch(const std::vector<PretrainExample>& examples, int64_t max_len);

// Draws pairs, formats, masks; pairs whose masking finds nothing maskable
// are skipped rather than emitted, so every result carries labels.
std::vector<PretrainExample> sample_pretrain_examples(const Corpus& c, const Vocab& v, Pcg32& rng,
                                                      int64_t n, int64_t max_len,
                                                      double mask_rate = 0.15,
                                                      bool per_piece = false);

// "[CLS] x [SEP]" for single-sentence tasks; tail-truncated to max_len.
struct SingleSegment {
    std::vector<int> tokens;
    std::vector<int> segments;  // all zero
};
SingleSegment build_single_segment(const Tokenized& a, int64_t max_len);

}  // namespace tblstm
