#include "tblstm/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tblstm {

namespace {

size_t pick(Pcg32& rng, size_t n) { return static_cast<size_t>(rng.next_double() * double(n)); }

void validate(const SyntheticSpec& s) {
    if (s.content_words < s.classes + 2)
        throw ConfigError("synthetic spec needs content_words > classes + 1 so fillers exist");
    if (s.classes < 2) throw ConfigError("synthetic spec needs >= 2 classes");
    if (s.docs < 2) throw ConfigError("synthetic spec needs >= 2 documents");
    if (s.sentences_per_doc < 1 || s.len_min < 1 || s.len_max < s.len_min)
        throw ConfigError("synthetic spec has an empty sentence range");
    if (!(s.follow_prob >= 0.0 && s.follow_prob <= 1.0))
        throw ConfigError("follow_prob must sit in [0, 1]");
    if (s.span_max < 1) throw ConfigError("span_max must be >= 1");
}

int64_t digits(int64_t n) {
    int64_t d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return d;
}

// filler words: everything past the task-reserved prefix
int64_t filler(const SyntheticSpec& s, Pcg32& rng) {
    int64_t lo = s.classes + 1;
    return lo + static_cast<int64_t>(pick(rng, static_cast<size_t>(s.content_words - lo)));
}

int64_t sentence_len(const SyntheticSpec& s, Pcg32& rng) {
    return s.len_min + static_cast<int64_t>(pick(rng, static_cast<size_t>(s.len_max - s.len_min + 1)));
}

}  // namespace

std::string content_word(const SyntheticSpec& s, int64_t i) {
    if (i < 0 || i >= s.content_words)
        throw VocabError("content word index " + std::to_string(i) + " outside 0.." +
                         std::to_string(s.content_words - 1));
    std::string num = std::to_string(i);
    std::string pad(static_cast<size_t>(digits(s.content_words - 1) - int64_t(num.size())), '0');
    return "w" + pad + num;
}

Vocab synthetic_vocab(const SyntheticSpec& s) {
    validate(s);
    Vocab v = Vocab::with_specials();
    for (int64_t i = 0; i < s.content_words; ++i) v.add(content_word(s, i));
    return v;
}

std::vector<int64_t> successor_permutation(const SyntheticSpec& s, uint64_t seed) {
    validate(s);
    std::vector<int64_t> succ(static_cast<size_t>(s.content_words));
    std::iota(succ.begin(), succ.end(), 0);
    Pcg32 rng(derive_seed(seed, "successor"), 0);
    for (size_t i = succ.size(); i > 1; --i) std::swap(succ[i - 1], succ[pick(rng, i)]);
    return succ;
}

Corpus gen_synthetic_corpus(const SyntheticSpec& s, uint64_t seed) {
    validate(s);
    auto succ = successor_permutation(s, seed);
    Pcg32 rng(derive_seed(seed, "corpus"), 0);
    Corpus c;
    c.docs.resize(static_cast<size_t>(s.docs));
    for (int64_t d = 0; d < s.docs; ++d) {
        auto& doc = c.docs[static_cast<size_t>(d)];
        for (int64_t k = 0; k < s.sentences_per_doc; ++k) {
            int64_t t = (d * s.sentences_per_doc + k) % s.content_words;
            int64_t len = sentence_len(s, rng);
            std::string sent = content_word(s, t);
            for (int64_t j = 1; j < len; ++j) {
                t = rng.next_double() < s.follow_prob
                        ? succ[static_cast<size_t>(t)]
                        : static_cast<int64_t>(pick(rng, static_cast<size_t>(s.content_words)));
                sent += " " + content_word(s, t);
            }
            doc.push_back(std::move(sent));
        }
    }
    return c;
}

std::vector<ClassifyExample> gen_classify_data(const SyntheticSpec& s, int64_t n, uint64_t seed) {
    validate(s);
    Pcg32 rng(derive_seed(seed, "classify"), 0);
    std::vector<ClassifyExample> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        ClassifyExample ex;
        ex.label = static_cast<int>(pick(rng, static_cast<size_t>(s.classes)));
        int64_t len = sentence_len(s, rng);
        for (int64_t j = 0; j < len; ++j) ex.words.push_back(content_word(s, filler(s, rng)));
        ex.words[pick(rng, static_cast<size_t>(len))] =
            content_word(s, marker_index(s, ex.label));
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<SpanExample> gen_span_data(const SyntheticSpec& s, int64_t n, uint64_t seed) {
    validate(s);
    Pcg32 rng(derive_seed(seed, "span"), 0);
    std::vector<SpanExample> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        SpanExample ex;
        int64_t len = sentence_len(s, rng);
        for (int64_t j = 0; j < len; ++j) ex.words.push_back(content_word(s, filler(s, rng)));
        int64_t span_len = 1 + static_cast<int64_t>(
                                   pick(rng, static_cast<size_t>(std::min(s.span_max, len))));
        ex.start = static_cast<int64_t>(pick(rng, static_cast<size_t>(len - span_len + 1)));
        ex.end = ex.start + span_len - 1;
        for (int64_t p = ex.start; p <= ex.end; ++p)
            ex.words[static_cast<size_t>(p)] = content_word(s, answer_index(s));
        out.push_back(std::move(ex));
    }
    return out;
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream ss(text);
    std::vector<std::string> out;
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

int64_t parse_int(const std::string& text, const char* what) {
    try {
        size_t used = 0;
        long long v = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ContractError(std::string("labeled data: bad ") + what + " '" + text + "'");
    }
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open labeled data file " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

void save_classify_data(const std::vector<ClassifyExample>& xs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write labeled data file " + path);
    for (const auto& ex : xs) {
        out << ex.label << "\t";
        for (size_t i = 0; i < ex.words.size(); ++i) out << (i ? " " : "") << ex.words[i];
        out << "\n";
    }
}

std::vector<ClassifyExample> load_classify_data(const std::string& path) {
    std::vector<ClassifyExample> out;
    for (const auto& line : read_lines(path)) {
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ContractError("classify record needs 'label<TAB>words': " + line);
        ClassifyExample ex;
        ex.label = static_cast<int>(parse_int(line.substr(0, tab), "label"));
        ex.words = split_words(line.substr(tab + 1));
        if (ex.label < 0 || ex.words.empty())
            throw ContractError("classify record out of range: " + line);
        out.push_back(std::move(ex));
    }
    return out;
}

void save_span_data(const std::vector<SpanExample>& xs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write labeled data file " + path);
    for (const auto& ex : xs) {
        out << ex.start << "\t" << ex.end << "\t";
        for (size_t i = 0; i < ex.words.size(); ++i) out << (i ? " " : "") << ex.words[i];
        out << "\n";
    }
}

std::vector<SpanExample> load_span_data(const std::string& path) {
    std::vector<SpanExample> out;
    for (const auto& line : read_lines(path)) {
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw ContractError("span record needs 'start<TAB>end<TAB>words': " + line);
        SpanExample ex;
        ex.start = parse_int(line.substr(0, t1), "start");
        ex.end = parse_int(line.substr(t1 + 1, t2 - t1 - 1), "end");
        ex.words = split_words(line.substr(t2 + 1));
        if (ex.start < 0 || ex.end < ex.start ||
            ex.end >= static_cast<int64_t>(ex.words.size()))
            throw ContractError("span record labels out of range: " + line);
        out.push_back(std::move(ex));
    }
    return out;
}

double bigram_oracle_accuracy(const SyntheticSpec& s, uint64_t seed,
                              const std::vector<PretrainExample>& masked, const Vocab& v) {
    auto succ = successor_permutation(s, seed);
    std::vector<int64_t> pred(succ.size());
    for (size_t i = 0; i < succ.size(); ++i) pred[static_cast<size_t>(succ[i])] = int64_t(i);

    int64_t hits = 0, total = 0;
    for (const auto& ex : masked) {
        // reconstruct the pre-mask sequence: labels hold the original ids
        std::vector<int> orig = ex.tokens;
        for (size_t k = 0; k < ex.mlm_positions.size(); ++k)
            orig[static_cast<size_t>(ex.mlm_positions[k])] = ex.mlm_labels[k];
        for (size_t k = 0; k < ex.mlm_positions.size(); ++k) {
            auto p = static_cast<size_t>(ex.mlm_positions[k]);
            int left = p > 0 ? orig[p - 1] : Vocab::kPad;
            int right = p + 1 < orig.size() ? orig[p + 1] : Vocab::kPad;
            int guess = -1;
            if (!v.is_special(left))
                guess = Vocab::kNumSpecial +
                        static_cast<int>(succ[static_cast<size_t>(left - Vocab::kNumSpecial)]);
            else if (!v.is_special(right))
                guess = Vocab::kNumSpecial +
                        static_cast<int>(pred[static_cast<size_t>(right - Vocab::kNumSpecial)]);
            hits += guess == ex.mlm_labels[k];
            ++total;
        }
    }
    if (total == 0) throw ContractError("oracle accuracy needs at least one masked position");
    return double(hits) / double(total);
}

}  // namespace tblstm
