#include "tblstm/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tblstm {

namespace {

// uniform index in [0, n)
size_t pick(Pcg32& rng, size_t n) { return static_cast<size_t>(rng.next_double() * double(n)); }

std::vector<int> parse_int_list(const std::string& field, const std::string& what) {
    std::vector<int> out;
    std::istringstream ss(field);
    std::string item;
    while (ss >> item) {
        try {
            size_t used = 0;
            int v = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ContractError("example record: bad integer '" + item + "' in " + what);
        }
    }
    return out;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open corpus file " + path);
    Corpus c;
    std::vector<std::string> doc;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) {
            if (!doc.empty()) c.docs.push_back(std::move(doc));
            doc.clear();
        } else {
            doc.push_back(line);
        }
    }
    if (!doc.empty()) c.docs.push_back(std::move(doc));
    return c;
}

std::string corpus_to_string(const Corpus& c) {
    std::string out;
    for (size_t d = 0; d < c.docs.size(); ++d) {
        if (d) out += "\n";
        for (const auto& s : c.docs[d]) {
            out += s;
            out += "\n";
        }
    }
    return out;
}

void save_corpus(const Corpus& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write corpus file " + path);
    out << corpus_to_string(c);
}

Vocab build_vocab(const Corpus& c, int max_size) {
    if (max_size < Vocab::kNumSpecial)
        throw ConfigError("vocab size " + std::to_string(max_size) + " cannot hold the " +
                          std::to_string(Vocab::kNumSpecial) + " reserved tokens");
    std::map<std::string, int64_t> counts;  // ordered: deterministic tie-breaks
    std::set<char> alphabet;
    for (const auto& doc : c.docs)
        for (const auto& sent : doc) {
            std::istringstream ss(sent);
            std::string w;
            while (ss >> w) {
                ++counts[w];
                for (char ch : w) alphabet.insert(ch);
            }
        }

    Vocab v = Vocab::with_specials();
    // single characters first, both as word starts and continuations, so any
    // word over the seen alphabet segments without dead ends
    for (char ch : alphabet)
        if (v.size() < max_size && v.id_of(std::string(1, ch)) < 0) v.add(std::string(1, ch));
    for (char ch : alphabet)
        if (v.size() < max_size) v.add("##" + std::string(1, ch));

    std::vector<std::pair<std::string, int64_t>> by_freq(counts.begin(), counts.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [word, n] : by_freq) {
        (void)n;
        if (v.size() >= max_size) break;
        if (v.id_of(word) < 0) v.add(word);
    }
    return v;
}

SentencePair sample_sentence_pair(const Corpus& c, Pcg32& rng) {
    std::vector<size_t> nonempty, multi;
    for (size_t i = 0; i < c.docs.size(); ++i) {
        if (!c.docs[i].empty()) nonempty.push_back(i);
        if (c.docs[i].size() >= 2) multi.push_back(i);
    }
    if (nonempty.size() < 2)
        throw ConfigError("sentence-pair sampling needs at least two documents, corpus has " +
                          std::to_string(nonempty.size()));
    if (multi.empty())
        throw ConfigError("sentence-pair sampling needs a document with two sentences");

    SentencePair p;
    p.is_next = rng.next_double() < 0.5;
    if (p.is_next) {
        const auto& doc = c.docs[multi[pick(rng, multi.size())]];
        size_t i = pick(rng, doc.size() - 1);
        p.a = doc[i];
        p.b = doc[i + 1];
    } else {
        size_t da = nonempty[pick(rng, nonempty.size())];
        size_t db = da;
        while (db == da) db = nonempty[pick(rng, nonempty.size())];
        p.a = c.docs[da][pick(rng, c.docs[da].size())];
        p.b = c.docs[db][pick(rng, c.docs[db].size())];
    }
    return p;
}

PretrainExample build_pretrain_example(const Tokenized& a, const Tokenized& b, bool is_next,
                                       int64_t max_len) {
    if (max_len < 5)
        throw ConfigError("max_len " + std::to_string(max_len) +
                          " cannot hold [CLS] x1 [SEP] x2 [SEP]");
    if (a.ids.empty() || b.ids.empty())
        throw ContractError("both pair segments need at least one token");

    std::vector<int> ta = a.ids, tb = b.ids;
    while (static_cast<int64_t>(3 + ta.size() + tb.size()) > max_len) {
        if (tb.size() > 1) tb.pop_back();
        else ta.pop_back();  // guaranteed to end: max_len >= 5 fits 1+1
    }

    PretrainExample ex;
    ex.tokens.reserve(3 + ta.size() + tb.size());
    ex.tokens.push_back(Vocab::kCls);
    ex.segments.push_back(0);
    for (int t : ta) {
        ex.tokens.push_back(t);
        ex.segments.push_back(0);
    }
    ex.tokens.push_back(Vocab::kSep);
    ex.segments.push_back(0);
    for (int t : tb) {
        ex.tokens.push_back(t);
        ex.segments.push_back(1);
    }
    ex.tokens.push_back(Vocab::kSep);
    ex.segments.push_back(1);
    ex.nsp_label = is_next ? 1 : 0;
    return ex;
}

bool whole_word_mask(PretrainExample& ex, const Vocab& v, Pcg32& rng, double mask_rate,
                     bool per_piece) {
    // group maskable positions into whole words; a continuation piece joins
    // the group only when it is adjacent to it in the sequence
    std::vector<std::vector<int>> words;
    int64_t maskable = 0;
    for (size_t p = 0; p < ex.tokens.size(); ++p) {
        int id = ex.tokens[p];
        if (v.is_special(id)) continue;
        ++maskable;
        bool continues = !v.begins_word(id) && !words.empty() &&
                         words.back().back() == static_cast<int>(p) - 1;
        if (continues) words.back().push_back(static_cast<int>(p));
        else words.push_back({static_cast<int>(p)});
    }
    if (maskable == 0) return false;

    for (size_t i = words.size(); i > 1; --i) {
        size_t j = pick(rng, i);
        std::swap(words[i - 1], words[j]);
    }

    auto random_content_id = [&] {
        return Vocab::kNumSpecial +
               static_cast<int>(pick(rng, static_cast<size_t>(v.size() - Vocab::kNumSpecial)));
    };

    std::vector<std::pair<int, int>> hits;  // (position, original id)
    int64_t covered = 0;
    for (size_t w = 0; w < words.size() && double(covered) < mask_rate * double(maskable); ++w) {
        double word_draw = per_piece ? 0.0 : rng.next_double();
        for (int p : words[w]) {
            double u = per_piece ? rng.next_double() : word_draw;
            hits.emplace_back(p, ex.tokens[static_cast<size_t>(p)]);
            if (u < 0.8) ex.tokens[static_cast<size_t>(p)] = Vocab::kMask;
            else if (u < 0.9) ex.tokens[static_cast<size_t>(p)] = random_content_id();
            // else: keep the original token; the label still marks it
        }
        covered += static_cast<int64_t>(words[w].size());
    }

    std::sort(hits.begin(), hits.end());
    ex.mlm_positions.clear();
    ex.mlm_labels.clear();
    for (const auto& [p, id] : hits) {
        ex.mlm_positions.push_back(p);
        ex.mlm_labels.push_back(id);
    }
    return true;
}

std::string example_to_line(const PretrainExample& ex) {
    std::ostringstream os;
    auto list = [&](const std::vector<int>& xs) {
        for (size_t i = 0; i < xs.size(); ++i) os << (i ? " " : "") << xs[i];
    };
    os << ex.nsp_label << "\t";
    list(ex.tokens);
    os << "\t";
    list(ex.segments);
    os << "\t";
    list(ex.mlm_positions);
    os << "\t";
    list(ex.mlm_labels);
    return os.str();
}

PretrainExample example_from_line(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (fields.size() != 5)
        throw ContractError("example record needs 5 tab-separated fields, got " +
                            std::to_string(fields.size()));
    PretrainExample ex;
    auto nsp = parse_int_list(fields[0], "nsp_label");
    if (nsp.size() != 1 || (nsp[0] != 0 && nsp[0] != 1))
        throw ContractError("example record: nsp_label must be a single 0 or 1");
    ex.nsp_label = nsp[0];
    ex.tokens = parse_int_list(fields[1], "tokens");
    ex.segments = parse_int_list(fields[2], "segments");
    ex.mlm_positions = parse_int_list(fields[3], "mlm_positions");
    ex.mlm_labels = parse_int_list(fields[4], "mlm_labels");
    if (ex.tokens.empty()) throw ContractError("example record: empty token list");
    if (ex.tokens.size() != ex.segments.size())
        throw ContractError("example record: tokens and segments lengths differ");
    if (ex.mlm_positions.size() != ex.mlm_labels.size())
        throw ContractError("example record: positions and labels lengths differ");
    for (int p : ex.mlm_positions)
        if (p < 0 || p >= static_cast<int>(ex.tokens.size()))
            throw ContractError("example record: mlm position " + std::to_string(p) +
                                " outside sequence");
    return ex;
}

std::vector<PretrainExample> sample_pretrain_examples(const Corpus& c, const Vocab& v, Pcg32& rng,
                                                      int64_t n, int64_t max_len, double mask_rate,
                                                      bool per_piece) {
    std::vector<PretrainExample> out;
    out.reserve(static_cast<size_t>(n));
    while (static_cast<int64_t>(out.size()) < n) {
        auto pair = sample_sentence_pair(c, rng);
        auto ta = tokenize(pair.a, v);
        auto tb = tokenize(pair.b, v);
        if (ta.ids.empty() || tb.ids.empty()) continue;
        auto ex = build_pretrain_example(ta, tb, pair.is_next, max_len);
        if (!whole_word_mask(ex, v, rng, mask_rate, per_piece)) continue;
        out.push_back(std::move(ex));
    }
    return out;
}

SingleSegment build_single_segment(const Tokenized& a, int64_t max_len) {
    if (max_len < 3)
        throw ConfigError("max_len " + std::to_string(max_len) + " cannot hold [CLS] x [SEP]");
    if (a.ids.empty()) throw ContractError("single-segment input needs at least one token");
    std::vector<int> t = a.ids;
    if (static_cast<int64_t>(t.size()) > max_len - 2) t.resize(static_cast<size_t>(max_len - 2));
    SingleSegment s;
    s.tokens.push_back(Vocab::kCls);
    for (int id : t) s.tokens.push_back(id);
    s.tokens.push_back(Vocab::kSep);
    s.segments.assign(s.tokens.size(), 0);
    return s;
}

Batch make_batch(const std::vector<PretrainExample>& examples, int64_t max_len) {
    if (examples.empty()) throw ContractError("batch needs at least one example");
    Batch b;
    b.examples = examples;
    for (const auto& ex : b.examples) {
        auto len = static_cast<int64_t>(ex.tokens.size());
        if (len == 0) throw ContractError("batch contains an empty example");
        if (len > max_len)
            throw ContractError("example of length " + std::to_string(len) +
                                " exceeds max_len " + std::to_string(max_len));
        b.padded_len = std::max(b.padded_len, len);
        b.valid_lens.push_back(len);
    }
    for (auto& ex : b.examples) {
        ex.tokens.resize(static_cast<size_t>(b.padded_len), Vocab::kPad);
        ex.segments.resize(static_cast<size_t>(b.padded_len), 0);
    }
    return b;
}

}  // namespace tblstm
