#include "tblstm/vocab.hpp"

#include <fstream>
#include <sstream>

namespace tblstm {

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw VocabError("cannot open vocab file " + path);
    Vocab v;
    std::string line;
    int id = 0;
    while (std::getline(in, line)) {
        if (line.empty()) throw VocabError("blank line at id " + std::to_string(id) + " in " + path);
        if (id < Vocab::kNumSpecial && line != Vocab::special_names()[static_cast<size_t>(id)])
            throw VocabError("vocab file " + path + " line " + std::to_string(id) +
                             " must be the reserved token " +
                             Vocab::special_names()[static_cast<size_t>(id)] + ", got '" + line +
                             "'");
        v.add(line);
        ++id;
    }
    if (v.size() < Vocab::kNumSpecial)
        throw VocabError("vocab file " + path + " ends before the reserved tokens");
    return v;
}

void save_vocab(const Vocab& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw VocabError("cannot write vocab file " + path);
    for (int id = 0; id < v.size(); ++id) out << v.token(id) << "\n";
}

Tokenized tokenize(const std::string& text, const Vocab& v) {
    Tokenized out;
    std::istringstream ss(text);
    std::string word;
    while (ss >> word) {
        std::vector<int> pieces;
        size_t pos = 0;
        bool ok = true;
        while (pos < word.size()) {
            int found = -1;
            size_t take = 0;
            for (size_t len = word.size() - pos; len > 0; --len) {
                std::string cand = word.substr(pos, len);
                if (pos > 0) cand = "##" + cand;
                int id = v.id_of(cand);
                if (id >= 0 && !v.is_special(id)) {
                    found = id;
                    take = len;
                    break;
                }
            }
            if (found < 0) {
                ok = false;
                break;
            }
            pieces.push_back(found);
            pos += take;
        }
        if (!ok) {
            out.ids.push_back(Vocab::kUnk);
            out.begins.push_back(1);
        } else {
            for (size_t i = 0; i < pieces.size(); ++i) {
                out.ids.push_back(pieces[i]);
                out.begins.push_back(i == 0 ? 1 : 0);
            }
        }
    }
    return out;
}

}  // namespace tblstm
