#include "promptlab/baseline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "promptlab/errors.hpp"

namespace promptlab {

namespace {

// Lowercase and collapse every whitespace run to a single space.
std::string normalize(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;  // also strips leading whitespace
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Word-boundary match: "sob" must not hit "sobbing".
bool contains_term(const std::string& text, const std::string& term) {
    std::size_t pos = 0;
    while ((pos = text.find(term, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
        const std::size_t end = pos + term.size();
        const bool right_ok = end >= text.size() || !is_word_char(text[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

Lexicon make_lexicon(const std::string& name, const std::vector<std::string>& terms) {
    Lexicon lexicon;
    lexicon.name = name;
    for (const auto& raw : terms) {
        const std::string term = normalize(raw);
        if (term.empty()) continue;
        if (std::find(lexicon.terms.begin(), lexicon.terms.end(), term) == lexicon.terms.end()) {
            lexicon.terms.push_back(term);
        }
    }
    if (lexicon.terms.empty()) throw LoadError("lexicon \"" + name + "\" has no terms");
    return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open lexicon file: " + path.string());
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        terms.push_back(line);
    }
    return make_lexicon(path.stem().string(), terms);
}

int lexicon_classify(const Lexicon& lexicon, const Note& note) {
    const std::string text = normalize(note.text);
    for (const auto& term : lexicon.terms) {
        if (contains_term(text, term)) return 1;
    }
    return 0;
}

Metrics lexicon_evaluate(const Lexicon& lexicon, const Corpus& corpus) {
    if (corpus.notes.empty()) throw ConfigError("lexicon_evaluate: empty corpus");
    std::vector<int> predictions;
    std::vector<int> labels;
    predictions.reserve(corpus.notes.size());
    labels.reserve(corpus.notes.size());
    for (const auto& note : corpus.notes) {
        predictions.push_back(lexicon_classify(lexicon, note));
        labels.push_back(note.label);
    }
    return metrics_from_counts(confusion(predictions, labels));
}

}  // namespace promptlab
