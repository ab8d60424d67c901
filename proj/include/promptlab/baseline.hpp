#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "promptlab/dataset.hpp"
#include "promptlab/metrics.hpp"

namespace promptlab {

// Terms are stored lowercase, whitespace-normalized, de-duplicated.
struct Lexicon {
    std::string name;
    std::vector<std::string> terms;
};

Lexicon make_lexicon(const std::string& name, const std::vector<std::string>& terms);

// Plain text, one term per line, '#' starts a comment.
Lexicon load_lexicon(const std::filesystem::path& path);

// 1 iff any term appears in the note text: case-insensitive, word-boundary
// delimited, whitespace-normalized. Deliberately negation-blind.
int lexicon_classify(const Lexicon& lexicon, const Note& note);

Metrics lexicon_evaluate(const Lexicon& lexicon, const Corpus& corpus);

}  // namespace promptlab
