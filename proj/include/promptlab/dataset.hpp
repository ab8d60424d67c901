#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace promptlab {

enum class Split { dev, val };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Note {
    std::string id;
    std::string text;
    int label = 0;  // 0 or 1
};

// Immutable after load; note order is the file order and is stable across loads.
struct Corpus {
    std::string name;
    Split split = Split::dev;
    std::vector<Note> notes;

    std::size_t size() const { return notes.size(); }
    std::size_t positives() const;
    double prevalence() const;  // exact ratio, requires size() >= 1
};

// JSONL, one {"id","text","label"} record per line. Unknown keys are ignored
// (a warning goes to stderr). Throws LoadError with the offending line number.
Corpus load_corpus(const std::filesystem::path& path, Split split);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Phrase inventory used to plant detectable signal into synthetic notes.
struct TermModel {
    std::string term;
    std::vector<std::string> positive_phrasings;  // paraphrase families, 3-5 per term
    std::vector<std::string> hedged_negatives;    // "denies <term>" style traps
    std::vector<std::string> distractors;
};

// Built-in models for the three study symptoms; anything else gets a generic
// model derived from the bare term. All phrase lists are illustrative, not
// clinical vocabulary.
TermModel builtin_term_model(const std::string& term);

// Deterministic for a fixed seed; positive count is exactly
// round-half-up(n * prevalence). Throws ConfigError when that count is zero.
Corpus generate_synthetic_corpus(std::size_t n, double prevalence,
                                 const TermModel& term_model, std::uint64_t seed,
                                 Split split = Split::dev,
                                 const std::string& name = "synthetic");

// Half-up rounding used for the planted positive count.
std::size_t round_half_up(double x);

}  // namespace promptlab
