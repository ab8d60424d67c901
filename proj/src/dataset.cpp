#include "promptlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "promptlab/errors.hpp"

namespace promptlab {

std::string to_string(Split s) { return s == Split::dev ? "dev" : "val"; }

Split split_from_string(const std::string& s) {
    if (s == "dev") return Split::dev;
    if (s == "val") return Split::val;
    throw ConfigError("unknown split tag: " + s);
}

std::size_t Corpus::positives() const {
    return static_cast<std::size_t>(
        std::count_if(notes.begin(), notes.end(), [](const Note& n) { return n.label == 1; }));
}

double Corpus::prevalence() const {
    if (notes.empty()) throw LoadError("prevalence undefined for empty corpus");
    return static_cast<double>(positives()) / static_cast<double>(notes.size());
}

Corpus load_corpus(const std::filesystem::path& path, Split split) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open corpus file: " + path.string());

    Corpus corpus;
    corpus.name = path.stem().string();
    corpus.split = split;

    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed record: " + e.what());
        }
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("text") ||
            !rec.contains("label")) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) +
                            ": record must have id, text, label");
        }
        for (const auto& [key, _] : rec.items()) {
            if (key != "id" && key != "text" && key != "label") {
                std::cerr << "warning: " << path.string() << ":" << line_no
                          << ": ignoring unknown key \"" << key << "\"\n";
            }
        }
        Note note;
        if (!rec["id"].is_string() || !rec["text"].is_string() ||
            !rec["label"].is_number_integer()) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) +
                            ": wrong field type in record");
        }
        note.id = rec["id"].get<std::string>();
        note.text = rec["text"].get<std::string>();
        note.label = rec["label"].get<int>();
        if (note.label != 0 && note.label != 1) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) +
                            ": label must be 0 or 1");
        }
        if (note.text.empty()) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) + ": empty text");
        }
        if (!seen_ids.insert(note.id).second) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate id \"" + note.id + "\"");
        }
        corpus.notes.push_back(std::move(note));
    }
    if (corpus.notes.empty()) throw LoadError("empty corpus: " + path.string());
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write corpus file: " + path.string());
    for (const auto& note : corpus.notes) {
        nlohmann::ordered_json rec{{"id", note.id}, {"text", note.text}, {"label", note.label}};
        out << rec.dump() << "\n";
    }
}

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

TermModel builtin_term_model(const std::string& term) {
    if (term == "brain fog") {
        return TermModel{
            term,
            {"reports persistent brain fog since the infection",
             "describes memory lapses and difficulty concentrating",
             "notes word-finding problems and slowed thinking",
             "complains of mental cloudiness interfering with work",
             "cognitive fatigue worse in the afternoons"},
            {"denies brain fog or cognitive complaints",
             "no memory or concentration difficulties reported"},
            {"routine follow-up for hypertension management",
             "discussed diet and exercise goals",
             "medication list reviewed, no changes",
             "labs within normal limits"}};
    }
    if (term == "chest pain") {
        return TermModel{
            term,
            {"reports substernal chest pain on exertion",
             "describes chest tightness radiating to the left arm",
             "intermittent chest discomfort relieved by rest",
             "sharp chest pain worse with deep inspiration"},
            {"denies chest pain or pressure",
             "no chest discomfort at rest or with activity"},
            {"seen for annual wellness visit",
             "knee pain improving with physical therapy",
             "vaccinations up to date",
             "sleep quality discussed"}};
    }
    if (term == "shortness of breath" || term == "SOB") {
        return TermModel{
            term,
            {"reports shortness of breath climbing stairs",
             "describes dyspnea on exertion",
             "breathless after walking one block",
             "worsening exertional breathlessness over two weeks"},
            {"denies shortness of breath or wheezing",
             "no dyspnea at rest or with exertion"},
            {"presents for medication refill",
             "skin exam unremarkable",
             "discussed smoking cessation resources",
             "stable weight since last visit"}};
    }
    return TermModel{
        term,
        {"reports " + term + " over the past month",
         "describes ongoing " + term + " affecting daily activities",
         "notes intermittent " + term + " without clear trigger",
         "complains of worsening " + term},
        {"denies " + term, "no " + term + " reported at this visit"},
        {"routine follow-up visit, doing well",
         "preventive care reviewed",
         "no acute complaints today",
         "plan to recheck in three months"}};
}

namespace {

// mt19937_64 with modulo keeps the stream independent of stdlib distribution
// implementations.
std::size_t pick(std::mt19937_64& rng, std::size_t bound) {
    return static_cast<std::size_t>(rng() % bound);
}

}  // namespace

Corpus generate_synthetic_corpus(std::size_t n, double prevalence,
                                 const TermModel& term_model, std::uint64_t seed,
                                 Split split, const std::string& name) {
    if (n == 0) throw ConfigError("synthetic corpus size must be positive");
    if (!(prevalence > 0.0 && prevalence < 1.0)) {
        throw ConfigError("prevalence must lie strictly in (0,1)");
    }
    const std::size_t n_pos = round_half_up(static_cast<double>(n) * prevalence);
    if (n_pos < 1) throw ConfigError("infeasible prevalence: would yield zero positives");
    if (n_pos >= n) throw ConfigError("infeasible prevalence: would yield zero negatives");

    std::mt19937_64 rng(seed);

    std::vector<int> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
    // Fisher-Yates with the modulo picker, stable for a fixed seed.
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(labels[i], labels[pick(rng, i + 1)]);
    }

    Corpus corpus;
    corpus.name = name;
    corpus.split = split;
    corpus.notes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Note note;
        {
            std::ostringstream id;
            id << name << "-" << to_string(split) << "-";
            id.width(4);
            id.fill('0');
            id << i;
            note.id = id.str();
        }
        std::ostringstream text;
        text << "Patient " << term_model.distractors[pick(rng, term_model.distractors.size())]
             << ". ";
        if (labels[i] == 1) {
            text << "Patient "
                 << term_model.positive_phrasings[pick(rng, term_model.positive_phrasings.size())]
                 << ". ";
        } else {
            // Hedged negation in roughly a third of negatives keeps naive
            // matchers honest.
            if (pick(rng, 3) == 0 && !term_model.hedged_negatives.empty()) {
                text << "Patient "
                     << term_model.hedged_negatives[pick(rng, term_model.hedged_negatives.size())]
                     << ". ";
            }
        }
        text << "Also " << term_model.distractors[pick(rng, term_model.distractors.size())] << ".";
        note.text = text.str();
        note.label = labels[i];
        corpus.notes.push_back(std::move(note));
    }
    return corpus;
}

}  // namespace promptlab
