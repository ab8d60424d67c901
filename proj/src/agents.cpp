#include "promptlab/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "promptlab/errors.hpp"

namespace promptlab {

std::string to_string(PromptOrigin o) {
    switch (o) {
        case PromptOrigin::initial: return "initial";
        case PromptOrigin::sensitivity_synthesis: return "sensitivity_synthesis";
        case PromptOrigin::specificity_synthesis: return "specificity_synthesis";
        case PromptOrigin::revert_synthesis: return "revert_synthesis";
    }
    return "unknown";
}

PromptOrigin prompt_origin_from_string(const std::string& s) {
    if (s == "initial") return PromptOrigin::initial;
    if (s == "sensitivity_synthesis") return PromptOrigin::sensitivity_synthesis;
    if (s == "specificity_synthesis") return PromptOrigin::specificity_synthesis;
    if (s == "revert_synthesis") return PromptOrigin::revert_synthesis;
    throw LoadError("unknown prompt origin: " + s);
}

std::string to_string(Direction d) {
    return d == Direction::sensitivity ? "sensitivity" : "specificity";
}

std::string to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::clean: return "clean";
        case ParseStatus::normalized: return "normalized";
        case ParseStatus::retried: return "retried";
        case ParseStatus::defaulted: return "defaulted";
    }
    return "unknown";
}

std::string to_string(ErrorKind k) {
    return k == ErrorKind::false_positive ? "false_positive" : "false_negative";
}

std::string to_string(DirectiveKind k) {
    return k == DirectiveKind::switch_target_metric ? "switch_target_metric" : "rewrite_strategy";
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string short_hash(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%08llx", static_cast<unsigned long long>(h & 0xffffffffULL));
    return buf;
}

// First token after lowercasing and punctuation stripping, when it is a clean
// yes/no verdict.
std::optional<int> parse_verdict(const std::string& raw) {
    std::string s = lower(raw);
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c))) c = ' ';
    }
    std::istringstream tokens(s);
    std::string first;
    if (!(tokens >> first)) return std::nullopt;
    if (first == "yes") return 1;
    if (first == "no") return 0;
    return std::nullopt;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open file: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write file: " + path.string());
    out << text;
}

}  // namespace

Prompt make_initial_prompt(const std::string& term) {
    if (trim(term).empty()) throw ConfigError("initial prompt term is empty");
    Prompt p;
    p.text = trim(term);
    p.iteration = 0;
    p.origin = PromptOrigin::initial;
    p.id = "P0-" + short_hash(p.text);
    return p;
}

SOP default_sop(const std::string& term) {
    (void)term;
    SOP sop;
    sop.text =
        "You review clinical notes. Decide whether the note documents the symptom "
        "described by the classification instruction. Answer with exactly one word: "
        "yes or no. Answer yes only when the note affirmatively documents the symptom; "
        "answer no otherwise, including when the symptom is explicitly denied.";
    return sop;
}

SOP load_sop(const std::filesystem::path& path) {
    SOP sop;
    sop.text = trim(read_file(path));
    if (sop.text.empty()) throw LoadError("SOP file is empty: " + path.string());
    const std::string low = lower(sop.text);
    if (low.find("yes") == std::string::npos || low.find("no") == std::string::npos) {
        throw LoadError("SOP must state the yes/no output contract: " + path.string());
    }
    return sop;
}

AgentTemplates AgentTemplates::builtin() {
    AgentTemplates t;
    t.specialist =
        "# role: specialist\n"
        "{sop}\n"
        "\n"
        "Classification instruction:\n"
        "{prompt}\n";
    t.improver_sensitivity =
        "# role: improver direction: sensitivity\n"
        "{sop}\n"
        "\n"
        "The classifier using the instruction below missed a positive case (a false\n"
        "negative). Write a short critique naming the positive signals in the note\n"
        "that were overlooked, and what the instruction would have needed to catch\n"
        "them. Consider how a minimally different note would have been classified.\n"
        "If the error carries no actionable lesson, respond with exactly:\n"
        "NO_ACTIONABLE_CRITIQUE\n"
        "\n"
        "Current instruction:\n"
        "{prompt}\n";
    t.improver_specificity =
        "# role: improver direction: specificity\n"
        "{sop}\n"
        "\n"
        "The classifier using the instruction below flagged a negative case as\n"
        "positive (a false positive). Write a short critique naming the negative\n"
        "indicators in the note that were overlooked, and what exclusion the\n"
        "instruction lacked. Consider how a minimally different note would have been\n"
        "classified. If the error carries no actionable lesson, respond with exactly:\n"
        "NO_ACTIONABLE_CRITIQUE\n"
        "\n"
        "Current instruction:\n"
        "{prompt}\n";
    t.summarizer_sensitivity =
        "# role: summarizer direction: sensitivity\n"
        "{sop}\n"
        "\n"
        "Rewrite the classification instruction below by expanding its detection\n"
        "features: enrich it with patterns that capture the positive signals named\n"
        "in the critiques, keeping existing correct behavior. Respond with the new\n"
        "instruction text only.\n"
        "\n"
        "Current instruction:\n"
        "{prompt}\n"
        "\n"
        "Critiques of missed positives:\n"
        "{critiques}\n"
        "{failed_prompt}"
        "{guidance}";
    t.summarizer_specificity =
        "# role: summarizer direction: specificity\n"
        "{sop}\n"
        "\n"
        "Rewrite the classification instruction below by tightening its constraints:\n"
        "introduce exclusion rules and negative indicators for the failure causes\n"
        "named in the critiques, keeping existing correct behavior. Respond with the\n"
        "new instruction text only.\n"
        "\n"
        "Current instruction:\n"
        "{prompt}\n"
        "\n"
        "Critiques of false positives:\n"
        "{critiques}\n"
        "{failed_prompt}"
        "{guidance}";
    t.guiding =
        "# role: guiding\n"
        "{sop}\n"
        "\n"
        "Development performance has stopped improving. Decide whether optimization\n"
        "should switch its target metric or rewrite its refinement strategy. Respond\n"
        "with a first line of either\n"
        "KIND: switch_target_metric\n"
        "or\n"
        "KIND: rewrite_strategy\n"
        "followed by a short directive for the next refinement.\n";
    return t;
}

AgentTemplates AgentTemplates::load(const std::filesystem::path& dir) {
    AgentTemplates t;
    t.specialist = read_file(dir / "specialist.txt");
    t.improver_sensitivity = read_file(dir / "improver_sensitivity.txt");
    t.improver_specificity = read_file(dir / "improver_specificity.txt");
    t.summarizer_sensitivity = read_file(dir / "summarizer_sensitivity.txt");
    t.summarizer_specificity = read_file(dir / "summarizer_specificity.txt");
    t.guiding = read_file(dir / "guiding.txt");
    return t;
}

void AgentTemplates::write(const std::filesystem::path& dir) const {
    write_file(dir / "specialist.txt", specialist);
    write_file(dir / "improver_sensitivity.txt", improver_sensitivity);
    write_file(dir / "improver_specificity.txt", improver_specificity);
    write_file(dir / "summarizer_sensitivity.txt", summarizer_sensitivity);
    write_file(dir / "summarizer_specificity.txt", summarizer_specificity);
    write_file(dir / "guiding.txt", guiding);
}

std::optional<RoleMarker> parse_role_marker(const std::string& system_text) {
    const std::string prefix = "# role: ";
    if (system_text.rfind(prefix, 0) != 0) return std::nullopt;
    const auto eol = system_text.find('\n');
    const std::string line = system_text.substr(prefix.size(), eol - prefix.size());
    std::istringstream tokens(line);
    RoleMarker marker;
    tokens >> marker.role;
    std::string word;
    while (tokens >> word) {
        if (word == "direction:") {
            std::string dir;
            tokens >> dir;
            if (dir == "sensitivity") marker.direction = Direction::sensitivity;
            else if (dir == "specificity") marker.direction = Direction::specificity;
        }
    }
    if (marker.role.empty()) return std::nullopt;
    return marker;
}

std::string render_note_block(const Note& note) {
    return "[note:" + note.id + "]\n" + note.text;
}

std::optional<std::string> parse_note_id(const std::string& user_text) {
    const std::string prefix = "[note:";
    const auto start = user_text.find(prefix);
    if (start == std::string::npos) return std::nullopt;
    const auto end = user_text.find(']', start);
    if (end == std::string::npos) return std::nullopt;
    return user_text.substr(start + prefix.size(), end - start - prefix.size());
}

std::string render_critique_line(const Critique& c) {
    return "- [note:" + c.note_id + "] " + replace_all(c.text, "\n", " ");
}

std::size_t count_critique_lines(const std::string& text) {
    std::size_t count = 0;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("- [note:", 0) == 0) ++count;
    }
    return count;
}

AgentRunner::AgentRunner(AgentTemplates templates, std::shared_ptr<Backend> backend)
    : templates_(std::move(templates)), backend_(std::move(backend)) {}

Prediction AgentRunner::classify(const Prompt& prompt, const SOP& sop, const Note& note) const {
    ModelRequest request;
    request.system_text =
        replace_all(replace_all(templates_.specialist, "{sop}", sop.text), "{prompt}", prompt.text);
    request.user_text = render_note_block(note);

    Prediction prediction;
    prediction.note_id = note.id;

    ModelResponse response = backend_->complete(request);
    prediction.raw_text = response.text;
    if (auto verdict = parse_verdict(response.text)) {
        prediction.label = *verdict;
        const std::string trimmed = trim(response.text);
        prediction.parse_status =
            (trimmed == "yes" || trimmed == "no") ? ParseStatus::clean : ParseStatus::normalized;
        return prediction;
    }

    ModelRequest retry = request;
    retry.user_text += "\n\nAnswer with exactly one word: yes or no.";
    ModelResponse second = backend_->complete(retry);
    if (auto verdict = parse_verdict(second.text)) {
        prediction.label = *verdict;
        prediction.raw_text = second.text;
        prediction.parse_status = ParseStatus::retried;
        return prediction;
    }
    prediction.label = 0;
    prediction.parse_status = ParseStatus::defaulted;
    return prediction;
}

Critique AgentRunner::critique(const Prompt& prompt, const SOP& sop, const Note& note,
                               ErrorKind kind) const {
    const std::string& tmpl = kind == ErrorKind::false_negative ? templates_.improver_sensitivity
                                                                : templates_.improver_specificity;
    ModelRequest request;
    request.system_text = replace_all(replace_all(tmpl, "{sop}", sop.text), "{prompt}", prompt.text);
    request.user_text = render_note_block(note);

    ModelResponse response = backend_->complete(request);
    Critique c;
    c.note_id = note.id;
    c.error_kind = kind;
    c.text = trim(response.text);
    c.actionable = !c.text.empty() && c.text != kNoActionableCritique;
    return c;
}

Prompt AgentRunner::synthesize(const std::vector<Critique>& critiques, const Prompt& base,
                               const SOP& sop, Direction direction, int next_iteration,
                               const std::optional<Prompt>& failed_example,
                               const std::optional<GuidanceDirective>& guidance) const {
    if (critiques.empty()) throw ConfigError("nothing to synthesize: empty critique list");
    const ErrorKind expected_kind = direction == Direction::sensitivity
                                        ? ErrorKind::false_negative
                                        : ErrorKind::false_positive;
    for (const auto& c : critiques) {
        if (!c.actionable) throw ConfigError("non-actionable critique reached synthesize");
        if (c.error_kind != expected_kind) {
            throw ConfigError("critique kind does not match synthesis direction");
        }
    }
    if (trim(base.text).empty()) throw ConfigError("synthesize: base prompt is empty");

    std::ostringstream critique_block;
    for (const auto& c : critiques) critique_block << render_critique_line(c) << "\n";

    std::string failed_block;
    if (failed_example) {
        failed_block =
            "\nA previous revision failed and must not be repeated. Do not reproduce "
            "this instruction or its approach:\n---\n" +
            failed_example->text + "\n---\n";
    }
    std::string guidance_block;
    if (guidance && guidance->kind == DirectiveKind::rewrite_strategy) {
        guidance_block = "\nStrategy guidance:\n" + guidance->text + "\n";
    }

    const std::string& tmpl = direction == Direction::sensitivity
                                  ? templates_.summarizer_sensitivity
                                  : templates_.summarizer_specificity;
    ModelRequest request;
    request.system_text = replace_all(
        replace_all(
            replace_all(replace_all(replace_all(tmpl, "{sop}", sop.text), "{prompt}", base.text),
                        "{critiques}", critique_block.str()),
            "{failed_prompt}", failed_block),
        "{guidance}", guidance_block);
    request.user_text = "Produce the revised classification instruction.";

    ModelResponse response = backend_->complete(request);
    Prompt next;
    next.text = trim(response.text);
    if (next.text.empty()) throw ResponseParseError("summarizer returned an empty prompt");
    next.iteration = next_iteration;
    next.origin = failed_example ? PromptOrigin::revert_synthesis
                                 : (direction == Direction::sensitivity
                                        ? PromptOrigin::sensitivity_synthesis
                                        : PromptOrigin::specificity_synthesis);
    next.parent_id = base.id;
    next.id = "P" + std::to_string(next_iteration) + "-" + short_hash(next.text);
    return next;
}

GuidanceDirective AgentRunner::guide(const std::vector<double>& dev_f1_history,
                                     int triggered_at) const {
    if (dev_f1_history.size() < 2) {
        throw ConfigError("guide requires at least 2 completed iterations");
    }
    ModelRequest request;
    request.system_text = replace_all(templates_.guiding, "{sop}", "");
    std::ostringstream history;
    history << "Development F1 by iteration:\n";
    for (std::size_t t = 0; t < dev_f1_history.size(); ++t) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", dev_f1_history[t]);
        history << t << ": " << buf << "\n";
    }
    request.user_text = history.str();

    ModelResponse response = backend_->complete(request);
    GuidanceDirective directive;
    directive.triggered_at = triggered_at;
    std::istringstream lines(response.text);
    std::string line;
    bool kind_found = false;
    std::ostringstream body;
    while (std::getline(lines, line)) {
        if (!kind_found && line.rfind("KIND:", 0) == 0) {
            const std::string value = trim(line.substr(5));
            if (value == "switch_target_metric") {
                directive.kind = DirectiveKind::switch_target_metric;
                kind_found = true;
                continue;
            }
            if (value == "rewrite_strategy") {
                directive.kind = DirectiveKind::rewrite_strategy;
                kind_found = true;
                continue;
            }
        }
        body << line << "\n";
    }
    directive.text = trim(body.str());
    if (!kind_found) directive.kind = DirectiveKind::rewrite_strategy;
    return directive;
}

}  // namespace promptlab
