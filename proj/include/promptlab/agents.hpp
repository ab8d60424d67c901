#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "promptlab/dataset.hpp"
#include "promptlab/gateway.hpp"

namespace promptlab {

enum class PromptOrigin { initial, sensitivity_synthesis, specificity_synthesis, revert_synthesis };
enum class Direction { sensitivity, specificity };
enum class ParseStatus { clean, normalized, retried, defaulted };
enum class ErrorKind { false_positive, false_negative };
enum class DirectiveKind { switch_target_metric, rewrite_strategy };

std::string to_string(PromptOrigin o);
std::string to_string(Direction d);
std::string to_string(ParseStatus s);
std::string to_string(ErrorKind k);
std::string to_string(DirectiveKind k);
PromptOrigin prompt_origin_from_string(const std::string& s);

struct Prompt {
    std::string id;
    int iteration = 0;
    std::string text;
    PromptOrigin origin = PromptOrigin::initial;
    std::optional<std::string> parent_id;
};

// Bare symptom term becomes the whole initial prompt; task framing lives in
// the SOP.
Prompt make_initial_prompt(const std::string& term);

struct SOP {
    std::string text;
};

// Validates that the output-format contract (the yes/no answer tokens) is
// present.
SOP load_sop(const std::filesystem::path& path);
SOP default_sop(const std::string& term);

struct Prediction {
    std::string note_id;
    int label = 0;
    std::string raw_text;
    ParseStatus parse_status = ParseStatus::clean;
};

struct Critique {
    std::string note_id;
    ErrorKind error_kind = ErrorKind::false_negative;
    std::string text;
    bool actionable = true;
};

struct GuidanceDirective {
    DirectiveKind kind = DirectiveKind::rewrite_strategy;
    std::string text;
    int triggered_at = 0;
};

// Role-prompt templates with {sop} {prompt} {note} {critiques} {failed_prompt}
// {guidance} placeholders. Each template opens with a "# role:" marker line
// that the simulated backend keys on.
struct AgentTemplates {
    std::string specialist;
    std::string improver_sensitivity;
    std::string improver_specificity;
    std::string summarizer_sensitivity;
    std::string summarizer_specificity;
    std::string guiding;

    static AgentTemplates builtin();
    static AgentTemplates load(const std::filesystem::path& dir);
    void write(const std::filesystem::path& dir) const;
};

// Role marker parsed from a request's system text.
struct RoleMarker {
    std::string role;  // specialist | improver | summarizer | guiding
    std::optional<Direction> direction;
};
std::optional<RoleMarker> parse_role_marker(const std::string& system_text);

// How a note is rendered into the user message: "[note:<id>]" header line,
// then the note text. The sim backend recovers the id from this header.
std::string render_note_block(const Note& note);
std::optional<std::string> parse_note_id(const std::string& user_text);

// One critique line inside a summarizer request.
std::string render_critique_line(const Critique& c);
std::size_t count_critique_lines(const std::string& text);

class AgentRunner {
public:
    AgentRunner(AgentTemplates templates, std::shared_ptr<Backend> backend);

    // Yes/no classification with normalization, one clarification retry, and
    // a defaulted-negative fallback. Never throws on parse trouble.
    Prediction classify(const Prompt& prompt, const SOP& sop, const Note& note) const;

    Critique critique(const Prompt& prompt, const SOP& sop, const Note& note,
                      ErrorKind kind) const;

    // direction=sensitivity expands detection features; specificity tightens
    // constraints. failed_example switches origin to revert_synthesis and is
    // framed as a do-not-repeat negative example.
    Prompt synthesize(const std::vector<Critique>& critiques, const Prompt& base, const SOP& sop,
                      Direction direction, int next_iteration,
                      const std::optional<Prompt>& failed_example = std::nullopt,
                      const std::optional<GuidanceDirective>& guidance = std::nullopt) const;

    // Requires >= 2 completed iterations with non-improving dev F1 (the caller
    // enforces the trigger rule). triggered_at is the iteration the directive
    // will shape.
    GuidanceDirective guide(const std::vector<double>& dev_f1_history, int triggered_at) const;

    Backend& backend() const { return *backend_; }

private:
    AgentTemplates templates_;
    std::shared_ptr<Backend> backend_;
};

// Non-actionable marker token; improver responses equal to it (or empty) are
// filtered before synthesis.
inline constexpr const char* kNoActionableCritique = "NO_ACTIONABLE_CRITIQUE";

}  // namespace promptlab
