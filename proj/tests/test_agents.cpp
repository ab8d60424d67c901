#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "promptlab/agents.hpp"
#include "promptlab/errors.hpp"
#include "support/scripted_backend.hpp"

using namespace promptlab;
using promptlab::testing::ScriptedBackend;
namespace fs = std::filesystem;

namespace {

// Backend returning canned replies in order, for exercising the parser.
std::shared_ptr<ScriptedBackend> replies(std::vector<std::string> script) {
    auto index = std::make_shared<std::size_t>(0);
    auto queue = std::make_shared<std::vector<std::string>>(std::move(script));
    return std::make_shared<ScriptedBackend>(
        [index, queue](const RoleMarker&, const ModelRequest&) -> std::string {
            REQUIRE(*index < queue->size());
            return (*queue)[(*index)++];
        });
}

AgentRunner runner_with(std::shared_ptr<ScriptedBackend> backend) {
    return AgentRunner(AgentTemplates::builtin(), std::move(backend));
}

const Note kNote{"n-01", "Patient reports persistent brain fog.", 1};
const SOP kSop = default_sop("brain fog");

Critique actionable(const std::string& note_id, ErrorKind kind) {
    return {note_id, kind, "add coverage for " + note_id, true};
}

}  // namespace

TEST_CASE("initial prompt is the bare term with stable identity") {
    const Prompt p = make_initial_prompt("brain fog");
    CHECK(p.text == "brain fog");
    CHECK(p.iteration == 0);
    CHECK(p.origin == PromptOrigin::initial);
    CHECK_FALSE(p.parent_id.has_value());
    CHECK(p.id.rfind("P0-", 0) == 0);
    CHECK(p.id == make_initial_prompt("  brain fog  ").id);
    CHECK(p.id != make_initial_prompt("chest pain").id);
    CHECK_THROWS_AS(make_initial_prompt("   "), ConfigError);
}

TEST_CASE("sop loading enforces the output contract") {
    const auto dir = fs::temp_directory_path() / "promptlab_agents_tests";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "good.txt");
        out << "Decide and answer yes or no.\n";
    }
    CHECK(load_sop(dir / "good.txt").text == "Decide and answer yes or no.");
    {
        std::ofstream out(dir / "bad.txt");
        out << "Classify the note.\n";
    }
    CHECK_THROWS_AS(load_sop(dir / "bad.txt"), LoadError);
    {
        std::ofstream out(dir / "empty.txt");
    }
    CHECK_THROWS_AS(load_sop(dir / "empty.txt"), LoadError);
    CHECK_THROWS_AS(load_sop(dir / "missing.txt"), LoadError);
}

TEST_CASE("role markers round-trip through every builtin template") {
    const AgentTemplates t = AgentTemplates::builtin();
    const auto spec = parse_role_marker(t.specialist);
    REQUIRE(spec);
    CHECK(spec->role == "specialist");
    CHECK_FALSE(spec->direction);

    const auto imp = parse_role_marker(t.improver_sensitivity);
    REQUIRE(imp);
    CHECK(imp->role == "improver");
    CHECK(imp->direction == Direction::sensitivity);

    const auto sum = parse_role_marker(t.summarizer_specificity);
    REQUIRE(sum);
    CHECK(sum->role == "summarizer");
    CHECK(sum->direction == Direction::specificity);

    CHECK(parse_role_marker(t.guiding)->role == "guiding");
    CHECK_FALSE(parse_role_marker("no marker here"));
    CHECK_FALSE(parse_role_marker(""));
}

TEST_CASE("templates on disk round-trip exactly") {
    const auto dir = fs::temp_directory_path() / "promptlab_agents_tests" / "templates";
    fs::remove_all(dir);
    const AgentTemplates t = AgentTemplates::builtin();
    t.write(dir);
    const AgentTemplates loaded = AgentTemplates::load(dir);
    CHECK(loaded.specialist == t.specialist);
    CHECK(loaded.improver_sensitivity == t.improver_sensitivity);
    CHECK(loaded.improver_specificity == t.improver_specificity);
    CHECK(loaded.summarizer_sensitivity == t.summarizer_sensitivity);
    CHECK(loaded.summarizer_specificity == t.summarizer_specificity);
    CHECK(loaded.guiding == t.guiding);
    CHECK_THROWS_AS(AgentTemplates::load(dir / "nope"), LoadError);
}

TEST_CASE("repo templates match the builtin set") {
    const AgentTemplates repo = AgentTemplates::load(fs::path(PROMPTLAB_SOURCE_DIR) / "templates");
    const AgentTemplates t = AgentTemplates::builtin();
    CHECK(repo.specialist == t.specialist);
    CHECK(repo.improver_sensitivity == t.improver_sensitivity);
    CHECK(repo.improver_specificity == t.improver_specificity);
    CHECK(repo.summarizer_sensitivity == t.summarizer_sensitivity);
    CHECK(repo.summarizer_specificity == t.summarizer_specificity);
    CHECK(repo.guiding == t.guiding);
}

TEST_CASE("note blocks carry a recoverable id") {
    const std::string block = render_note_block(kNote);
    CHECK(block == "[note:n-01]\nPatient reports persistent brain fog.");
    CHECK(parse_note_id(block) == "n-01");
    CHECK_FALSE(parse_note_id("plain text"));
}

TEST_CASE("critique lines render one per line and are countable") {
    const Critique c{"n-07", ErrorKind::false_negative, "missed the\nhedge", true};
    CHECK(render_critique_line(c) == "- [note:n-07] missed the hedge");
    const std::string block = render_critique_line(c) + "\n" +
                              render_critique_line(actionable("n-08", ErrorKind::false_negative)) +
                              "\nnot a critique line\n";
    CHECK(count_critique_lines(block) == 2);
    CHECK(count_critique_lines("") == 0);
}

TEST_CASE("classify: clean, normalized, retried, defaulted") {
    const Prompt prompt = make_initial_prompt("brain fog");

    SUBCASE("clean verdicts") {
        auto r = runner_with(replies({"yes"}));
        const Prediction p = r.classify(prompt, kSop, kNote);
        CHECK(p.label == 1);
        CHECK(p.parse_status == ParseStatus::clean);
        CHECK(p.note_id == "n-01");
        auto r2 = runner_with(replies({"no"}));
        CHECK(r2.classify(prompt, kSop, kNote).label == 0);
    }

    SUBCASE("surrounding whitespace still counts as clean") {
        auto r = runner_with(replies({"  yes\n"}));
        const Prediction p = r.classify(prompt, kSop, kNote);
        CHECK(p.label == 1);
        CHECK(p.parse_status == ParseStatus::clean);
    }

    SUBCASE("decorated verdicts are normalized") {
        for (const std::string raw : {"Yes.", "YES, definitely", "no - the symptom is denied"}) {
            auto r = runner_with(replies({raw}));
            const Prediction p = r.classify(prompt, kSop, kNote);
            CHECK(p.parse_status == ParseStatus::normalized);
            CHECK(p.label == (std::tolower(raw[0]) == 'y' ? 1 : 0));
            CHECK(p.raw_text == raw);
        }
    }

    SUBCASE("one clarification retry") {
        auto backend = replies({"I think the patient has it", "yes"});
        auto r = runner_with(backend);
        const Prediction p = r.classify(prompt, kSop, kNote);
        CHECK(p.label == 1);
        CHECK(p.parse_status == ParseStatus::retried);
        REQUIRE(backend->log().size() == 2);
        CHECK(backend->log()[1].request.user_text.find(
                  "Answer with exactly one word: yes or no.") != std::string::npos);
        CHECK(backend->log()[0].request.system_text == backend->log()[1].request.system_text);
    }

    SUBCASE("unparseable after retry defaults to negative") {
        auto backend = replies({"unsure", "still unsure"});
        auto r = runner_with(backend);
        const Prediction p = r.classify(prompt, kSop, kNote);
        CHECK(p.label == 0);
        CHECK(p.parse_status == ParseStatus::defaulted);
        CHECK(backend->log().size() == 2);
    }

    SUBCASE("specialist request embeds sop, prompt, and note") {
        auto backend = replies({"yes"});
        auto r = runner_with(backend);
        r.classify(prompt, kSop, kNote);
        const auto& call = backend->log()[0];
        CHECK(call.role == "specialist");
        CHECK(call.request.system_text.find(kSop.text) != std::string::npos);
        CHECK(call.request.system_text.find("brain fog") != std::string::npos);
        CHECK(call.request.system_text.find("{") == std::string::npos);
        CHECK(call.request.user_text == render_note_block(kNote));
        CHECK(call.request.temperature == 0.0);
    }
}

TEST_CASE("critique routes by error kind and flags non-actionable output") {
    const Prompt prompt = make_initial_prompt("brain fog");

    auto backend = replies({"the note says mentally cloudy", "NO_ACTIONABLE_CRITIQUE", "  "});
    auto r = runner_with(backend);

    const Critique fn = r.critique(prompt, kSop, kNote, ErrorKind::false_negative);
    CHECK(fn.actionable);
    CHECK(fn.error_kind == ErrorKind::false_negative);
    CHECK(fn.note_id == "n-01");
    CHECK(backend->log()[0].role == "improver");
    CHECK(backend->log()[0].direction == Direction::sensitivity);

    const Critique marker = r.critique(prompt, kSop, kNote, ErrorKind::false_positive);
    CHECK_FALSE(marker.actionable);
    CHECK(backend->log()[1].direction == Direction::specificity);

    const Critique blank = r.critique(prompt, kSop, kNote, ErrorKind::false_negative);
    CHECK_FALSE(blank.actionable);
}

TEST_CASE("synthesize produces a versioned child prompt") {
    auto backend = replies({"Identify documented brain fog, including mental cloudiness."});
    auto r = runner_with(backend);
    const Prompt base = make_initial_prompt("brain fog");
    const std::vector<Critique> critiques{actionable("n-01", ErrorKind::false_negative),
                                          actionable("n-02", ErrorKind::false_negative)};

    const Prompt next = r.synthesize(critiques, base, kSop, Direction::sensitivity, 1);
    CHECK(next.iteration == 1);
    CHECK(next.origin == PromptOrigin::sensitivity_synthesis);
    CHECK(next.parent_id == base.id);
    CHECK(next.id.rfind("P1-", 0) == 0);
    CHECK(next.text == "Identify documented brain fog, including mental cloudiness.");

    const auto& call = backend->log()[0];
    CHECK(call.role == "summarizer");
    CHECK(call.direction == Direction::sensitivity);
    CHECK(call.request.system_text.find(base.text) != std::string::npos);
    CHECK(count_critique_lines(call.request.system_text) == 2);
    CHECK(call.request.system_text.find("n-01") != std::string::npos);
    CHECK(call.request.system_text.find("{") == std::string::npos);
}

TEST_CASE("synthesize enforces its preconditions") {
    auto r = runner_with(replies({"never reached"}));
    const Prompt base = make_initial_prompt("brain fog");

    CHECK_THROWS_AS(r.synthesize({}, base, kSop, Direction::sensitivity, 1), ConfigError);

    Critique filtered = actionable("n-01", ErrorKind::false_negative);
    filtered.actionable = false;
    CHECK_THROWS_AS(r.synthesize({filtered}, base, kSop, Direction::sensitivity, 1), ConfigError);

    // Kind/direction mismatch: a false positive cannot drive sensitivity work.
    CHECK_THROWS_AS(r.synthesize({actionable("n-01", ErrorKind::false_positive)}, base, kSop,
                                 Direction::sensitivity, 1),
                    ConfigError);

    auto blank = runner_with(replies({"   "}));
    CHECK_THROWS_AS(blank.synthesize({actionable("n-01", ErrorKind::false_negative)}, base, kSop,
                                     Direction::sensitivity, 1),
                    ResponseParseError);
}

TEST_CASE("revert synthesis frames the failed prompt as a negative example") {
    auto backend = replies({"Identify documented brain fog without overreach."});
    auto r = runner_with(backend);
    const Prompt base = make_initial_prompt("brain fog");
    Prompt failed;
    failed.id = "P2-deadbeef";
    failed.iteration = 2;
    failed.text = "Flag any note mentioning cognition.";
    failed.origin = PromptOrigin::sensitivity_synthesis;

    const Prompt next = r.synthesize({actionable("n-03", ErrorKind::false_negative)}, base, kSop,
                                     Direction::sensitivity, 3, failed);
    CHECK(next.origin == PromptOrigin::revert_synthesis);
    CHECK(next.parent_id == base.id);

    const std::string& wire = backend->log()[0].request.system_text;
    CHECK(wire.find("must not be repeated") != std::string::npos);
    CHECK(wire.find(failed.text) != std::string::npos);
    // The base prompt appears before the failed one.
    CHECK(wire.find(base.text) < wire.find(failed.text));
}

TEST_CASE("guidance text reaches synthesis only for rewrite_strategy") {
    const Prompt base = make_initial_prompt("brain fog");
    const std::vector<Critique> critiques{actionable("n-01", ErrorKind::false_negative)};

    auto backend = replies({"revised A", "revised B"});
    auto r = runner_with(backend);
    GuidanceDirective rewrite{DirectiveKind::rewrite_strategy, "try describing symptoms instead", 3};
    r.synthesize(critiques, base, kSop, Direction::sensitivity, 3, std::nullopt, rewrite);
    CHECK(backend->log()[0].request.system_text.find("try describing symptoms instead") !=
          std::string::npos);

    GuidanceDirective flip{DirectiveKind::switch_target_metric, "ignore me", 3};
    r.synthesize(critiques, base, kSop, Direction::sensitivity, 3, std::nullopt, flip);
    CHECK(backend->log()[1].request.system_text.find("ignore me") == std::string::npos);
}

TEST_CASE("guide parses the directive kind from the first line") {
    SUBCASE("switch directive") {
        auto backend = replies({"KIND: switch_target_metric\nspecificity is saturated"});
        auto r = runner_with(backend);
        const GuidanceDirective d = r.guide({0.5, 0.5, 0.4}, 3);
        CHECK(d.kind == DirectiveKind::switch_target_metric);
        CHECK(d.text == "specificity is saturated");
        CHECK(d.triggered_at == 3);
        CHECK(backend->log()[0].role == "guiding");
        CHECK(backend->log()[0].request.user_text.find("0.500000") != std::string::npos);
    }
    SUBCASE("rewrite directive") {
        auto r = runner_with(replies({"KIND: rewrite_strategy\nuse narrative phrasing"}));
        const GuidanceDirective d = r.guide({0.2, 0.2}, 2);
        CHECK(d.kind == DirectiveKind::rewrite_strategy);
        CHECK(d.text == "use narrative phrasing");
    }
    SUBCASE("malformed output defaults to rewrite_strategy") {
        auto r = runner_with(replies({"just do something else"}));
        const GuidanceDirective d = r.guide({0.2, 0.2}, 2);
        CHECK(d.kind == DirectiveKind::rewrite_strategy);
        CHECK(d.text == "just do something else");
    }
    SUBCASE("requires history") {
        auto r = runner_with(replies({"unused"}));
        CHECK_THROWS_AS(r.guide({0.5}, 1), ConfigError);
    }
}
