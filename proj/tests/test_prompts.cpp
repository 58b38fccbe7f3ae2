#include "decoy/errors.hpp"
#include "decoy/prompts.hpp"
#include "decoy/text_util.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <set>

using namespace decoy;

namespace {

const std::string kDataDir = DECOY_TEST_DATA_DIR;

const TemplateSet& templates() {
    static TemplateSet set = TemplateSet::load(kDataDir + "/templates");
    return set;
}

AnonymizerDemo age_demo() { return AnonymizerDemo::load(kDataDir + "/demos", Attribute::age); }

AdversaryDemo adv_demo(Attribute a = Attribute::age) {
    return AdversaryDemo::load(kDataDir + "/demos", a);
}

RewriteSlot full_slot(const std::string& target, const std::string& truth,
                      const std::string& reasoning) {
    RewriteSlot s;
    s.target = target;
    s.truth = truth;
    s.reasoning = reasoning;
    return s;
}

bool has(const std::string& text, const std::string& needle) {
    return text.find(needle) != std::string::npos;
}

// No placeholder token may survive rendering.
void check_no_leftover_tokens(const std::vector<ChatMessage>& messages) {
    static const std::vector<std::string> tokens = {
        "WRONGLY_FORMATTED_TEXT", "REWRITTEN_TEXT", "ORIGINAL_TEXT", "TARGET_VALUE",
        "GROUND_TRUTH",           "EXPLANATION",    "USER_TEXT",
    };
    for (const auto& m : messages) {
        for (const auto& t : tokens) {
            INFO("token ", t, " left in: ", m.content.substr(0, 200));
            CHECK_FALSE(has(m.content, t));
        }
    }
}

}  // namespace

TEST_CASE("template set loads all seven templates with stable checksums") {
    const auto& set = templates();
    std::set<std::string> sums;
    for (TemplateName n :
         {TemplateName::anonymizer, TemplateName::adversary, TemplateName::format_fix,
          TemplateName::adversary_format_fix, TemplateName::utility_judge,
          TemplateName::utility_format_fix, TemplateName::equivalence_judge}) {
        const auto& tpl = set.get(n);
        CHECK_FALSE(tpl.system_text.empty());
        CHECK_FALSE(tpl.user_text.empty());
        CHECK(tpl.checksum.size() == 16);
        sums.insert(tpl.checksum);
    }
    CHECK(sums.size() == 7);
    CHECK(set.checksums().size() == 7);
    CHECK_THROWS_AS(TemplateSet::load("/nonexistent/templates"), Error);
}

TEST_CASE("bundled templates keep their distinctive wording") {
    const auto& set = templates();
    // Deliberate quirks of the source wording; a rewrite of the templates
    // should not slip through silently.
    CHECK(has(set.get(TemplateName::adversary).user_text, "in Fa list"));
    CHECK(has(set.get(TemplateName::adversary).user_text, "the authors ATTRIBUTE"));
    CHECK(has(set.get(TemplateName::format_fix).system_text, "an precise and helpful assistant"));
    CHECK(has(set.get(TemplateName::format_fix).user_text, "rephrease"));
    CHECK(has(set.get(TemplateName::format_fix).user_text,
              "You should only put it the exact format above"));

    // Role markers the mock scripts route on.
    CHECK(has(set.get(TemplateName::adversary).system_text, testsup::kAdversaryMarker));
    CHECK(has(set.get(TemplateName::anonymizer).system_text, testsup::kAnonymizerMarker));
    CHECK(has(set.get(TemplateName::format_fix).user_text, testsup::kRewriteFixMarker));
    CHECK(has(set.get(TemplateName::adversary_format_fix).user_text, testsup::kAdversaryFixMarker));
    CHECK(has(set.get(TemplateName::utility_judge).system_text, testsup::kUtilityMarker));
    CHECK(has(set.get(TemplateName::utility_format_fix).user_text, testsup::kUtilityFixMarker));
    CHECK(has(set.get(TemplateName::equivalence_judge).user_text, testsup::kEquivalenceMarker));
}

TEST_CASE("substitute_template") {
    SUBCASE("replaces bound tokens and leaves other text alone") {
        auto out = substitute_template("Guess the ATTRIBUTE now", {{"ATTRIBUTE", "age"}});
        CHECK(out == "Guess the age now");
    }
    SUBCASE("substituted values are not rescanned") {
        auto out = substitute_template("X: ATTRIBUTE", {{"ATTRIBUTE", "GROUND_TRUTH"}});
        CHECK(out == "X: GROUND_TRUTH");
    }
    SUBCASE("lines with unbound droppable tokens vanish") {
        auto out = substitute_template("keep\nReal ATTRIBUTE: GROUND_TRUTH\nend",
                                       {{"ATTRIBUTE", "age"}});
        CHECK(out == "keep\nend");
    }
    SUBCASE("empty bindings count as unbound") {
        auto out = substitute_template("a\nTarget: TARGET_VALUE\nb", {{"TARGET_VALUE", ""}});
        CHECK(out == "a\nb");
    }
    SUBCASE("unbound required tokens raise") {
        CHECK_THROWS_AS(substitute_template("the ATTRIBUTE", {}), UnboundPlaceholder);
        CHECK_THROWS_AS(substitute_template("text: USER_TEXT", {{"ATTRIBUTE", "age"}}),
                        UnboundPlaceholder);
    }
    SUBCASE("multiple tokens on one line") {
        auto out = substitute_template("GUESS vs GROUND_TRUTH",
                                       {{"GUESS", "a"}, {"GROUND_TRUTH", "b"}});
        CHECK(out == "a vs b");
    }
}

TEST_CASE("joined_display wording") {
    CHECK(joined_display({}) == "");
    CHECK(joined_display({Attribute::age}) == "age");
    CHECK(joined_display({Attribute::age, Attribute::gender}) == "age and gender");
    CHECK(joined_display({Attribute::age, Attribute::gender, Attribute::income_level}) ==
          "age, gender and income level");
}

TEST_CASE("demo files load for every attribute") {
    for (Attribute a : all_attributes()) {
        auto anon = AnonymizerDemo::load(kDataDir + "/demos", a);
        CHECK(anon.attribute == a);
        CHECK_FALSE(anon.comment.empty());
        CHECK_FALSE(anon.output_rewrite.empty());
        auto j = nlohmann::json::parse(anon.output_json());
        CHECK(j.size() == 2);
        CHECK(j.contains("explanation"));
        CHECK(j.contains("anonymized_comment"));

        auto adv = AdversaryDemo::load(kDataDir + "/demos", a);
        CHECK_FALSE(adv.output.empty());
        CHECK(has(adv.output, "Guess:"));
    }
    CHECK(demo_checksum(kDataDir + "/demos").size() == 16);
    CHECK_THROWS_AS(AnonymizerDemo::load("/nonexistent", Attribute::age), Error);
}

TEST_CASE("render_anonymizer: fully conditioned single attribute") {
    auto demo = age_demo();
    std::map<Attribute, RewriteSlot> slots{
        {Attribute::age, full_slot("62", "34", "mentions skateboarding to lectures")}};
    auto msgs = render_anonymizer(templates(), "I skate to my lectures.", slots, demo);

    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].role == Role::system);
    CHECK(msgs[1].role == Role::user);
    CHECK(has(msgs[0].content, testsup::kAnonymizerMarker));

    const std::string& user = msgs[1].content;
    CHECK(has(user, "Target age: 62"));
    CHECK(has(user, "User comment: I skate to my lectures."));
    CHECK(has(user, "Real age: 34"));
    CHECK(has(user, "Explanation: mentions skateboarding to lectures"));
    CHECK_FALSE(has(user, "ATTRIBUTE"));
    check_no_leftover_tokens(msgs);

    // The worked example mirrors the live value lines and ends with the JSON.
    CHECK(has(user, "Target age: " + demo.target));
    CHECK(has(user, "User comment: " + demo.comment));
    CHECK(has(user, "Real age: " + demo.real));
    CHECK(has(user, "Assistant output: " + demo.output_json()));
    auto dumped = demo.output_json();
    CHECK(dumped.find("\"anonymized_comment\"") < dumped.find("\"explanation\""));

    // The sentinel lines stay literal and the example appears exactly once.
    CHECK(has(user, "<BEGIN_OF_EXAMPLE>"));
    CHECK(has(user, "<END_OF_EXAMPLE>"));
    auto first = user.find("Assistant output:");
    REQUIRE(first != std::string::npos);
    CHECK(user.find("Assistant output:", first + 1) == std::string::npos);
}

TEST_CASE("render_anonymizer: conditioning controls both live lines and the example") {
    auto demo = age_demo();
    std::string text = "I skate to my lectures.";

    SUBCASE("no target") {
        RewriteSlot s;
        s.truth = "34";
        s.reasoning = "skates";
        auto msgs = render_anonymizer(templates(), text, {{Attribute::age, s}}, demo);
        CHECK_FALSE(has(msgs[1].content, "Target age:"));
        CHECK(has(msgs[1].content, "Real age: 34"));
        check_no_leftover_tokens(msgs);
    }
    SUBCASE("target only") {
        RewriteSlot s;
        s.target = "62";
        auto msgs = render_anonymizer(templates(), text, {{Attribute::age, s}}, demo);
        const std::string& user = msgs[1].content;
        CHECK(has(user, "Target age: 62"));
        CHECK_FALSE(has(user, "Real age:"));
        CHECK_FALSE(has(user, "Explanation:"));
        // The example withholds the same fields.
        CHECK_FALSE(has(user, "Real age: " + demo.real));
        CHECK(has(user, "Assistant output: "));
        check_no_leftover_tokens(msgs);
    }
    SUBCASE("empty target string drops the live line only") {
        auto msgs = render_anonymizer(templates(), text,
                                      {{Attribute::age, full_slot("", "34", "skates")}}, demo);
        // An empty value binds nothing, so the live target line drops; the
        // example still shows the demo's target because the slot nominally
        // carries one.
        CHECK_FALSE(has(msgs[1].content, "Target age: \n"));
        CHECK(has(msgs[1].content, "Target age: " + demo.target));
        CHECK(has(msgs[1].content, "Real age: 34"));
    }
}

TEST_CASE("render_anonymizer: multi-attribute layout") {
    auto demo = age_demo();
    std::map<Attribute, RewriteSlot> slots{
        {Attribute::age, full_slot("62", "34", "mentions lectures")},
        {Attribute::gender, full_slot("male", "female", "signs off as mom")},
    };
    auto msgs = render_anonymizer(templates(), "Off to class, signed mom.", slots, demo);
    const std::string& user = msgs[1].content;

    CHECK(has(user, "age and gender"));
    auto p_ta = user.find("Target age: 62");
    auto p_ra = user.find("Real age: 34");
    auto p_tg = user.find("Target gender: male");
    auto p_rg = user.find("Real gender: female");
    auto p_uc = user.find("User comment: Off to class, signed mom.");
    REQUIRE(p_ta != std::string::npos);
    REQUIRE(p_uc != std::string::npos);
    CHECK(p_ta < p_ra);
    CHECK(p_ra < p_tg);
    CHECK(p_tg < p_rg);
    CHECK(p_rg < p_uc);
    // The comment appears exactly once.
    CHECK(user.find("User comment:", p_uc + 1) == std::string::npos);
    check_no_leftover_tokens(msgs);

    SUBCASE("per-attribute conditioning differs") {
        slots[Attribute::gender].truth.reset();
        auto m2 = render_anonymizer(templates(), "Off to class.", slots, demo);
        CHECK(has(m2[1].content, "Real age: 34"));
        CHECK_FALSE(has(m2[1].content, "Real gender:"));
    }
}

TEST_CASE("render_anonymizer input validation") {
    auto demo = age_demo();
    CHECK_THROWS_AS(render_anonymizer(templates(), "text", {}, demo), ConfigError);
    std::map<Attribute, RewriteSlot> slots{{Attribute::age, full_slot("62", "34", "r")}};
    CHECK_THROWS_AS(render_anonymizer(templates(), "   ", slots, demo), UnboundPlaceholder);
}

TEST_CASE("render_adversary") {
    auto demo = adv_demo();
    SUBCASE("with disclosure line") {
        auto msgs =
            render_adversary(templates(), "I skate to lectures.", Attribute::age,
                             std::optional<std::string>("34"), demo);
        REQUIRE(msgs.size() == 2);
        CHECK(has(msgs[0].content, testsup::kAdversaryMarker));
        const std::string& user = msgs[1].content;
        CHECK(has(user, "guess the authors age"));
        CHECK(has(user, "Here is the user's comment: I skate to lectures."));
        CHECK(has(user, "the author's real age is: 34."));
        CHECK(has(user, "Comment: " + demo.comment));
        CHECK(has(user, "Assistant output: " + demo.output));
        check_no_leftover_tokens(msgs);
    }
    SUBCASE("without truth the disclosure line disappears") {
        auto msgs = render_adversary(templates(), "text here", Attribute::age, std::nullopt, demo);
        CHECK_FALSE(has(msgs[1].content, "For your information"));
        auto empty_truth = render_adversary(templates(), "text here", Attribute::age,
                                            std::optional<std::string>(""), demo);
        CHECK_FALSE(has(empty_truth[1].content, "For your information"));
    }
    SUBCASE("display names are used") {
        auto d = adv_demo(Attribute::income_level);
        auto msgs =
            render_adversary(templates(), "payday again", Attribute::income_level, std::nullopt, d);
        CHECK(has(msgs[1].content, "guess the authors income level"));
        CHECK_FALSE(has(msgs[1].content, "income_level"));
    }
    SUBCASE("blank text rejected") {
        CHECK_THROWS_AS(render_adversary(templates(), " ", Attribute::age, std::nullopt, demo),
                        UnboundPlaceholder);
    }
}

TEST_CASE("render_utility_judge binds both texts verbatim") {
    auto msgs = render_utility_judge(templates(), "the original", "the rewrite");
    CHECK(has(msgs[0].content, testsup::kUtilityMarker));
    CHECK(has(msgs[1].content, "Original text: the original"));
    CHECK(has(msgs[1].content, "Adapted text: the rewrite"));
    // The JSON skeleton in the template survives rendering.
    CHECK(has(msgs[1].content, "\"readability\""));
    CHECK(has(msgs[1].content, "\"hallucinations\""));
    check_no_leftover_tokens(msgs);
}

TEST_CASE("render_format_fix") {
    SUBCASE("anonymizer fix needs no attribute") {
        auto msgs = render_format_fix(templates(), TemplateName::format_fix, "glob of text");
        CHECK(has(msgs[1].content, testsup::kRewriteFixMarker));
        CHECK(has(msgs[1].content, "Here is the wrongly formatted text: glob of text"));
        check_no_leftover_tokens(msgs);
    }
    SUBCASE("adversary fix binds the attribute") {
        auto msgs = render_format_fix(templates(), TemplateName::adversary_format_fix, "blob",
                                      Attribute::gender);
        CHECK(has(msgs[1].content, "Type: gender"));
        CHECK(has(msgs[1].content, testsup::kAdversaryFixMarker));
    }
    SUBCASE("adversary fix without attribute cannot render") {
        CHECK_THROWS_AS(render_format_fix(templates(), TemplateName::adversary_format_fix, "blob"),
                        UnboundPlaceholder);
    }
    SUBCASE("utility fix") {
        auto msgs = render_format_fix(templates(), TemplateName::utility_format_fix, "blob");
        CHECK(has(msgs[1].content, testsup::kUtilityFixMarker));
    }
    SUBCASE("non-fix templates are rejected") {
        CHECK_THROWS_AS(render_format_fix(templates(), TemplateName::adversary, "blob"),
                        ConfigError);
        CHECK_THROWS_AS(render_format_fix(templates(), TemplateName::anonymizer, "blob"),
                        ConfigError);
    }
}

TEST_CASE("render_equivalence_judge") {
    auto msgs = render_equivalence_judge(templates(), Attribute::education,
                                         "B.Sc Computer Science", "Bachelors in Computer Science");
    CHECK(has(msgs[1].content, "Predicted value: B.Sc Computer Science"));
    CHECK(has(msgs[1].content, "True value: Bachelors in Computer Science"));
    CHECK(has(msgs[1].content, "author's education"));
    check_no_leftover_tokens(msgs);
}
