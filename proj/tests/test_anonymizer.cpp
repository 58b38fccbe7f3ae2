#include "decoy/anonymizer.hpp"
#include "decoy/errors.hpp"

#include "doctest.h"
#include "test_support.hpp"

using namespace decoy;

namespace {

const std::string kDataDir = DECOY_TEST_DATA_DIR;

const TemplateSet& templates() {
    static TemplateSet set = TemplateSet::load(kDataDir + "/templates");
    return set;
}

const AnonymizerDemo& demo() {
    static AnonymizerDemo d = AnonymizerDemo::load(kDataDir + "/demos", Attribute::age);
    return d;
}

std::map<Attribute, RewriteSlot> age_slots() {
    RewriteSlot s;
    s.target = "62";
    s.truth = "34";
    s.reasoning = "mentions lectures";
    return {{Attribute::age, s}};
}

MockGateway gateway_of(const std::vector<nlohmann::json>& rules) {
    return MockGateway(MockScript::from_jsonl(testsup::jsonl(rules)));
}

}  // namespace

TEST_CASE("extract_json_object") {
    SUBCASE("bare object") {
        auto j = extract_json_object(R"({"a": 1})");
        CHECK(j["a"] == 1);
    }
    SUBCASE("fenced object") {
        auto j = extract_json_object("```json\n{\"a\": 2}\n```");
        CHECK(j["a"] == 2);
    }
    SUBCASE("object wrapped in prose") {
        auto j = extract_json_object("Sure, here you go:\n{\"a\": 3}\nHope that helps!");
        CHECK(j["a"] == 3);
    }
    SUBCASE("braces inside string values") {
        auto j = extract_json_object(R"({"text": "keep {this} and \"that\""})");
        CHECK(j["text"] == "keep {this} and \"that\"");
    }
    SUBCASE("skips non-JSON brace groups") {
        auto j = extract_json_object("{oops} then {\"a\": 4}");
        CHECK(j["a"] == 4);
    }
    SUBCASE("nested objects come back whole") {
        auto j = extract_json_object(R"(noise {"outer": {"inner": 5}} more)");
        CHECK(j["outer"]["inner"] == 5);
    }
    SUBCASE("failures") {
        CHECK_THROWS_AS(extract_json_object("no json here"), NoJsonFound);
        CHECK_THROWS_AS(extract_json_object("{\"never\": \"closes\""), NoJsonFound);
        CHECK_THROWS_AS(extract_json_object(""), NoJsonFound);
        CHECK_THROWS_AS(extract_json_object("[1, 2, 3]"), NoJsonFound);
    }
}

TEST_CASE("rewrite: clean first response") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kAnonymizerMarker,
                           testsup::rewrite_reply("I ride the bus to work.", "swapped the cue")),
    });
    auto res = rewrite(templates(), gw, {}, "I skate to my lectures.", age_slots(), demo());
    CHECK(res.anonymized_text == "I ride the bus to work.");
    CHECK(res.explanation == "swapped the cue");
    CHECK_FALSE(res.repaired);
    CHECK(res.raw == testsup::rewrite_reply("I ride the bus to work.", "swapped the cue"));
    CHECK(gw.calls() == 1);
}

TEST_CASE("rewrite: fenced and prose-wrapped output needs no repair") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kAnonymizerMarker,
                           "Here is the JSON:\n```json\n" +
                               testsup::rewrite_reply("rewritten", "why") + "\n```"),
    });
    auto res = rewrite(templates(), gw, {}, "original text", age_slots(), demo());
    CHECK(res.anonymized_text == "rewritten");
    CHECK_FALSE(res.repaired);
    CHECK(gw.calls() == 1);
}

TEST_CASE("rewrite: one format-correction call repairs bad output") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kRewriteFixMarker,
                           testsup::rewrite_reply("fixed text", "recovered")),
        testsup::mock_rule(testsup::kAnonymizerMarker, "I changed the text to hide the age."),
    });
    auto res = rewrite(templates(), gw, {}, "original text", age_slots(), demo());
    CHECK(res.anonymized_text == "fixed text");
    CHECK(res.repaired);
    CHECK(res.raw == "I changed the text to hide the age.");
    CHECK(gw.calls() == 2);
}

TEST_CASE("rewrite: JSON missing the rewrite key also goes through repair") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kRewriteFixMarker,
                           testsup::rewrite_reply("fixed text", "recovered")),
        testsup::mock_rule(testsup::kAnonymizerMarker, R"({"explanation": "only half"})"),
    });
    auto res = rewrite(templates(), gw, {}, "original text", age_slots(), demo());
    CHECK(res.anonymized_text == "fixed text");
    CHECK(res.repaired);
}

TEST_CASE("rewrite: unusable repair raises ParseFailure") {
    SUBCASE("repair output is not JSON") {
        auto gw = gateway_of({
            testsup::mock_rule(testsup::kRewriteFixMarker, "still not json"),
            testsup::mock_rule(testsup::kAnonymizerMarker, "not json"),
        });
        CHECK_THROWS_AS(rewrite(templates(), gw, {}, "text", age_slots(), demo()), ParseFailure);
        CHECK(gw.calls() == 2);
    }
    SUBCASE("repair output lacks the key") {
        auto gw = gateway_of({
            testsup::mock_rule(testsup::kRewriteFixMarker, R"({"explanation": "nope"})"),
            testsup::mock_rule(testsup::kAnonymizerMarker, "not json"),
        });
        CHECK_THROWS_AS(rewrite(templates(), gw, {}, "text", age_slots(), demo()), ParseFailure);
    }
}

TEST_CASE("rewrite: empty model output fails without wasting the repair call") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kAnonymizerMarker, "   "),
        testsup::mock_rule(testsup::kRewriteFixMarker, testsup::rewrite_reply("x", "y")),
    });
    CHECK_THROWS_AS(rewrite(templates(), gw, {}, "text", age_slots(), demo()), ParseFailure);
    CHECK(gw.calls() == 1);
}

TEST_CASE("rewrite: blank anonymized_comment is an empty rewrite") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kAnonymizerMarker, testsup::rewrite_reply("  ", "why")),
    });
    CHECK_THROWS_AS(rewrite(templates(), gw, {}, "text", age_slots(), demo()), EmptyRewrite);
}

TEST_CASE("rewrite: non-string anonymized_comment is an empty rewrite") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kAnonymizerMarker, R"({"anonymized_comment": 42})"),
    });
    CHECK_THROWS_AS(rewrite(templates(), gw, {}, "text", age_slots(), demo()), EmptyRewrite);
}

TEST_CASE("rewrite: missing explanation is tolerated") {
    auto gw = gateway_of({
        testsup::mock_rule(testsup::kAnonymizerMarker, R"({"anonymized_comment": "new text"})"),
    });
    auto res = rewrite(templates(), gw, {}, "text", age_slots(), demo());
    CHECK(res.anonymized_text == "new text");
    CHECK(res.explanation.empty());
}
