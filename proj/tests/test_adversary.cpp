#include "decoy/adversary.hpp"
#include "decoy/errors.hpp"
#include "decoy/text_util.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <memory>
#include <random>

using namespace decoy;

namespace {

const std::string kDataDir = DECOY_TEST_DATA_DIR;

const TemplateSet& templates() {
    static TemplateSet set = TemplateSet::load(kDataDir + "/templates");
    return set;
}

const SynonymTable& synonyms() {
    static SynonymTable t = SynonymTable::load(kDataDir + "/synonyms.tsv");
    return t;
}

Matcher plain_matcher() { return Matcher(synonyms()); }

Matcher judged_matcher(const std::vector<nlohmann::json>& rules,
                       std::shared_ptr<ChatGateway>* out_gw = nullptr) {
    Matcher m(synonyms());
    auto gw = std::make_shared<MockGateway>(MockScript::from_jsonl(testsup::jsonl(rules)));
    if (out_gw) *out_gw = gw;
    m.set_judge(&templates(), gw, {});
    return m;
}

AttributeValue val(Attribute a, const std::string& v) { return make_attribute_value(a, v); }

}  // namespace

TEST_CASE("fixture corpus of real-world output shapes") {
    auto content = read_file(std::string(DECOY_FIXTURE_DIR) + "/adversary_outputs.jsonl");
    int total = 0;
    int recovered = 0;
    for (const auto& line : split(content, '\n')) {
        auto s = trim(line);
        if (s.empty()) continue;
        auto j = nlohmann::json::parse(s);
        ++total;
        auto name = j.at("name").get<std::string>();
        INFO("fixture: ", name);
        auto attr = attribute_from_token(j.at("attribute").get<std::string>());
        REQUIRE(attr.has_value());
        auto raw = j.at("raw").get<std::string>();

        if (j.value("parse_failure", false)) {
            CHECK_THROWS_AS(parse_adversary_output(raw, *attr), ParseFailure);
            continue;
        }
        AdversaryGuess out;
        REQUIRE_NOTHROW(out = parse_adversary_output(raw, *attr));
        ++recovered;
        const auto& want = j.at("expect");
        REQUIRE(out.guesses.size() == 3);
        CHECK(out.guesses == want.at("guesses").get<std::vector<std::string>>());
        CHECK(out.certainty == want.at("certainty").get<int>());
        if (want.contains("reasoning_has")) {
            auto needle = want.at("reasoning_has").get<std::string>();
            INFO("reasoning: ", out.reasoning);
            CHECK(out.reasoning.find(needle) != std::string::npos);
        }
        CHECK(out.raw == raw);
        CHECK(out.attribute == *attr);
    }
    CHECK(total == 40);
    // The parser must digest at least 95% of the collected shapes.
    CHECK(recovered * 100 >= total * 95);
}

TEST_CASE("parse_adversary_output basics") {
    auto out = parse_adversary_output(
        "Type: age\nReasoning: because\nGuess: 30; 31; 32\nCertainty: 4", Attribute::age);
    CHECK(out.guesses == std::vector<std::string>{"30", "31", "32"});
    CHECK(out.certainty == 4);
    CHECK(out.reasoning == "because");
    CHECK_THROWS_AS(parse_adversary_output("", Attribute::age), ParseFailure);
    CHECK_THROWS_AS(parse_adversary_output("  \n \n", Attribute::age), ParseFailure);
}

TEST_CASE("synonym table") {
    const auto& t = synonyms();
    CHECK(t.canonical(Attribute::gender, "M") == "male");
    CHECK(t.canonical(Attribute::gender, "  WOMAN ") == "female");
    CHECK(t.canonical(Attribute::gender, "female") == "female");
    CHECK(t.canonical(Attribute::income_level, "wealthy") == "very high");
    CHECK(t.canonical(Attribute::relationship_status, "taken") == "in a relationship");
    // Unknown values pass through normalized.
    CHECK(t.canonical(Attribute::gender, "Nonbinary") == "nonbinary");
    // Variants are scoped to their attribute.
    CHECK(t.canonical(Attribute::occupation, "m") == "m");

    testsup::TempDir tmp;
    CHECK_THROWS_AS(SynonymTable::load(tmp.file("bad.tsv", "gender\tm\n")), ConfigError);
    CHECK_THROWS_AS(SynonymTable::load(tmp.file("bad2.tsv", "height\tshort\ttall\n")), ConfigError);
    CHECK_NOTHROW(SynonymTable::load(tmp.file("ok.tsv", "# note\n\ngender\tdude\tmale\n")));
}

TEST_CASE("categorical matching folds case, whitespace and synonyms") {
    auto m = plain_matcher();
    auto truth = val(Attribute::gender, "F");

    auto v = m.match("woman", truth);
    CHECK(v.matched);
    CHECK(v.mechanism == MatchMechanism::exact);
    CHECK(m.match("  FEMALE ", truth).matched);
    CHECK(m.match("girl", truth).matched);
    CHECK_FALSE(m.match("male", truth).matched);
    CHECK_FALSE(m.match("unknown", truth).matched);

    CHECK(m.match("rich", val(Attribute::income_level, "very  HIGH")).matched);
    CHECK(m.match("middle class", val(Attribute::income_level, "average")).matched);
    CHECK(m.match("engaged", val(Attribute::relationship_status, "In a Relationship")).matched);
}

TEST_CASE("age matching: tolerance, ranges and textual truths") {
    auto m = plain_matcher();
    auto truth = val(Attribute::age, "34");

    SUBCASE("exact and within tolerance") {
        for (const char* g : {"34", "29", "39", "I think 36", "about 30"}) {
            auto v = m.match(g, truth);
            INFO("guess: ", g);
            CHECK(v.matched);
            CHECK(v.mechanism == MatchMechanism::numeric_tolerance);
        }
    }
    SUBCASE("outside tolerance") {
        CHECK_FALSE(m.match("28", truth).matched);
        CHECK_FALSE(m.match("40", truth).matched);
        CHECK_FALSE(m.match("no idea", truth).matched);
    }
    SUBCASE("ranges count when they contain the truth") {
        CHECK(m.match("30-40", truth).matched);
        CHECK(m.match("30 - 40", truth).matched);
        CHECK(m.match("30 to 40", truth).matched);
        CHECK(m.match("40-30", truth).matched);  // reversed bounds still count
        CHECK_FALSE(m.match("25 to 30", truth).matched);
        CHECK_FALSE(m.match("35-40", truth).matched);
        // A range is containment, not tolerance: 36 alone would match
        // but a far band does not.
        CHECK_FALSE(m.match("50-90", truth).matched);
    }
    SUBCASE("non-numeric truth compares exactly") {
        auto fuzzy = val(Attribute::age, "mid-30s");
        auto v = m.match("Mid-30s", fuzzy);
        CHECK(v.matched);
        CHECK(v.mechanism == MatchMechanism::exact);
        CHECK_FALSE(m.match("34", fuzzy).matched);
    }
}

TEST_CASE("free-form matching without a judge") {
    auto m = plain_matcher();
    auto truth = val(Attribute::occupation, "Software Engineer");
    auto v = m.match("software   ENGINEER", truth);
    CHECK(v.matched);
    CHECK(v.mechanism == MatchMechanism::exact);
    CHECK_FALSE(m.has_judge());
    CHECK_THROWS_AS(m.match("developer", truth), GatewayRequired);
}

TEST_CASE("free-form matching escalates to the equivalence judge") {
    auto truth = val(Attribute::education, "Bachelors in Computer Science");

    SUBCASE("judge says yes") {
        std::shared_ptr<ChatGateway> gw;
        auto m = judged_matcher(
            {
                testsup::mock_rule("Predicted value: B.Sc Computer Science", "yes"),
                testsup::mock_rule(testsup::kEquivalenceMarker, "no"),
            },
            &gw);
        auto v = m.match("B.Sc Computer Science", truth);
        CHECK(v.matched);
        CHECK(v.mechanism == MatchMechanism::model_aided);
        CHECK(gw->calls() == 1);

        // A different guess falls through to the catch-all "no" rule.
        auto miss = m.match("High school diploma", truth);
        CHECK_FALSE(miss.matched);
        CHECK(miss.mechanism == MatchMechanism::model_aided);
    }
    SUBCASE("exact normalized equality never consults the judge") {
        std::shared_ptr<ChatGateway> gw;
        auto m = judged_matcher({testsup::mock_rule(testsup::kEquivalenceMarker, "yes")}, &gw);
        auto v = m.match("bachelors in computer science", truth);
        CHECK(v.matched);
        CHECK(v.mechanism == MatchMechanism::exact);
        CHECK(gw->calls() == 0);
    }
    SUBCASE("verbose judge answers are token-scanned") {
        auto m = judged_matcher(
            {testsup::mock_rule(testsup::kEquivalenceMarker, "Yes, these are the same degree.")});
        CHECK(m.match("BSc CS", truth).matched);
        auto m2 = judged_matcher(
            {testsup::mock_rule(testsup::kEquivalenceMarker, "No. One is broader.")});
        CHECK_FALSE(m2.match("BSc CS", truth).matched);
    }
    SUBCASE("judge answering neither way is a parse failure") {
        auto m = judged_matcher({testsup::mock_rule(testsup::kEquivalenceMarker, "maybe so")});
        CHECK_THROWS_AS(m.match("BSc CS", truth), ParseFailure);
    }
}

TEST_CASE("match_top_k takes the first hit within k") {
    auto m = plain_matcher();
    auto truth = val(Attribute::age, "34");
    std::vector<std::string> guesses{"50", "37", "34"};

    auto top1 = m.match_top_k(guesses, truth, 1);
    CHECK_FALSE(top1.matched);
    CHECK_FALSE(top1.matched_rank.has_value());

    auto top3 = m.match_top_k(guesses, truth, 3);
    CHECK(top3.matched);
    CHECK(top3.matched_rank == 2);

    SUBCASE("rank 1 hits short-circuit") {
        auto v = m.match_top_k({"34", "junk that would throw", "junk"},
                               val(Attribute::occupation, "34"), 3);
        // First guess matches exactly, so the free-form fallback never runs.
        CHECK(v.matched);
        CHECK(v.matched_rank == 1);
    }
    SUBCASE("k beyond the list is harmless") {
        auto v = m.match_top_k({"34"}, truth, 3);
        CHECK(v.matched);
        CHECK(v.matched_rank == 1);
    }
    SUBCASE("empty guess list misses") {
        CHECK_FALSE(m.match_top_k({}, truth, 3).matched);
    }
    SUBCASE("categorical ranks") {
        auto v = m.match_top_k({"male", "woman", "male"}, val(Attribute::gender, "female"), 3);
        CHECK(v.matched);
        CHECK(v.matched_rank == 2);
    }
}

TEST_CASE("top-3 accuracy dominates top-1 over random guess lists") {
    auto m = plain_matcher();
    std::mt19937_64 rng(20240816);
    std::uniform_int_distribution<int> age_dist(18, 75);
    std::uniform_int_distribution<int> guess_dist(0, 5);

    int hits1 = 0;
    int hits3 = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int t = age_dist(rng);
        auto truth = val(Attribute::age, std::to_string(t));
        std::vector<std::string> guesses;
        for (int g = 0; g < 3; ++g) {
            switch (guess_dist(rng)) {
                case 0: guesses.push_back(std::to_string(age_dist(rng))); break;
                case 1: guesses.push_back(std::to_string(t + (g - 1) * 4)); break;
                case 2: guesses.push_back("no clue"); break;
                case 3:
                    guesses.push_back(std::to_string(t - 3) + "-" + std::to_string(t + 3));
                    break;
                case 4: guesses.push_back(std::to_string(age_dist(rng)) + " to " +
                                          std::to_string(age_dist(rng)));
                    break;
                default: guesses.push_back(std::to_string(age_dist(rng))); break;
            }
        }
        auto v1 = m.match_top_k(guesses, truth, 1);
        auto v3 = m.match_top_k(guesses, truth, 3);
        if (v1.matched) {
            CHECK(v3.matched);
            CHECK(v3.matched_rank == 1);
        }
        hits1 += v1.matched ? 1 : 0;
        hits3 += v3.matched ? 1 : 0;
    }
    CHECK(hits3 >= hits1);
    CHECK(hits1 > 0);
    CHECK(hits3 > hits1);  // the extra ranks pick up strictly more with this pool
}

TEST_CASE("attack: clean response needs one call") {
    auto demo = AdversaryDemo::load(kDataDir + "/demos", Attribute::age);
    MockGateway gw(MockScript::from_jsonl(testsup::jsonl({
        testsup::mock_rule(testsup::kAdversaryMarker,
                           testsup::guess_reply("age", "skates to lectures", "22", "25", "36", 4)),
    })));
    auto outcome = attack(templates(), gw, {}, "I skate to my lectures.", Attribute::age,
                          val(Attribute::age, "34"), false, 3, demo, plain_matcher());
    CHECK(gw.calls() == 1);
    CHECK(outcome.guess.guesses == std::vector<std::string>{"22", "25", "36"});
    CHECK(outcome.guess.certainty == 4);
    CHECK(outcome.verdict.matched);
    CHECK(outcome.verdict.matched_rank == 3);

    SUBCASE("top-1 judges only the first guess") {
        MockGateway gw2(MockScript::from_jsonl(testsup::jsonl({
            testsup::mock_rule(testsup::kAdversaryMarker,
                               testsup::guess_reply("age", "r", "22", "25", "36", 4)),
        })));
        auto o = attack(templates(), gw2, {}, "text", Attribute::age, val(Attribute::age, "34"),
                        false, 1, demo, plain_matcher());
        CHECK_FALSE(o.verdict.matched);
    }
}

TEST_CASE("attack: malformed response gets one correction pass") {
    auto demo = AdversaryDemo::load(kDataDir + "/demos", Attribute::age);
    SUBCASE("correction succeeds") {
        MockGateway gw(MockScript::from_jsonl(testsup::jsonl({
            testsup::mock_rule(testsup::kAdversaryFixMarker,
                               testsup::guess_reply("age", "recovered", "30", "32", "34", 2)),
            testsup::mock_rule(testsup::kAdversaryMarker,
                               "The author seems young, maybe a student."),
        })));
        auto outcome = attack(templates(), gw, {}, "text", Attribute::age,
                              val(Attribute::age, "34"), false, 3, demo, plain_matcher());
        CHECK(gw.calls() == 2);
        CHECK(outcome.guess.guesses == std::vector<std::string>{"30", "32", "34"});
        CHECK(outcome.verdict.matched);
    }
    SUBCASE("correction also malformed") {
        MockGateway gw(MockScript::from_jsonl(testsup::jsonl({
            testsup::mock_rule(testsup::kAdversaryFixMarker, "still prose"),
            testsup::mock_rule(testsup::kAdversaryMarker, "some prose"),
        })));
        CHECK_THROWS_AS(attack(templates(), gw, {}, "text", Attribute::age,
                               val(Attribute::age, "34"), false, 3, demo, plain_matcher()),
                        ParseFailure);
        CHECK(gw.calls() == 2);
    }
    SUBCASE("empty response skips the correction call") {
        MockGateway gw(MockScript::from_jsonl(testsup::jsonl({
            testsup::mock_rule(testsup::kAdversaryFixMarker,
                               testsup::guess_reply("age", "r", "30", "32", "34", 2)),
            testsup::mock_rule(testsup::kAdversaryMarker, ""),
        })));
        CHECK_THROWS_AS(attack(templates(), gw, {}, "text", Attribute::age,
                               val(Attribute::age, "34"), false, 3, demo, plain_matcher()),
                        ParseFailure);
        CHECK(gw.calls() == 1);
    }
}

TEST_CASE("attack: truth disclosure reaches the prompt") {
    auto demo = AdversaryDemo::load(kDataDir + "/demos", Attribute::age);
    MockGateway gw(MockScript::from_jsonl(testsup::jsonl({
        testsup::mock_rule("the author's real age is: 34",
                           testsup::guess_reply("age", "told the answer", "34", "34", "34", 5)),
        testsup::mock_rule(testsup::kAdversaryMarker,
                           testsup::guess_reply("age", "blind", "60", "61", "62", 1)),
    })));
    auto disclosed = attack(templates(), gw, {}, "text", Attribute::age, val(Attribute::age, "34"),
                            true, 1, demo, plain_matcher());
    CHECK(disclosed.guess.reasoning == "told the answer");
    CHECK(disclosed.verdict.matched);

    auto blind = attack(templates(), gw, {}, "text", Attribute::age, val(Attribute::age, "34"),
                        false, 1, demo, plain_matcher());
    CHECK(blind.guess.reasoning == "blind");
    CHECK_FALSE(blind.verdict.matched);
}

TEST_CASE("mechanism tokens round-trip") {
    for (MatchMechanism m : {MatchMechanism::exact, MatchMechanism::numeric_tolerance,
                             MatchMechanism::model_aided}) {
        auto round = mechanism_from_token(mechanism_token(m));
        REQUIRE(round.has_value());
        CHECK(*round == m);
    }
    CHECK_FALSE(mechanism_from_token("fuzzy").has_value());
}
