#include "decoy/errors.hpp"
#include "decoy/trace.hpp"

#include "doctest.h"
#include "test_support.hpp"

using namespace decoy;

namespace {

AttackRecord sample_attack(Attribute a, bool matched, std::optional<int> rank) {
    AttackRecord rec;
    rec.guess.attribute = a;
    rec.guess.reasoning = "because of the phrasing";
    rec.guess.guesses = {"30", "32", "34"};
    rec.guess.certainty = 4;
    rec.guess.raw = "Guess: 30; 32; 34\nCertainty: 4";
    rec.verdict.matched = matched;
    rec.verdict.mechanism = MatchMechanism::numeric_tolerance;
    rec.verdict.matched_rank = rank;
    return rec;
}

AnonymizationTrace sample_trace() {
    AnonymizationTrace t;
    t.record_id = "rec-7";
    t.corpus_id = "abc123";
    t.config_hash = "deadbeefdeadbeef";
    t.original_text = "I skate to my lectures.";
    t.truth.emplace(Attribute::age, make_attribute_value(Attribute::age, "34"));
    t.truth.emplace(Attribute::occupation, make_attribute_value(Attribute::occupation, "student"));
    t.targets[Attribute::age] = "62";
    t.targets[Attribute::occupation] = "retired teacher";
    t.pre_attack.emplace(Attribute::age, sample_attack(Attribute::age, true, 1));

    Round r1;
    r1.index = 1;
    r1.reasoning_used[Attribute::age] = "mentions lectures";
    r1.rewrite.anonymized_text = "I drive to the office.";
    r1.rewrite.explanation = "removed the student cue";
    r1.rewrite.repaired = true;
    r1.rewrite.raw = "{\"anonymized_comment\": \"I drive to the office.\"}";
    r1.attacks.emplace(Attribute::age, sample_attack(Attribute::age, false, std::nullopt));
    t.rounds.push_back(r1);

    Round r2;
    r2.index = 2;
    r2.rewrite.anonymized_text = "I drive to work.";
    r2.attacks.emplace(Attribute::age, sample_attack(Attribute::age, false, std::nullopt));
    t.rounds.push_back(r2);

    t.final_attack.emplace(Attribute::age, sample_attack(Attribute::age, false, std::nullopt));
    t.final_text = "I drive to work.";
    t.stop_cause = StopCause::adversary_fooled;
    return t;
}

}  // namespace

TEST_CASE("stop cause tokens") {
    CHECK(stop_cause_token(StopCause::adversary_fooled) == "adversary_fooled");
    CHECK(stop_cause_token(StopCause::max_iterations) == "max_iterations");
    CHECK(stop_cause_token(StopCause::error) == "error");
}

TEST_CASE("attack record serialization") {
    auto rec = sample_attack(Attribute::age, true, 2);
    auto j = rec.to_json();
    CHECK(j["guesses"].size() == 3);
    CHECK(j["verdict"]["matched"] == true);
    CHECK(j["verdict"]["matched_rank"] == 2);
    CHECK(j["verdict"]["mechanism"] == "numeric_tolerance");

    auto back = AttackRecord::from_json(j, Attribute::age);
    CHECK(back.to_json() == j);
    CHECK(back.guess.attribute == Attribute::age);

    SUBCASE("absent rank stays absent") {
        auto miss = sample_attack(Attribute::age, false, std::nullopt);
        auto mj = miss.to_json();
        CHECK_FALSE(mj["verdict"].contains("matched_rank"));
        CHECK_FALSE(AttackRecord::from_json(mj, Attribute::age).verdict.matched_rank.has_value());
    }
}

TEST_CASE("trace json round-trip is lossless") {
    auto t = sample_trace();
    auto j = t.to_json();
    auto back = AnonymizationTrace::from_json(j);
    CHECK(back.to_json() == j);

    CHECK(back.record_id == "rec-7");
    CHECK(back.corpus_id == "abc123");
    CHECK(back.round_count() == 2);
    CHECK(back.truth.at(Attribute::age).numeric == 34);
    CHECK(back.targets.at(Attribute::occupation) == "retired teacher");
    CHECK(back.pre_attack.at(Attribute::age).verdict.matched);
    CHECK(back.rounds[0].rewrite.repaired);
    CHECK(back.rounds[0].reasoning_used.at(Attribute::age) == "mentions lectures");
    CHECK(back.rounds[1].reasoning_used.empty());
    CHECK(back.stop_cause == StopCause::adversary_fooled);
    CHECK(back.error.empty());
}

TEST_CASE("trace parsing rejects foreign schemas") {
    auto j = sample_trace().to_json();
    j["schema_version"] = 2;
    CHECK_THROWS_AS(AnonymizationTrace::from_json(j), Error);

    auto bad_attr = sample_trace().to_json();
    bad_attr["truth"]["shoe_size"] = "44";
    CHECK_THROWS_AS(AnonymizationTrace::from_json(bad_attr), Error);
}

TEST_CASE("minimal trace json gets defaults") {
    nlohmann::json j{
        {"schema_version", 1},
        {"record_id", "r1"},
        {"truth", nlohmann::json::object()},
        {"rounds", nlohmann::json::array()},
    };
    auto t = AnonymizationTrace::from_json(j);
    CHECK(t.record_id == "r1");
    CHECK(t.corpus_id.empty());
    CHECK(t.rounds.empty());
    CHECK(t.pre_attack.empty());
    CHECK(t.final_attack.empty());
    CHECK(t.stop_cause == StopCause::error);
}

TEST_CASE("error traces carry their message") {
    AnonymizationTrace t;
    t.record_id = "r9";
    t.stop_cause = StopCause::error;
    t.error = "adversary returned empty output";
    auto back = AnonymizationTrace::from_json(t.to_json());
    CHECK(back.stop_cause == StopCause::error);
    CHECK(back.error == "adversary returned empty output");
}

TEST_CASE("trace file names are filesystem-safe and attribute-tagged") {
    CHECK(trace_file_name("rec-1", {Attribute::age}) == "rec-1__age.json");
    CHECK(trace_file_name("user/7 two", {Attribute::age, Attribute::gender}) ==
          "user_7_two__age-gender.json");
}
