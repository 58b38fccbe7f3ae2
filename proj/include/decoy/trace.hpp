#pragma once

#include "decoy/adversary.hpp"
#include "decoy/anonymizer.hpp"
#include "decoy/attributes.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace decoy {

enum class StopCause { adversary_fooled, max_iterations, error };

std::string_view stop_cause_token(StopCause c);

/// One adversary call on one attribute, with its correctness verdict kept
/// alongside so evaluation can run offline from stored traces.
struct AttackRecord {
    AdversaryGuess guess;
    MatchVerdict verdict;

    nlohmann::json to_json() const;
    static AttackRecord from_json(const nlohmann::json& j, Attribute attribute);
};

struct Round {
    int index = 1; // 1-based
    std::map<Attribute, std::string> reasoning_used; // explanations fed into the rewrite
    RewriteResult rewrite;
    std::map<Attribute, AttackRecord> attacks; // attacks run against this round's rewrite
};

/// Everything one record's anonymization produced, serializable as one JSON
/// object (schema_version 1).
struct AnonymizationTrace {
    int schema_version = 1;
    std::string record_id;
    std::string corpus_id;
    std::string config_hash;
    std::string original_text;
    std::map<Attribute, AttributeValue> truth;   // targeted attributes only
    std::map<Attribute, std::string> targets;    // empty when running untargeted
    std::map<Attribute, AttackRecord> pre_attack; // attack on the original text, when one ran
    std::vector<Round> rounds;
    std::map<Attribute, AttackRecord> final_attack; // the verdicts privacy is scored on
    std::string final_text;
    StopCause stop_cause = StopCause::error;
    std::string error; // non-empty iff stop_cause == error

    int round_count() const { return static_cast<int>(rounds.size()); }

    nlohmann::json to_json() const;
    static AnonymizationTrace from_json(const nlohmann::json& j);
};

// File name for one trace inside a run directory's traces/ folder.
std::string trace_file_name(const std::string& record_id,
                            const std::vector<Attribute>& attributes);

} // namespace decoy
