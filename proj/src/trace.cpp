#include "decoy/trace.hpp"

#include "decoy/text_util.hpp"

namespace decoy {

namespace {

nlohmann::json attack_map_to_json(const std::map<Attribute, AttackRecord>& attacks) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [attr, rec] : attacks) j[std::string(attribute_token(attr))] = rec.to_json();
    return j;
}

std::map<Attribute, AttackRecord> attack_map_from_json(const nlohmann::json& j) {
    std::map<Attribute, AttackRecord> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto attr = attribute_from_token(it.key());
        if (!attr) throw Error("trace attack map has unknown attribute: " + it.key());
        out.emplace(*attr, AttackRecord::from_json(it.value(), *attr));
    }
    return out;
}

} // namespace

std::string_view stop_cause_token(StopCause c) {
    switch (c) {
    case StopCause::adversary_fooled: return "adversary_fooled";
    case StopCause::max_iterations: return "max_iterations";
    case StopCause::error: return "error";
    }
    return "error";
}

nlohmann::json AttackRecord::to_json() const {
    nlohmann::json v{{"matched", verdict.matched},
                     {"mechanism", std::string(mechanism_token(verdict.mechanism))}};
    if (verdict.matched_rank) v["matched_rank"] = *verdict.matched_rank;
    return nlohmann::json{{"reasoning", guess.reasoning},
                          {"guesses", guess.guesses},
                          {"certainty", guess.certainty},
                          {"raw", guess.raw},
                          {"verdict", v}};
}

AttackRecord AttackRecord::from_json(const nlohmann::json& j, Attribute attribute) {
    AttackRecord rec;
    rec.guess.attribute = attribute;
    rec.guess.reasoning = j.value("reasoning", "");
    rec.guess.guesses = j.at("guesses").get<std::vector<std::string>>();
    rec.guess.certainty = j.value("certainty", 1);
    rec.guess.raw = j.value("raw", "");
    const nlohmann::json& v = j.at("verdict");
    rec.verdict.matched = v.at("matched").get<bool>();
    if (auto m = mechanism_from_token(v.value("mechanism", "exact"))) rec.verdict.mechanism = *m;
    if (v.contains("matched_rank")) rec.verdict.matched_rank = v.at("matched_rank").get<int>();
    return rec;
}

nlohmann::json AnonymizationTrace::to_json() const {
    nlohmann::json truth_j = nlohmann::json::object();
    for (const auto& [attr, value] : truth) truth_j[std::string(attribute_token(attr))] = value.value;
    nlohmann::json targets_j = nlohmann::json::object();
    for (const auto& [attr, value] : targets) targets_j[std::string(attribute_token(attr))] = value;

    nlohmann::json rounds_j = nlohmann::json::array();
    for (const Round& r : rounds) {
        nlohmann::json reasoning_j = nlohmann::json::object();
        for (const auto& [attr, text] : r.reasoning_used) {
            reasoning_j[std::string(attribute_token(attr))] = text;
        }
        rounds_j.push_back({{"index", r.index},
                            {"reasoning_used", reasoning_j},
                            {"rewrite",
                             {{"text", r.rewrite.anonymized_text},
                              {"explanation", r.rewrite.explanation},
                              {"repaired", r.rewrite.repaired},
                              {"raw", r.rewrite.raw}}},
                            {"attacks", attack_map_to_json(r.attacks)}});
    }

    return nlohmann::json{{"schema_version", schema_version},
                          {"record_id", record_id},
                          {"corpus_id", corpus_id},
                          {"config_hash", config_hash},
                          {"original_text", original_text},
                          {"truth", truth_j},
                          {"targets", targets_j},
                          {"pre_attack", attack_map_to_json(pre_attack)},
                          {"rounds", rounds_j},
                          {"final_attack", attack_map_to_json(final_attack)},
                          {"final_text", final_text},
                          {"stop_cause", std::string(stop_cause_token(stop_cause))},
                          {"error", error}};
}

AnonymizationTrace AnonymizationTrace::from_json(const nlohmann::json& j) {
    AnonymizationTrace t;
    t.schema_version = j.value("schema_version", 1);
    if (t.schema_version != 1) {
        throw Error("unsupported trace schema_version " + std::to_string(t.schema_version));
    }
    t.record_id = j.at("record_id").get<std::string>();
    t.corpus_id = j.value("corpus_id", "");
    t.config_hash = j.value("config_hash", "");
    t.original_text = j.value("original_text", "");

    for (auto it = j.at("truth").begin(); it != j.at("truth").end(); ++it) {
        auto attr = attribute_from_token(it.key());
        if (!attr) throw Error("trace truth has unknown attribute: " + it.key());
        t.truth.emplace(*attr, make_attribute_value(*attr, it.value().get<std::string>()));
    }
    if (j.contains("targets")) {
        for (auto it = j.at("targets").begin(); it != j.at("targets").end(); ++it) {
            auto attr = attribute_from_token(it.key());
            if (!attr) throw Error("trace targets has unknown attribute: " + it.key());
            t.targets.emplace(*attr, it.value().get<std::string>());
        }
    }
    if (j.contains("pre_attack")) t.pre_attack = attack_map_from_json(j.at("pre_attack"));

    for (const auto& rj : j.at("rounds")) {
        Round r;
        r.index = rj.at("index").get<int>();
        if (rj.contains("reasoning_used")) {
            for (auto it = rj.at("reasoning_used").begin(); it != rj.at("reasoning_used").end();
                 ++it) {
                auto attr = attribute_from_token(it.key());
                if (!attr) throw Error("trace reasoning has unknown attribute: " + it.key());
                r.reasoning_used.emplace(*attr, it.value().get<std::string>());
            }
        }
        const nlohmann::json& rw = rj.at("rewrite");
        r.rewrite.anonymized_text = rw.at("text").get<std::string>();
        r.rewrite.explanation = rw.value("explanation", "");
        r.rewrite.repaired = rw.value("repaired", false);
        r.rewrite.raw = rw.value("raw", "");
        if (rj.contains("attacks")) r.attacks = attack_map_from_json(rj.at("attacks"));
        t.rounds.push_back(std::move(r));
    }

    if (j.contains("final_attack")) t.final_attack = attack_map_from_json(j.at("final_attack"));
    t.final_text = j.value("final_text", "");
    std::string cause = j.value("stop_cause", "error");
    if (cause == "adversary_fooled") t.stop_cause = StopCause::adversary_fooled;
    else if (cause == "max_iterations") t.stop_cause = StopCause::max_iterations;
    else t.stop_cause = StopCause::error;
    t.error = j.value("error", "");
    return t;
}

std::string trace_file_name(const std::string& record_id,
                            const std::vector<Attribute>& attributes) {
    std::vector<std::string> tokens;
    for (Attribute a : attributes) tokens.emplace_back(attribute_token(a));
    return sanitize_filename(record_id) + "__" + join(tokens, "-") + ".json";
}

} // namespace decoy
