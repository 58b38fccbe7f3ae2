#pragma once

#include "decoy/attributes.hpp"
#include "decoy/errors.hpp"
#include "decoy/gateway.hpp"
#include "decoy/prompts.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace decoy {

struct AdversaryGuess {
    Attribute attribute = Attribute::age;
    std::string reasoning;
    std::vector<std::string> guesses; // always exactly 3, padded by repetition
    int certainty = 1;                // clamped into [1,5]; 1 when missing
    std::string raw;                  // verbatim model output
};

enum class MatchMechanism { exact, numeric_tolerance, model_aided };

std::string_view mechanism_token(MatchMechanism m);
std::optional<MatchMechanism> mechanism_from_token(std::string_view token);

struct MatchVerdict {
    bool matched = false;
    MatchMechanism mechanism = MatchMechanism::exact;
    std::optional<int> matched_rank; // 1-based, present iff matched
};

/// Extracts reasoning, guesses and certainty from the labeled-line reply the
/// attack prompt requests, falling back to JSON recovery. Throws ParseFailure
/// when no guess is recoverable.
AdversaryGuess parse_adversary_output(const std::string& raw, Attribute attribute);

/// Variant → canonical value mappings for categorical attributes, loaded from
/// a tab-separated data file so new spellings need no code change.
class SynonymTable {
  public:
    static SynonymTable load(const std::string& tsv_path);
    SynonymTable() = default;

    // normalize_for_match plus table lookup.
    std::string canonical(Attribute a, const std::string& value) const;

  private:
    std::map<std::pair<Attribute, std::string>, std::string> entries_;
};

/// Decides whether a guessed value counts as the truth. Categorical values
/// compare after normalization and synonym mapping; ages allow a ±5 year
/// tolerance or a containing "a-b" range; free-form values escalate to one
/// yes/no equivalence-judge call when plain comparison misses.
class Matcher {
  public:
    explicit Matcher(SynonymTable synonyms) : synonyms_(std::move(synonyms)) {}

    void set_judge(const TemplateSet* templates, std::shared_ptr<ChatGateway> judge,
                   DecodingParams params);
    bool has_judge() const { return judge_ != nullptr; }

    MatchVerdict match(const std::string& guess, const AttributeValue& truth) const;

    // First match among the first k guesses wins; matched_rank is its 1-based
    // position. Throws GatewayRequired when a needed judge is missing.
    MatchVerdict match_top_k(const std::vector<std::string>& guesses, const AttributeValue& truth,
                             int k) const;

  private:
    MatchVerdict match_age(const std::string& guess, const AttributeValue& truth) const;
    MatchVerdict match_free_form(const std::string& guess, const AttributeValue& truth) const;

    SynonymTable synonyms_;
    const TemplateSet* templates_ = nullptr;
    std::shared_ptr<ChatGateway> judge_;
    DecodingParams judge_params_;
};

struct AttackOutcome {
    AdversaryGuess guess;
    MatchVerdict verdict;
};

/// One attribute-inference attack: render the guessing prompt (optionally
/// disclosing the truth), call the model, parse with one format-correction
/// retry, and judge the top-k guesses.
AttackOutcome attack(const TemplateSet& templates, ChatGateway& gateway,
                     const DecodingParams& params, const std::string& text, Attribute attribute,
                     const AttributeValue& truth, bool disclose_truth, int top_k,
                     const AdversaryDemo& demo, const Matcher& matcher);

} // namespace decoy
