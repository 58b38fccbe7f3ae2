#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace decoy {

/// The eight private attributes the adversary tries to infer.
enum class Attribute {
    age,
    gender,
    occupation,
    education,
    income_level,
    relationship_status,
    birth_location,
    current_location,
};

/// How guesses against this attribute are judged correct.
enum class MatchKind { numeric, categorical, free_form };

inline constexpr int kAttributeCount = 8;

const std::array<Attribute, kAttributeCount>& all_attributes();

// Stable lowercase token used in every file format ("income_level").
std::string_view attribute_token(Attribute a);

// Human wording used inside prompts ("income level").
std::string_view attribute_display(Attribute a);

MatchKind attribute_match_kind(Attribute a);

std::optional<Attribute> attribute_from_token(std::string_view token);

struct AttributeValue {
    Attribute attribute = Attribute::age;
    std::string value;        // trimmed; case-folded for categorical kinds
    std::optional<int> numeric; // present iff attribute == age and value is an int in [10, 100]
};

// Normalizes raw text into an AttributeValue. Throws Error on empty input.
AttributeValue make_attribute_value(Attribute a, std::string_view raw);

enum class RecordSource { synthetic_reddit, self_disclosure, finetune_pool };

std::string_view source_token(RecordSource s);
std::optional<RecordSource> source_from_token(std::string_view token);

/// One text sample plus its ground-truth private-attribute map.
struct Record {
    std::string id;
    std::string text;
    std::map<Attribute, AttributeValue> truth;
    RecordSource source = RecordSource::synthetic_reddit;
};

} // namespace decoy
