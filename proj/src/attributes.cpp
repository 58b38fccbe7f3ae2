#include "decoy/attributes.hpp"

#include "decoy/errors.hpp"
#include "decoy/text_util.hpp"

namespace decoy {

const std::array<Attribute, kAttributeCount>& all_attributes() {
    static const std::array<Attribute, kAttributeCount> all = {
        Attribute::age,
        Attribute::gender,
        Attribute::occupation,
        Attribute::education,
        Attribute::income_level,
        Attribute::relationship_status,
        Attribute::birth_location,
        Attribute::current_location,
    };
    return all;
}

std::string_view attribute_token(Attribute a) {
    switch (a) {
        case Attribute::age: return "age";
        case Attribute::gender: return "gender";
        case Attribute::occupation: return "occupation";
        case Attribute::education: return "education";
        case Attribute::income_level: return "income_level";
        case Attribute::relationship_status: return "relationship_status";
        case Attribute::birth_location: return "birth_location";
        case Attribute::current_location: return "current_location";
    }
    return "";
}

std::string_view attribute_display(Attribute a) {
    switch (a) {
        case Attribute::age: return "age";
        case Attribute::gender: return "gender";
        case Attribute::occupation: return "occupation";
        case Attribute::education: return "education";
        case Attribute::income_level: return "income level";
        case Attribute::relationship_status: return "relationship status";
        case Attribute::birth_location: return "birth location";
        case Attribute::current_location: return "current location";
    }
    return "";
}

MatchKind attribute_match_kind(Attribute a) {
    switch (a) {
        case Attribute::age:
            return MatchKind::numeric;
        case Attribute::gender:
        case Attribute::income_level:
        case Attribute::relationship_status:
            return MatchKind::categorical;
        case Attribute::occupation:
        case Attribute::education:
        case Attribute::birth_location:
        case Attribute::current_location:
            return MatchKind::free_form;
    }
    return MatchKind::free_form;
}

std::optional<Attribute> attribute_from_token(std::string_view token) {
    for (Attribute a : all_attributes()) {
        if (attribute_token(a) == token) return a;
    }
    return std::nullopt;
}

AttributeValue make_attribute_value(Attribute a, std::string_view raw) {
    AttributeValue v;
    v.attribute = a;
    v.value = trim(raw);
    if (v.value.empty()) {
        throw Error(std::string("empty value for attribute ") + std::string(attribute_token(a)));
    }
    if (attribute_match_kind(a) == MatchKind::categorical) {
        v.value = normalize_for_match(v.value);
    }
    if (a == Attribute::age) {
        if (auto n = parse_int(v.value); n && *n >= 10 && *n <= 100) {
            v.numeric = static_cast<int>(*n);
        }
    }
    return v;
}

std::string_view source_token(RecordSource s) {
    switch (s) {
        case RecordSource::synthetic_reddit: return "synthetic_reddit";
        case RecordSource::self_disclosure: return "self_disclosure";
        case RecordSource::finetune_pool: return "finetune_pool";
    }
    return "";
}

std::optional<RecordSource> source_from_token(std::string_view token) {
    if (token == "synthetic_reddit") return RecordSource::synthetic_reddit;
    if (token == "self_disclosure") return RecordSource::self_disclosure;
    if (token == "finetune_pool") return RecordSource::finetune_pool;
    return std::nullopt;
}

} // namespace decoy
