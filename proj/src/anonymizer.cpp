#include "decoy/anonymizer.hpp"

#include "decoy/text_util.hpp"

namespace decoy {

namespace {

// Cuts ```...``` fence markers, keeping the fenced body.
std::string strip_fences(const std::string& raw) {
    std::string out;
    for (const auto& piece : split(raw, '\n')) {
        std::string t = trim(piece);
        if (t.rfind("```", 0) == 0) continue;
        out += piece;
        out += '\n';
    }
    return out;
}

// Returns the balanced object starting at `start` ('{'), or empty if the
// braces never close. Skips braces inside string literals.
std::string balanced_object(const std::string& text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}') {
            if (--depth == 0) return text.substr(start, i - start + 1);
        }
    }
    return "";
}

std::string first_string(const nlohmann::json& j, std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
        if (j.contains(key) && j.at(key).is_string()) return j.at(key).get<std::string>();
    }
    return "";
}

} // namespace

nlohmann::json extract_json_object(const std::string& raw) {
    for (const std::string& text : {strip_fences(raw), raw}) {
        for (std::size_t pos = text.find('{'); pos != std::string::npos;
             pos = text.find('{', pos + 1)) {
            std::string body = balanced_object(text, pos);
            if (body.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
            if (!j.is_discarded() && j.is_object()) return j;
        }
    }
    throw NoJsonFound("no parseable JSON object in model output");
}

RewriteResult rewrite(const TemplateSet& templates, ChatGateway& gateway,
                      const DecodingParams& params, const std::string& text,
                      const std::map<Attribute, RewriteSlot>& slots, const AnonymizerDemo& demo) {
    ChatExchange ex = gateway.complete(render_anonymizer(templates, text, slots, demo), params);

    RewriteResult result;
    result.raw = ex.response;

    nlohmann::json parsed;
    bool ok = false;
    try {
        parsed = extract_json_object(ex.response);
        ok = parsed.contains("anonymized_comment");
    } catch (const NoJsonFound&) {
    }

    if (!ok) {
        if (trim(ex.response).empty()) {
            throw ParseFailure("rewrite model returned empty output");
        }
        ChatExchange fix = gateway.complete(
            render_format_fix(templates, TemplateName::format_fix, ex.response), params);
        try {
            parsed = extract_json_object(fix.response);
        } catch (const NoJsonFound&) {
            throw ParseFailure("rewrite output unusable even after format correction");
        }
        if (!parsed.contains("anonymized_comment")) {
            throw ParseFailure("format correction did not produce an anonymized_comment key");
        }
        result.repaired = true;
    }

    if (parsed.at("anonymized_comment").is_string()) {
        result.anonymized_text = parsed.at("anonymized_comment").get<std::string>();
    }
    result.explanation = first_string(parsed, {"explanation"});
    if (trim(result.anonymized_text).empty()) {
        throw EmptyRewrite("model produced an empty anonymized_comment");
    }
    return result;
}

} // namespace decoy
