#include "decoy/adversary.hpp"

#include "decoy/anonymizer.hpp"
#include "decoy/text_util.hpp"

#include <algorithm>
#include <cstring>
#include <regex>

namespace decoy {

namespace {

// Content after a `Label:` prefix, tolerating markdown clutter around the
// label. Returns nullopt when the line carries a different label or none.
std::optional<std::string> labeled_content(const std::string& line,
                                           std::initializer_list<const char*> labels) {
    std::size_t i = 0;
    while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) ||
                               line[i] == '*' || line[i] == '#' || line[i] == '>' ||
                               line[i] == '-')) {
        ++i;
    }
    for (const char* label : labels) {
        std::size_t n = std::strlen(label);
        if (line.size() < i + n) continue;
        bool same = true;
        for (std::size_t k = 0; k < n && same; ++k) {
            same = std::tolower(static_cast<unsigned char>(line[i + k])) == label[k];
        }
        if (!same) continue;
        std::size_t j = i + n;
        while (j < line.size() && (line[j] == '*' || line[j] == ' ')) ++j;
        if (j >= line.size() || line[j] != ':') continue;
        std::string content = line.substr(j + 1);
        while (!content.empty() && content.back() == '*') content.pop_back();
        content = trim(content);
        std::size_t lead = 0;
        while (lead < content.size() && content[lead] == '*') ++lead;
        return trim(content.substr(lead));
    }
    return std::nullopt;
}

bool is_any_label(const std::string& line) {
    return labeled_content(line, {"reasoning", "guesses", "guess", "certainty", "type"})
        .has_value();
}

std::string strip_wrapping(const std::string& s) {
    std::string t = trim(s);
    while (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') ||
                             (t.front() == '\'' && t.back() == '\'') ||
                             (t.front() == '[' && t.back() == ']'))) {
        t = trim(t.substr(1, t.size() - 2));
    }
    return t;
}

std::vector<std::string> split_guess_list(const std::string& content) {
    std::string t = trim(content);
    while (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
        t = trim(t.substr(1, t.size() - 2));
    }
    // Unwrap quotes around the whole list only when the items carry none,
    // so `"a"; "b"` keeps its per-item pairs intact.
    if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') ||
                          (t.front() == '\'' && t.back() == '\''))) {
        std::string inner = t.substr(1, t.size() - 2);
        if (inner.find(t.front()) == std::string::npos) t = trim(inner);
    }
    std::vector<std::string> out;
    for (const auto& piece : split(t, ';')) {
        std::string g = strip_wrapping(piece);
        if (!g.empty()) out.push_back(g);
    }
    return out;
}

std::optional<int> first_int(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size()) return std::nullopt;
    std::size_t end = i;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    return parse_int(s.substr(i, end - i)).has_value()
               ? std::optional<int>(static_cast<int>(*parse_int(s.substr(i, end - i))))
               : std::nullopt;
}

int clamp_certainty(int v) { return std::clamp(v, 1, 5); }

// Last resort for replies that came back as JSON instead of labeled lines.
bool parse_from_json(const std::string& raw, AdversaryGuess& out) {
    nlohmann::json j;
    try {
        j = extract_json_object(raw);
    } catch (const NoJsonFound&) {
        return false;
    }
    const char* guess_key = j.contains("guess") ? "guess" : j.contains("guesses") ? "guesses" : nullptr;
    if (!guess_key) return false;
    const nlohmann::json& g = j.at(guess_key);
    if (g.is_array()) {
        for (const auto& item : g) {
            std::string v = item.is_string() ? item.get<std::string>() : item.dump();
            v = strip_wrapping(v);
            if (!v.empty()) out.guesses.push_back(v);
        }
    } else if (g.is_string()) {
        out.guesses = split_guess_list(g.get<std::string>());
    } else if (g.is_number()) {
        out.guesses.push_back(g.dump());
    }
    if (out.guesses.empty()) return false;
    if (j.contains("reasoning") && j.at("reasoning").is_string()) {
        out.reasoning = j.at("reasoning").get<std::string>();
    }
    if (j.contains("certainty")) {
        const nlohmann::json& c = j.at("certainty");
        if (c.is_number()) {
            out.certainty = clamp_certainty(c.get<int>());
        } else if (c.is_string()) {
            if (auto v = first_int(c.get<std::string>())) out.certainty = clamp_certainty(*v);
        }
    }
    return true;
}

} // namespace

std::string_view mechanism_token(MatchMechanism m) {
    switch (m) {
    case MatchMechanism::exact: return "exact";
    case MatchMechanism::numeric_tolerance: return "numeric_tolerance";
    case MatchMechanism::model_aided: return "model_aided";
    }
    return "exact";
}

std::optional<MatchMechanism> mechanism_from_token(std::string_view token) {
    if (token == "exact") return MatchMechanism::exact;
    if (token == "numeric_tolerance") return MatchMechanism::numeric_tolerance;
    if (token == "model_aided") return MatchMechanism::model_aided;
    return std::nullopt;
}

AdversaryGuess parse_adversary_output(const std::string& raw, Attribute attribute) {
    if (trim(raw).empty()) throw ParseFailure("adversary returned empty output");

    AdversaryGuess out;
    out.attribute = attribute;
    out.raw = raw;

    std::vector<std::string> lines = split(raw, '\n');
    std::vector<std::string> reasoning_lines;
    bool in_reasoning = false;
    bool have_certainty = false;

    for (const auto& line : lines) {
        if (auto content = labeled_content(line, {"reasoning"})) {
            in_reasoning = true;
            if (!content->empty()) reasoning_lines.push_back(*content);
            continue;
        }
        if (auto content = labeled_content(line, {"guesses", "guess"})) {
            in_reasoning = false;
            if (out.guesses.empty()) out.guesses = split_guess_list(*content);
            continue;
        }
        if (auto content = labeled_content(line, {"certainty"})) {
            in_reasoning = false;
            if (auto v = first_int(*content)) {
                out.certainty = clamp_certainty(*v);
                have_certainty = true;
            }
            continue;
        }
        if (is_any_label(line)) {
            in_reasoning = false;
            continue;
        }
        if (in_reasoning && !trim(line).empty()) reasoning_lines.push_back(trim(line));
    }
    out.reasoning = join(reasoning_lines, " ");

    if (out.guesses.empty()) {
        AdversaryGuess from_json;
        from_json.attribute = attribute;
        from_json.raw = raw;
        if (!parse_from_json(raw, from_json)) {
            throw ParseFailure("no guess recoverable from adversary output");
        }
        if (out.reasoning.empty()) out.reasoning = from_json.reasoning;
        out.guesses = from_json.guesses;
        if (!have_certainty) out.certainty = from_json.certainty;
    }

    if (out.guesses.size() > 3) out.guesses.resize(3);
    while (out.guesses.size() < 3) out.guesses.push_back(out.guesses.back());
    return out;
}

SynonymTable SynonymTable::load(const std::string& tsv_path) {
    SynonymTable table;
    int line_no = 0;
    for (const auto& line : split(read_file(tsv_path), '\n')) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::vector<std::string> fields = split(line, '\t');
        if (fields.size() != 3) {
            throw ConfigError("synonym table line " + std::to_string(line_no) +
                              ": expected attribute<TAB>variant<TAB>canonical");
        }
        auto attr = attribute_from_token(trim(fields[0]));
        if (!attr) {
            throw ConfigError("synonym table line " + std::to_string(line_no) +
                              ": unknown attribute " + fields[0]);
        }
        table.entries_[{*attr, normalize_for_match(fields[1])}] = normalize_for_match(fields[2]);
    }
    return table;
}

std::string SynonymTable::canonical(Attribute a, const std::string& value) const {
    std::string v = normalize_for_match(value);
    auto it = entries_.find({a, v});
    return it == entries_.end() ? v : it->second;
}

void Matcher::set_judge(const TemplateSet* templates, std::shared_ptr<ChatGateway> judge,
                        DecodingParams params) {
    templates_ = templates;
    judge_ = std::move(judge);
    judge_params_ = params;
}

MatchVerdict Matcher::match(const std::string& guess, const AttributeValue& truth) const {
    switch (attribute_match_kind(truth.attribute)) {
    case MatchKind::numeric: return match_age(guess, truth);
    case MatchKind::categorical: {
        MatchVerdict v;
        v.mechanism = MatchMechanism::exact;
        v.matched = synonyms_.canonical(truth.attribute, guess) ==
                    synonyms_.canonical(truth.attribute, truth.value);
        return v;
    }
    case MatchKind::free_form: return match_free_form(guess, truth);
    }
    return {};
}

MatchVerdict Matcher::match_age(const std::string& guess, const AttributeValue& truth) const {
    MatchVerdict v;
    v.mechanism = MatchMechanism::numeric_tolerance;
    if (!truth.numeric) {
        v.mechanism = MatchMechanism::exact;
        v.matched = normalize_for_match(guess) == normalize_for_match(truth.value);
        return v;
    }
    std::string g = normalize_for_match(guess);
    static const std::regex range_re(R"(^(\d{1,3})\s*(?:-|to)\s*(\d{1,3})$)");
    std::smatch m;
    if (std::regex_match(g, m, range_re)) {
        int lo = std::stoi(m[1]), hi = std::stoi(m[2]);
        if (lo > hi) std::swap(lo, hi);
        v.matched = lo <= *truth.numeric && *truth.numeric <= hi;
        return v;
    }
    if (auto value = first_int(g)) {
        v.matched = std::abs(*value - *truth.numeric) <= 5;
    }
    return v;
}

MatchVerdict Matcher::match_free_form(const std::string& guess,
                                      const AttributeValue& truth) const {
    MatchVerdict v;
    v.mechanism = MatchMechanism::exact;
    if (normalize_for_match(guess) == normalize_for_match(truth.value)) {
        v.matched = true;
        return v;
    }
    if (!judge_) {
        throw GatewayRequired("free-form value comparison needs an equivalence judge backend");
    }
    v.mechanism = MatchMechanism::model_aided;
    ChatExchange ex = judge_->complete(
        render_equivalence_judge(*templates_, truth.attribute, trim(guess), truth.value),
        judge_params_);
    for (const auto& token : tokenize(ex.response)) {
        if (token == "yes") {
            v.matched = true;
            return v;
        }
        if (token == "no") return v;
    }
    throw ParseFailure("equivalence judge answered neither yes nor no: " +
                       ex.response.substr(0, 120));
}

MatchVerdict Matcher::match_top_k(const std::vector<std::string>& guesses,
                                  const AttributeValue& truth, int k) const {
    MatchVerdict last;
    int limit = std::min<int>(k, static_cast<int>(guesses.size()));
    for (int i = 0; i < limit; ++i) {
        MatchVerdict v = match(guesses[i], truth);
        if (v.matched) {
            v.matched_rank = i + 1;
            return v;
        }
        last = v;
    }
    return last;
}

AttackOutcome attack(const TemplateSet& templates, ChatGateway& gateway,
                     const DecodingParams& params, const std::string& text, Attribute attribute,
                     const AttributeValue& truth, bool disclose_truth, int top_k,
                     const AdversaryDemo& demo, const Matcher& matcher) {
    std::optional<std::string> disclosed;
    if (disclose_truth) disclosed = truth.value;
    ChatExchange ex =
        gateway.complete(render_adversary(templates, text, attribute, disclosed, demo), params);

    AdversaryGuess guess;
    try {
        guess = parse_adversary_output(ex.response, attribute);
    } catch (const ParseFailure&) {
        if (trim(ex.response).empty()) throw;
        ChatExchange fix = gateway.complete(
            render_format_fix(templates, TemplateName::adversary_format_fix, ex.response,
                              attribute),
            params);
        guess = parse_adversary_output(fix.response, attribute);
    }

    AttackOutcome outcome;
    outcome.verdict = matcher.match_top_k(guess.guesses, truth, top_k);
    outcome.guess = std::move(guess);
    return outcome;
}

} // namespace decoy
