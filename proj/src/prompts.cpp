#include "decoy/prompts.hpp"

#include "decoy/text_util.hpp"

#include <array>
#include <cctype>

namespace decoy {

namespace {

// Longest first so the scan never matches a token inside a longer one.
const std::array<std::string, 10> kTokens = {
    "WRONGLY_FORMATTED_TEXT", "REWRITTEN_TEXT", "ORIGINAL_TEXT", "TARGET_VALUE",
    "GROUND_TRUTH",           "EXPLANATION",    "USER_TEXT",     "ATTRIBUTE",
    "EXAMPLE",                "GUESS",
};

bool droppable(const std::string& token) {
    return token == "TARGET_VALUE" || token == "GROUND_TRUTH" || token == "EXPLANATION";
}

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

bool word_char(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return std::isalnum(u) != 0 || c == '_';
}

// Substitutes one line; nullopt means the line is dropped. Values are emitted
// verbatim, never rescanned for tokens. A token only counts when it stands
// alone: "EXAMPLE" inside "<END_OF_EXAMPLE>" is literal text.
std::optional<std::string> substitute_line(const std::string& line,
                                           const std::map<std::string, std::string>& bindings) {
    std::string out;
    std::size_t i = 0;
    while (i < line.size()) {
        const std::string* hit = nullptr;
        for (const auto& token : kTokens) {
            if (line.compare(i, token.size(), token) != 0) continue;
            if (i > 0 && word_char(line[i - 1])) continue;
            std::size_t end = i + token.size();
            if (end < line.size() && word_char(line[end])) continue;
            hit = &token;
            break;
        }
        if (!hit) {
            out += line[i++];
            continue;
        }
        auto it = bindings.find(*hit);
        if (it == bindings.end() || it->second.empty()) {
            if (droppable(*hit)) return std::nullopt;
            throw UnboundPlaceholder("placeholder " + *hit + " is unbound");
        }
        out += it->second;
        i += hit->size();
    }
    return out;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    lines.push_back(current);
    return lines;
}

struct ValueLines {
    std::string target;
    std::string user;
    std::string real;
    std::string explanation;
};

bool line_has(const std::string& line, const std::string& token) {
    return line.find(token) != std::string::npos;
}

ValueLines extract_value_lines(const std::string& user_text) {
    ValueLines v;
    for (const auto& line : split_lines(user_text)) {
        if (line_has(line, "TARGET_VALUE")) v.target = line;
        else if (line_has(line, "USER_TEXT")) v.user = line;
        else if (line_has(line, "GROUND_TRUTH")) v.real = line;
        else if (line_has(line, "EXPLANATION")) v.explanation = line;
    }
    return v;
}

// The example block mirrors the live value lines, so it only ever shows the
// fields the active conditioning would show.
std::string compose_anonymizer_example(const ValueLines& lines, const AnonymizerDemo& demo,
                                       bool with_target, bool with_truth, bool with_explanation) {
    std::map<std::string, std::string> b{{"ATTRIBUTE", std::string(attribute_display(demo.attribute))},
                                         {"USER_TEXT", demo.comment}};
    if (with_target) b["TARGET_VALUE"] = demo.target;
    if (with_truth) b["GROUND_TRUTH"] = demo.real;
    if (with_explanation) b["EXPLANATION"] = demo.explanation;

    std::vector<std::string> out;
    for (const std::string* tpl : {&lines.target, &lines.user, &lines.real, &lines.explanation}) {
        if (tpl->empty()) continue;
        if (auto rendered = substitute_line(*tpl, b)) out.push_back(*rendered);
    }
    return join(out, "\n") + "\nAssistant output: " + demo.output_json();
}

} // namespace

std::string_view template_token(TemplateName name) {
    switch (name) {
    case TemplateName::anonymizer: return "anonymizer";
    case TemplateName::adversary: return "adversary";
    case TemplateName::format_fix: return "format_fix";
    case TemplateName::adversary_format_fix: return "adversary_format_fix";
    case TemplateName::utility_judge: return "utility_judge";
    case TemplateName::utility_format_fix: return "utility_format_fix";
    case TemplateName::equivalence_judge: return "equivalence_judge";
    }
    return "anonymizer";
}

std::string substitute_template(const std::string& text,
                                const std::map<std::string, std::string>& bindings) {
    std::vector<std::string> out;
    for (const auto& line : split_lines(text)) {
        if (auto rendered = substitute_line(line, bindings)) out.push_back(*rendered);
    }
    return join(out, "\n");
}

TemplateSet TemplateSet::load(const std::string& dir) {
    TemplateSet set;
    for (TemplateName name :
         {TemplateName::anonymizer, TemplateName::adversary, TemplateName::format_fix,
          TemplateName::adversary_format_fix, TemplateName::utility_judge,
          TemplateName::utility_format_fix, TemplateName::equivalence_judge}) {
        std::string base = dir + "/" + std::string(template_token(name));
        PromptTemplate tpl;
        tpl.name = name;
        tpl.system_text = rstrip(read_file(base + ".system.txt"));
        tpl.user_text = rstrip(read_file(base + ".user.txt"));
        tpl.checksum = to_hex(fnv1a64(tpl.system_text + "\n" + tpl.user_text));
        set.templates_.emplace(name, std::move(tpl));
    }
    return set;
}

const PromptTemplate& TemplateSet::get(TemplateName name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw ConfigError("template not loaded: " + std::string(template_token(name)));
    }
    return it->second;
}

nlohmann::json TemplateSet::checksums() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, tpl] : templates_) j[std::string(template_token(name))] = tpl.checksum;
    return j;
}

AnonymizerDemo AnonymizerDemo::load(const std::string& demo_dir, Attribute attribute) {
    std::string path =
        demo_dir + "/anonymizer/" + std::string(attribute_token(attribute)) + ".json";
    nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("demo is not a JSON object: " + path);
    AnonymizerDemo demo;
    demo.attribute = attribute;
    try {
        demo.target = j.at("target").get<std::string>();
        demo.comment = j.at("comment").get<std::string>();
        demo.real = j.at("real").get<std::string>();
        demo.explanation = j.at("explanation").get<std::string>();
        demo.output_explanation = j.at("output").at("explanation").get<std::string>();
        demo.output_rewrite = j.at("output").at("anonymized_comment").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("demo " + path + " is missing a field: " + e.what());
    }
    if (demo.comment.empty() || demo.output_rewrite.empty()) {
        throw ConfigError("demo " + path + " has an empty comment or rewrite");
    }
    return demo;
}

std::string AnonymizerDemo::output_json() const {
    return nlohmann::json{{"explanation", output_explanation},
                          {"anonymized_comment", output_rewrite}}
        .dump();
}

AdversaryDemo AdversaryDemo::load(const std::string& demo_dir, Attribute attribute) {
    std::string path = demo_dir + "/adversary/" + std::string(attribute_token(attribute)) + ".json";
    nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("demo is not a JSON object: " + path);
    AdversaryDemo demo;
    demo.attribute = attribute;
    try {
        demo.comment = j.at("comment").get<std::string>();
        demo.output = j.at("output").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("demo " + path + " is missing a field: " + e.what());
    }
    if (demo.comment.empty() || demo.output.empty()) {
        throw ConfigError("demo " + path + " has an empty field");
    }
    return demo;
}

std::string demo_checksum(const std::string& demo_dir) {
    std::string all;
    for (const char* group : {"anonymizer", "adversary"}) {
        for (Attribute a : all_attributes()) {
            all += read_file(demo_dir + "/" + group + "/" + std::string(attribute_token(a)) +
                             ".json");
            all += '\n';
        }
    }
    return to_hex(fnv1a64(all));
}

std::string joined_display(const std::vector<Attribute>& attributes) {
    std::vector<std::string> names;
    for (Attribute a : attributes) names.emplace_back(attribute_display(a));
    if (names.empty()) return "";
    if (names.size() == 1) return names[0];
    std::string head = join(std::vector<std::string>(names.begin(), names.end() - 1), ", ");
    return head + " and " + names.back();
}

std::vector<ChatMessage> render_anonymizer(const TemplateSet& templates,
                                           const std::string& record_text,
                                           const std::map<Attribute, RewriteSlot>& slots,
                                           const AnonymizerDemo& demo) {
    if (slots.empty()) throw ConfigError("rewrite prompt needs at least one attribute");
    if (trim(record_text).empty()) throw UnboundPlaceholder("USER_TEXT is empty");

    const PromptTemplate& tpl = templates.get(TemplateName::anonymizer);
    ValueLines value_lines = extract_value_lines(tpl.user_text);

    std::vector<Attribute> attrs;
    bool with_target = false, with_truth = false, with_explanation = false;
    for (const auto& [attr, slot] : slots) {
        attrs.push_back(attr);
        with_target |= slot.target.has_value();
        with_truth |= slot.truth.has_value();
        with_explanation |= slot.reasoning.has_value();
    }

    std::map<std::string, std::string> base{
        {"ATTRIBUTE", joined_display(attrs)},
        {"EXAMPLE",
         compose_anonymizer_example(value_lines, demo, with_target, with_truth, with_explanation)},
    };

    std::string user;
    if (slots.size() == 1) {
        const auto& [attr, slot] = *slots.begin();
        std::map<std::string, std::string> b = base;
        b["USER_TEXT"] = record_text;
        if (slot.target) b["TARGET_VALUE"] = *slot.target;
        if (slot.truth) b["GROUND_TRUTH"] = *slot.truth;
        if (slot.reasoning) b["EXPLANATION"] = *slot.reasoning;
        user = substitute_template(tpl.user_text, b);
    } else {
        // One target/real/explanation block per attribute, then the comment once.
        std::vector<std::string> blocks;
        for (const auto& [attr, slot] : slots) {
            std::map<std::string, std::string> b{
                {"ATTRIBUTE", std::string(attribute_display(attr))}};
            if (slot.target) b["TARGET_VALUE"] = *slot.target;
            if (slot.truth) b["GROUND_TRUTH"] = *slot.truth;
            if (slot.reasoning) b["EXPLANATION"] = *slot.reasoning;
            std::vector<std::string> block;
            for (const std::string* line :
                 {&value_lines.target, &value_lines.real, &value_lines.explanation}) {
                if (line->empty()) continue;
                if (auto rendered = substitute_line(*line, b)) block.push_back(*rendered);
            }
            if (!block.empty()) blocks.push_back(join(block, "\n"));
        }
        std::string region = join(blocks, "\n\n");
        if (auto uline = substitute_line(value_lines.user, {{"USER_TEXT", record_text}})) {
            region = region.empty() ? *uline : region + "\n\n" + *uline;
        }

        std::vector<std::string> out;
        bool region_emitted = false;
        for (const auto& line : split_lines(tpl.user_text)) {
            bool is_value = line_has(line, "TARGET_VALUE") || line_has(line, "USER_TEXT") ||
                            line_has(line, "GROUND_TRUTH") || line_has(line, "EXPLANATION");
            if (is_value) {
                if (!region_emitted) {
                    out.push_back(region);
                    region_emitted = true;
                }
                continue;
            }
            if (auto rendered = substitute_line(line, base)) out.push_back(*rendered);
        }
        user = join(out, "\n");
    }

    return {{Role::system, substitute_template(tpl.system_text, base)}, {Role::user, user}};
}

std::vector<ChatMessage> render_adversary(const TemplateSet& templates,
                                          const std::string& record_text, Attribute attribute,
                                          const std::optional<std::string>& truth,
                                          const AdversaryDemo& demo) {
    if (trim(record_text).empty()) throw UnboundPlaceholder("USER_TEXT is empty");
    const PromptTemplate& tpl = templates.get(TemplateName::adversary);
    std::map<std::string, std::string> b{
        {"ATTRIBUTE", std::string(attribute_display(attribute))},
        {"USER_TEXT", record_text},
        {"EXAMPLE", "Comment: " + demo.comment + "\nAssistant output: " + demo.output},
    };
    if (truth && !truth->empty()) b["GROUND_TRUTH"] = *truth;
    return {{Role::system, substitute_template(tpl.system_text, b)},
            {Role::user, substitute_template(tpl.user_text, b)}};
}

std::vector<ChatMessage> render_utility_judge(const TemplateSet& templates,
                                              const std::string& original,
                                              const std::string& rewritten) {
    const PromptTemplate& tpl = templates.get(TemplateName::utility_judge);
    std::map<std::string, std::string> b{{"ORIGINAL_TEXT", original},
                                         {"REWRITTEN_TEXT", rewritten}};
    return {{Role::system, substitute_template(tpl.system_text, b)},
            {Role::user, substitute_template(tpl.user_text, b)}};
}

std::vector<ChatMessage> render_format_fix(const TemplateSet& templates, TemplateName which,
                                           const std::string& wrongly_formatted,
                                           std::optional<Attribute> attribute) {
    if (which != TemplateName::format_fix && which != TemplateName::adversary_format_fix &&
        which != TemplateName::utility_format_fix) {
        throw ConfigError("not a format-correction template: " +
                          std::string(template_token(which)));
    }
    const PromptTemplate& tpl = templates.get(which);
    std::map<std::string, std::string> b{{"WRONGLY_FORMATTED_TEXT", wrongly_formatted}};
    if (attribute) b["ATTRIBUTE"] = std::string(attribute_display(*attribute));
    return {{Role::system, substitute_template(tpl.system_text, b)},
            {Role::user, substitute_template(tpl.user_text, b)}};
}

std::vector<ChatMessage> render_equivalence_judge(const TemplateSet& templates,
                                                  Attribute attribute, const std::string& guess,
                                                  const std::string& truth) {
    const PromptTemplate& tpl = templates.get(TemplateName::equivalence_judge);
    std::map<std::string, std::string> b{{"ATTRIBUTE", std::string(attribute_display(attribute))},
                                         {"GUESS", guess},
                                         {"GROUND_TRUTH", truth}};
    return {{Role::system, substitute_template(tpl.system_text, b)},
            {Role::user, substitute_template(tpl.user_text, b)}};
}

} // namespace decoy
