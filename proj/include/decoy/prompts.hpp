#pragma once

#include "decoy/attributes.hpp"
#include "decoy/errors.hpp"
#include "decoy/gateway.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace decoy {

enum class TemplateName {
    anonymizer,
    adversary,
    format_fix,
    adversary_format_fix,
    utility_judge,
    utility_format_fix,
    equivalence_judge,
};

std::string_view template_token(TemplateName name);

struct PromptTemplate {
    TemplateName name;
    std::string system_text;
    std::string user_text;
    std::string checksum; // fnv-1a over both texts, hex
};

/// All templates, loaded once from <dir>/<name>.{system,user}.txt and
/// immutable afterwards. Rendering is a pure function of the inputs.
class TemplateSet {
  public:
    static TemplateSet load(const std::string& dir);

    const PromptTemplate& get(TemplateName name) const;
    nlohmann::json checksums() const;

  private:
    std::map<TemplateName, PromptTemplate> templates_;
};

/// One worked rewrite example, stored as an editable data file. The lines it
/// contributes to the prompt follow the active conditioning, so an example
/// never shows a real value or explanation the configuration withholds.
struct AnonymizerDemo {
    Attribute attribute = Attribute::age;
    std::string target;
    std::string comment;
    std::string real;
    std::string explanation;
    std::string output_explanation;
    std::string output_rewrite;

    static AnonymizerDemo load(const std::string& demo_dir, Attribute attribute);
    std::string output_json() const;
};

struct AdversaryDemo {
    Attribute attribute = Attribute::age;
    std::string comment;
    std::string output;

    static AdversaryDemo load(const std::string& demo_dir, Attribute attribute);
};

// Checksum over every bundled demonstration file, for run metadata.
std::string demo_checksum(const std::string& demo_dir);

/// Per-attribute bindings for one rewrite prompt. Absent fields drop their
/// template line: target when untargeted, truth when the rewriter is not
/// shown the real value, reasoning when no adversary inference conditions it.
struct RewriteSlot {
    std::optional<std::string> target;
    std::optional<std::string> truth;
    std::optional<std::string> reasoning;
};

std::vector<ChatMessage> render_anonymizer(const TemplateSet& templates,
                                           const std::string& record_text,
                                           const std::map<Attribute, RewriteSlot>& slots,
                                           const AnonymizerDemo& demo);

std::vector<ChatMessage> render_adversary(const TemplateSet& templates,
                                          const std::string& record_text, Attribute attribute,
                                          const std::optional<std::string>& truth,
                                          const AdversaryDemo& demo);

std::vector<ChatMessage> render_utility_judge(const TemplateSet& templates,
                                              const std::string& original,
                                              const std::string& rewritten);

// which must be one of the three *_format_fix templates; attribute is needed
// only for the adversary variant.
std::vector<ChatMessage> render_format_fix(const TemplateSet& templates, TemplateName which,
                                           const std::string& wrongly_formatted,
                                           std::optional<Attribute> attribute = std::nullopt);

std::vector<ChatMessage> render_equivalence_judge(const TemplateSet& templates,
                                                  Attribute attribute, const std::string& guess,
                                                  const std::string& truth);

// Display names joined for prose ("age", "age and gender", "a, b and c").
std::string joined_display(const std::vector<Attribute>& attributes);

// Substitutes bound placeholder tokens line by line. A line whose only unbound
// tokens are droppable (TARGET_VALUE, GROUND_TRUTH, EXPLANATION) is removed;
// any other unbound token raises UnboundPlaceholder. Substituted values are
// never rescanned. Exposed for tests.
std::string substitute_template(const std::string& text,
                                const std::map<std::string, std::string>& bindings);

} // namespace decoy
