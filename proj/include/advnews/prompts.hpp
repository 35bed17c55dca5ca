#pragma once

#include <map>
#include <string>

#include "advnews/util.hpp"

namespace advnews {

enum class TemplateId {
    detector,
    detector_rag,
    detector_rationale,
    generator,
    generator_feedback,
    contradiction,
};

std::string template_name(TemplateId id);
TemplateId template_from_name(const std::string& name);

/// Placeholders use self-closing tag syntax: <news/>, <retrieval/>,
/// <last_iter_news/>, <rationale/>, <fake_news/>. The date placeholder
/// <today/> is bound from `today_string`.
struct PromptTemplate {
    TemplateId id;
    std::string system_text;
    std::string user_text;
    std::string today_string;
};

using Bindings = std::map<std::string, std::string>;

struct RenderedPrompt {
    std::string system_text;
    std::string user_text;
};

/// Substitutes every placeholder verbatim in a single left-to-right pass;
/// binding values are inserted as-is and never re-scanned. Throws ParseFailure
/// naming the placeholder when a binding is missing.
RenderedPrompt render_prompt(const PromptTemplate& tpl, const Bindings& bindings);

/// The shipped prompt set with a configurable date string.
class PromptLibrary {
public:
    explicit PromptLibrary(std::string today_string);

    const PromptTemplate& get(TemplateId id) const;

    /// Rationale prompt without the retrieval block, for retrieval-free
    /// detectors. Shares the detector_rationale template id.
    const PromptTemplate& rationale_plain() const { return rationale_plain_; }

    /// Feedback-generation prompt without the fact-checker rationale block,
    /// for score-only feedback modes. Shares the generator_feedback id.
    const PromptTemplate& feedback_without_rationale() const { return feedback_no_rationale_; }

    const std::string& today_string() const { return today_; }

private:
    std::string today_;
    std::map<TemplateId, PromptTemplate> templates_;
    PromptTemplate rationale_plain_;
    PromptTemplate feedback_no_rationale_;
};

/// First (or last) standalone integer in [1, 10]; surrounding whitespace and
/// punctuation are tolerated. Throws ParseFailure when none is present.
int parse_score(const std::string& text, bool take_last = false);

/// Case-insensitive leading "yes" -> true, "no" -> false after trimming
/// whitespace and leading punctuation. Throws ParseFailure otherwise.
bool parse_binary(const std::string& text);

}  // namespace advnews
