#include "advnews/prompts.hpp"

#include <cctype>

namespace advnews {

std::string template_name(TemplateId id) {
    switch (id) {
        case TemplateId::detector: return "detector";
        case TemplateId::detector_rag: return "detector_rag";
        case TemplateId::detector_rationale: return "detector_rationale";
        case TemplateId::generator: return "generator";
        case TemplateId::generator_feedback: return "generator_feedback";
        case TemplateId::contradiction: return "contradiction";
    }
    return "detector";
}

TemplateId template_from_name(const std::string& name) {
    if (name == "detector") return TemplateId::detector;
    if (name == "detector_rag") return TemplateId::detector_rag;
    if (name == "detector_rationale") return TemplateId::detector_rationale;
    if (name == "generator") return TemplateId::generator;
    if (name == "generator_feedback") return TemplateId::generator_feedback;
    if (name == "contradiction") return TemplateId::contradiction;
    throw ConfigError("unknown template '" + name + "'");
}

namespace {

std::string substitute(const std::string& text, const Bindings& bindings,
                       const std::string& today) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find('<', pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        std::size_t close = text.find("/>", open);
        if (close == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        std::string name = text.substr(open + 1, close - open - 1);
        bool is_placeholder = !name.empty();
        for (char c : name) {
            if (!(std::islower(static_cast<unsigned char>(c)) || c == '_')) {
                is_placeholder = false;
                break;
            }
        }
        if (!is_placeholder) {
            out.append(text, pos, open + 1 - pos);
            pos = open + 1;
            continue;
        }
        out.append(text, pos, open - pos);
        if (name == "today") {
            out.append(today);
        } else {
            auto it = bindings.find(name);
            if (it == bindings.end())
                throw ParseFailure("unbound placeholder <" + name + "/>");
            out.append(it->second);
        }
        pos = close + 2;
    }
    return out;
}

}  // namespace

RenderedPrompt render_prompt(const PromptTemplate& tpl, const Bindings& bindings) {
    return RenderedPrompt{substitute(tpl.system_text, bindings, tpl.today_string),
                          substitute(tpl.user_text, bindings, tpl.today_string)};
}

PromptLibrary::PromptLibrary(std::string today_string) : today_(std::move(today_string)) {
    auto add = [&](TemplateId id, std::string system_text, std::string user_text) {
        templates_[id] = PromptTemplate{id, std::move(system_text), std::move(user_text), today_};
    };

    add(TemplateId::detector,
        "Today is <today/>. You predict the plausibility of a news you haven't seen.",
        "Please predict the plausibility of the following news story:\n"
        "<news/>\n"
        "Please give a number representing the plausibility (1-10) and nothing else.");

    add(TemplateId::detector_rag,
        "Today is <today/>. You predict the plausibility of a news you haven't seen given a "
        "list of related news stories from search results.",
        "Related news stories from search results:\n"
        "<retrieval/>\n"
        "Please predict the plausibility of the following news story:\n"
        "<news/>\n"
        "Please give a number representing the plausibility (1-10) and nothing else.");

    add(TemplateId::detector_rationale,
        "Today is <today/>. You fact-check a news you haven't seen, given a list of related "
        "news stories from search results.",
        "Related news stories from search results:\n"
        "<retrieval/>\n"
        "Please predict the plausibility of the following news story:\n"
        "<news/>\n"
        "Please explain what you find suspicious about the news story. Give the top 3 points "
        "in a list format and nothing else.");

    add(TemplateId::generator,
        "Today is <today/>. Please rewrite a real recent news story to introduce some "
        "believable factual errors. The modification should be able to fool professional "
        "fact-checkers.\n"
        "Format\n"
        "Error introduced:\n"
        "Title:\n"
        "Description:",
        "Please rewrite the following news story.\n"
        "<news/>");

    add(TemplateId::generator_feedback,
        "Today is <today/>. Please rewrite a real recent news story to introduce some "
        "believable factual errors. The modification should be able to fool professional "
        "fact-checkers.\n"
        "Format\n"
        "Error introduced:\n"
        "Title:\n"
        "Description:",
        "Please rewrite the following news story.\n"
        "<news/>\n"
        "It was previously rewrote as:\n"
        "<last_iter_news/>\n"
        "Fact-checkers found the following suspicious:\n"
        "<rationale/>\n"
        "Please rewrite the news story to make it more believable and fool the fact-checkers.");

    add(TemplateId::contradiction,
        "",
        "News 1\n"
        "<news/>\n"
        "News 2\n"
        "<fake_news/>\n"
        "Does News 2 conflict with News 1? Please type yes or no and nothing else.");

    rationale_plain_ = PromptTemplate{
        TemplateId::detector_rationale,
        "Today is <today/>. You fact-check a news you haven't seen.",
        "Please predict the plausibility of the following news story:\n"
        "<news/>\n"
        "Please explain what you find suspicious about the news story. Give the top 3 points "
        "in a list format and nothing else.",
        today_};

    feedback_no_rationale_ = PromptTemplate{
        TemplateId::generator_feedback,
        templates_[TemplateId::generator_feedback].system_text,
        "Please rewrite the following news story.\n"
        "<news/>\n"
        "It was previously rewrote as:\n"
        "<last_iter_news/>\n"
        "Please rewrite the news story to make it more believable and fool the fact-checkers.",
        today_};
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const {
    return templates_.at(id);
}

int parse_score(const std::string& text, bool take_last) {
    int found = 0;
    bool any = false;
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            std::size_t j = i;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            if (j - i <= 2) {
                int value = std::stoi(text.substr(i, j - i));
                if (value >= 1 && value <= 10) {
                    found = value;
                    any = true;
                    if (!take_last) return found;
                }
            }
            i = j;
        } else {
            ++i;
        }
    }
    if (!any) throw ParseFailure("no integer in [1,10] found in completion");
    return found;
}

bool parse_binary(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    std::string head = to_lower(text.substr(i, 3));
    if (head.rfind("yes", 0) == 0) return true;
    if (head.rfind("no", 0) == 0) return false;
    throw ParseFailure("completion is neither yes nor no");
}

}  // namespace advnews
