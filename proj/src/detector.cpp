#include "advnews/detector.hpp"

#include <algorithm>
#include <sstream>

namespace advnews {

std::string aggregation_name(Aggregation a) {
    return a == Aggregation::average ? "average" : "majority";
}

Aggregation aggregation_from_name(const std::string& name) {
    if (name == "average") return Aggregation::average;
    if (name == "majority") return Aggregation::majority;
    throw ConfigError("unknown aggregation '" + name + "'");
}

json DetectorConfig::to_json() const {
    return json{{"name", display_name()},
                {"model", model.to_json()},
                {"retriever", retriever.to_json()},
                {"n_score_samples", n_score_samples},
                {"temperature", temperature},
                {"aggregation", aggregation_name(aggregation)},
                {"use_cot", use_cot},
                {"vote_threshold_raw", vote_threshold_raw}};
}

DetectorConfig DetectorConfig::from_json(const json& j) {
    DetectorConfig cfg;
    cfg.name = j.value("name", std::string{});
    if (j.contains("model")) cfg.model = ModelProfile::from_json(j["model"]);
    if (j.contains("retriever")) cfg.retriever = RetrieverConfig::from_json(j["retriever"]);
    cfg.n_score_samples = j.value("n_score_samples", 10);
    cfg.temperature = j.value("temperature", 1.0);
    cfg.aggregation = aggregation_from_name(j.value("aggregation", std::string("average")));
    cfg.use_cot = j.value("use_cot", false);
    cfg.vote_threshold_raw = j.value("vote_threshold_raw", 6);
    if (cfg.n_score_samples < 1) throw ConfigError("n_score_samples must be >= 1");
    if (cfg.vote_threshold_raw < 1 || cfg.vote_threshold_raw > 10)
        throw ConfigError("vote_threshold_raw must be in [1, 10]");
    return cfg;
}

std::string Rationale::joined() const {
    std::string out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i > 0) out += "\n";
        out += "- " + points[i];
    }
    return out;
}

json Rationale::to_json() const {
    json j{{"points", points}};
    if (grounded_in) j["grounded_in"] = grounded_in->to_json();
    return j;
}

Rationale Rationale::from_json(const json& j) {
    Rationale r;
    r.points = j.at("points").get<std::vector<std::string>>();
    if (j.contains("grounded_in") && !j["grounded_in"].is_null())
        r.grounded_in = ContextBlock::from_json(j["grounded_in"]);
    return r;
}

json DetectorResult::to_json() const {
    json j{{"raw_samples", raw_samples},
           {"normalized", normalized},
           {"config_echo", config_echo}};
    if (context) j["context"] = context->to_json();
    if (rationale) j["rationale"] = rationale->to_json();
    return j;
}

DetectorResult DetectorResult::from_json(const json& j) {
    DetectorResult r;
    r.raw_samples = j.at("raw_samples").get<std::vector<int>>();
    r.normalized = j.at("normalized").get<double>();
    r.config_echo = j.value("config_echo", std::string{});
    if (j.contains("context") && !j["context"].is_null())
        r.context = ContextBlock::from_json(j["context"]);
    if (j.contains("rationale") && !j["rationale"].is_null())
        r.rationale = Rationale::from_json(j["rationale"]);
    return r;
}

double normalize_score(int s) {
    if (s < 1 || s > 10) throw DataError("raw score " + std::to_string(s) + " outside [1, 10]");
    return static_cast<double>(s - 1) / 9.0;
}

double aggregate_samples(std::span<const int> raw_samples, Aggregation aggregation,
                         int vote_threshold_raw) {
    if (raw_samples.empty()) throw DataError("cannot aggregate zero samples");
    if (aggregation == Aggregation::average) {
        double sum = 0.0;
        for (int s : raw_samples) sum += normalize_score(s);
        return sum / static_cast<double>(raw_samples.size());
    }
    int hits = 0;
    for (int s : raw_samples) {
        if (s < 1 || s > 10) throw DataError("raw score outside [1, 10]");
        if (s >= vote_threshold_raw) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(raw_samples.size());
}

DetectorInput DetectorInput::from_item(const NewsItem& item) {
    return DetectorInput{item.id, item.title, item.full_text(), item};
}

namespace {

const char* kScoreInstruction =
    "Please give a number representing the plausibility (1-10) and nothing else.";
const char* kCotInstruction =
    "Please think step by step about the plausibility of the news story, then end your answer "
    "with a line containing only a number representing the plausibility (1-10).";

std::string apply_cot(std::string user_text) {
    auto pos = user_text.rfind(kScoreInstruction);
    if (pos == std::string::npos) return user_text + "\n" + kCotInstruction;
    user_text.replace(pos, std::string(kScoreInstruction).size(), kCotInstruction);
    return user_text;
}

std::string config_echo_of(const DetectorConfig& cfg) {
    return json{{"detector", cfg.display_name()},
                {"model", cfg.model.model_name},
                {"retriever", retriever_kind_name(cfg.retriever.kind)},
                {"n_score_samples", cfg.n_score_samples},
                {"temperature", cfg.temperature},
                {"aggregation", aggregation_name(cfg.aggregation)},
                {"vote_threshold_raw", cfg.vote_threshold_raw},
                {"use_cot", cfg.use_cot}}
        .dump();
}

std::optional<ContextBlock> resolve_context(const DetectorInput& input, const DetectorConfig& cfg,
                                            Retriever* retriever,
                                            const ContextBlock* preset_context) {
    if (preset_context) return *preset_context;
    if (cfg.retriever.kind == RetrieverKind::none) return std::nullopt;
    if (!retriever)
        throw ConfigError("detector '" + cfg.display_name() + "' configured with retriever kind " +
                          retriever_kind_name(cfg.retriever.kind) + " but none was provided");
    const NewsItem* seed = input.seed_exclude ? &*input.seed_exclude : nullptr;
    return retriever->retrieve(input.headline, cfg.retriever, seed);
}

}  // namespace

DetectorResult score_plausibility(const DetectorInput& input, const DetectorConfig& cfg,
                                  Gateway& gateway, Retriever* retriever,
                                  const ContextBlock* preset_context) {
    std::optional<ContextBlock> context = resolve_context(input, cfg, retriever, preset_context);

    PromptTemplate tpl =
        gateway.prompts().get(context ? TemplateId::detector_rag : TemplateId::detector);
    if (cfg.use_cot) tpl.user_text = apply_cot(tpl.user_text);

    ChatRequest request;
    request.template_id = tpl.id;
    request.bindings["news"] = input.text;
    if (context) request.bindings["retrieval"] = context->rendered;
    request.temperature = cfg.temperature;
    request.max_output = cfg.use_cot ? 1024 : 16;
    request.model_name = cfg.model.model_name;

    const int want = cfg.n_score_samples;
    const int budget = 3 * want;
    int drawn = 0;
    std::vector<int> samples;
    samples.reserve(static_cast<std::size_t>(want));
    while (static_cast<int>(samples.size()) < want && drawn < budget) {
        int take = std::min(want - static_cast<int>(samples.size()), budget - drawn);
        request.n_samples = take;
        ChatResponse response = gateway.complete_with(tpl, request);
        for (const auto& text : response.texts) {
            try {
                samples.push_back(parse_score(text, cfg.use_cot));
            } catch (const ParseFailure&) {
                // discarded; a replacement is drawn while budget remains
            }
        }
        drawn += take;
    }
    if (static_cast<int>(samples.size()) < want) {
        if (samples.empty())
            throw DataError("all score samples unparseable after oversampling (item " +
                            input.item_id + ")");
        throw DataError("only " + std::to_string(samples.size()) + "/" + std::to_string(want) +
                        " score samples parseable within the oversampling budget (item " +
                        input.item_id + ")");
    }

    DetectorResult result;
    result.raw_samples = std::move(samples);
    result.normalized = aggregate_samples(result.raw_samples, cfg.aggregation, cfg.vote_threshold_raw);
    result.context = std::move(context);
    result.config_echo = config_echo_of(cfg);
    return result;
}

Rationale generate_rationale(const DetectorInput& input, const DetectorConfig& cfg,
                             Gateway& gateway, Retriever* retriever,
                             const ContextBlock* preset_context) {
    std::optional<ContextBlock> context = resolve_context(input, cfg, retriever, preset_context);

    const PromptTemplate& tpl = context ? gateway.prompts().get(TemplateId::detector_rationale)
                                        : gateway.prompts().rationale_plain();

    ChatRequest request;
    request.template_id = TemplateId::detector_rationale;
    request.bindings["news"] = input.text;
    if (context) request.bindings["retrieval"] = context->rendered;
    request.temperature = cfg.temperature;
    request.n_samples = 1;
    request.max_output = 512;
    request.model_name = cfg.model.model_name;

    ChatResponse response = gateway.complete_with(tpl, request);
    const std::string& text = response.texts.front();
    if (trim(text).empty()) throw DataError("empty rationale completion (item " + input.item_id + ")");

    std::vector<std::string> points;
    std::vector<std::string> fallback;
    for (const auto& raw_line : split_lines(text)) {
        std::string line = trim(raw_line);
        if (line.empty()) continue;
        fallback.push_back(line);
        std::size_t i = 0;
        if (line[0] == '-' || line[0] == '*') {
            i = 1;
        } else {
            while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
            if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) {
                continue;
            }
            ++i;
        }
        std::string point = trim(line.substr(i));
        if (!point.empty()) points.push_back(point);
    }
    if (points.empty()) points = std::move(fallback);
    if (points.size() > 3) points.resize(3);
    if (points.empty()) throw DataError("rationale completion held no usable points");

    Rationale rationale;
    rationale.points = std::move(points);
    rationale.grounded_in = std::move(context);
    return rationale;
}

std::vector<BatchEntry> score_batch(std::span<const DetectorInput> items, const DetectorConfig& cfg,
                                    Gateway& gateway, Retriever* retriever, int parallelism) {
    std::vector<BatchEntry> out(items.size());
    parallel_for(items.size(), parallelism, [&](std::size_t i) {
        try {
            out[i].result = score_plausibility(items[i], cfg, gateway, retriever);
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

json ScoreRecord::to_json() const {
    json j{{"item_id", item_id},
           {"score", score},
           {"detector_name", detector_name},
           {"retriever_kind", retriever_kind},
           {"raw_samples", raw_samples},
           {"aggregation", aggregation},
           {"vote_threshold_raw", vote_threshold_raw}};
    if (label == 0 || label == 1) j["label"] = label;
    if (round) j["round"] = *round;
    if (year) j["year"] = *year;
    return j;
}

ScoreRecord ScoreRecord::from_json(const json& j) {
    ScoreRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    r.label = j.value("label", -1);
    r.score = j.at("score").get<double>();
    r.detector_name = j.value("detector_name", std::string{});
    r.retriever_kind = j.value("retriever_kind", std::string("none"));
    if (j.contains("round") && !j["round"].is_null()) r.round = j["round"].get<int>();
    if (j.contains("year") && !j["year"].is_null()) r.year = j["year"].get<int>();
    if (j.contains("raw_samples")) r.raw_samples = j["raw_samples"].get<std::vector<int>>();
    r.aggregation = j.value("aggregation", std::string("average"));
    r.vote_threshold_raw = j.value("vote_threshold_raw", 6);
    return r;
}

void write_score_records(const std::vector<ScoreRecord>& records,
                         const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& r : records) out << r.to_json().dump() << "\n";
    write_file_atomic(path, out.str());
}

std::vector<ScoreRecord> read_score_records(const std::filesystem::path& path) {
    std::vector<ScoreRecord> records;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        if (trim(line).empty()) return;
        try {
            records.push_back(ScoreRecord::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw DataError("score record line " + std::to_string(line_no) + ": " + e.what());
        }
    });
    return records;
}

}  // namespace advnews
