#include "advnews/loop.hpp"

#include <algorithm>
#include <sstream>

namespace advnews {

std::string feedback_mode_name(FeedbackMode mode) {
    switch (mode) {
        case FeedbackMode::full: return "full";
        case FeedbackMode::rationale_only: return "rationale_only";
        case FeedbackMode::rag_score_only: return "rag_score_only";
        case FeedbackMode::plain_score: return "plain_score";
    }
    return "full";
}

FeedbackMode feedback_mode_from_name(const std::string& name) {
    if (name == "full") return FeedbackMode::full;
    if (name == "rationale_only" || name == "rationale") return FeedbackMode::rationale_only;
    if (name == "rag_score_only" || name == "rag-score") return FeedbackMode::rag_score_only;
    if (name == "plain_score" || name == "score") return FeedbackMode::plain_score;
    throw ConfigError("unknown feedback mode '" + name + "'");
}

bool mode_uses_rationale(FeedbackMode mode) {
    return mode == FeedbackMode::full || mode == FeedbackMode::rationale_only;
}

bool mode_uses_rag(FeedbackMode mode) {
    return mode == FeedbackMode::full || mode == FeedbackMode::rag_score_only;
}

json LoopConfig::to_json() const {
    return json{{"k_iterations", k_iterations},
                {"m_candidates", m_candidates},
                {"resample_cap", resample_cap},
                {"feedback_mode", feedback_mode_name(feedback_mode)},
                {"adversary_detector", adversary_detector.to_json()},
                {"round0_direct", round0_direct},
                {"rng_seed", rng_seed},
                {"generator_model", generator_model},
                {"generator_temperature", generator_temperature},
                {"contradiction_votes", contradiction_votes},
                {"min_overlap", min_overlap}};
}

LoopConfig LoopConfig::from_json(const json& j) {
    LoopConfig cfg;
    cfg.k_iterations = j.value("k_iterations", j.value("rounds", 6));
    cfg.m_candidates = j.value("m_candidates", j.value("candidates", 8));
    cfg.resample_cap = j.value("resample_cap", 3);
    cfg.feedback_mode = feedback_mode_from_name(j.value("feedback_mode",
                                                        j.value("feedback", std::string("full"))));
    if (j.contains("adversary_detector"))
        cfg.adversary_detector = DetectorConfig::from_json(j["adversary_detector"]);
    else if (j.contains("adversary"))
        cfg.adversary_detector = DetectorConfig::from_json(j["adversary"]);
    cfg.round0_direct = j.value("round0_direct", true);
    cfg.rng_seed = j.value("rng_seed", std::uint64_t{0});
    cfg.generator_model = j.value("generator_model", std::string{});
    cfg.generator_temperature = j.value("generator_temperature", 1.0);
    cfg.contradiction_votes = j.value("contradiction_votes", 10);
    cfg.min_overlap = j.value("min_overlap", 0.6);
    if (cfg.k_iterations < 1) throw ConfigError("k_iterations must be >= 1");
    if (cfg.m_candidates < 1) throw ConfigError("m_candidates must be >= 1");
    if (cfg.resample_cap < 1) throw ConfigError("resample_cap must be >= 1");
    return cfg;
}

std::string Candidate::headline() const {
    auto nl = text.find('\n');
    return nl == std::string::npos ? text : text.substr(0, nl);
}

json Candidate::to_json() const {
    json j{{"text", text},
           {"round", round},
           {"batch_index", batch_index},
           {"verdict", verdict.to_json()},
           {"edits", edits.to_json()},
           {"passed_filters", passed_filters}};
    if (score) j["score"] = score->to_json();
    return j;
}

Candidate Candidate::from_json(const json& j) {
    Candidate c;
    c.text = j.at("text").get<std::string>();
    c.round = j.at("round").get<int>();
    c.batch_index = j.at("batch_index").get<int>();
    c.verdict = ContradictionVerdict::from_json(j.at("verdict"));
    c.edits = EditMetrics::from_json(j.at("edits"));
    c.passed_filters = j.at("passed_filters").get<bool>();
    if (j.contains("score") && !j["score"].is_null())
        c.score = DetectorResult::from_json(j["score"]);
    return c;
}

json RoundRecord::to_json() const {
    json arr = json::array();
    for (const auto& c : candidates) arr.push_back(c.to_json());
    json j{{"round", round},
           {"candidates", arr},
           {"selected_index", selected_index},
           {"generation_prompt_hash", generation_prompt_hash}};
    if (rationale_used) j["rationale_used"] = rationale_used->to_json();
    if (context_used) j["context_used"] = context_used->to_json();
    return j;
}

RoundRecord RoundRecord::from_json(const json& j) {
    RoundRecord r;
    r.round = j.at("round").get<int>();
    for (const auto& c : j.at("candidates")) r.candidates.push_back(Candidate::from_json(c));
    r.selected_index = j.at("selected_index").get<int>();
    r.generation_prompt_hash = j.value("generation_prompt_hash", std::string{});
    if (j.contains("rationale_used") && !j["rationale_used"].is_null())
        r.rationale_used = Rationale::from_json(j["rationale_used"]);
    if (j.contains("context_used") && !j["context_used"].is_null())
        r.context_used = ContextBlock::from_json(j["context_used"]);
    return r;
}

json RewriteTrace::to_json() const {
    json arr = json::array();
    for (const auto& r : rounds) arr.push_back(r.to_json());
    json j{{"seed", seed.to_json()},
           {"rounds", arr},
           {"failed", failed},
           {"failure_reason", failure_reason},
           {"manifest", json{{"config", config_echo}, {"model", model}, {"created_at", created_at}}}};
    if (final) j["final"] = final->to_json();
    return j;
}

RewriteTrace RewriteTrace::from_json(const json& j) {
    RewriteTrace t;
    t.seed = NewsItem::from_json(j.at("seed"));
    for (const auto& r : j.at("rounds")) t.rounds.push_back(RoundRecord::from_json(r));
    t.failed = j.value("failed", false);
    t.failure_reason = j.value("failure_reason", std::string{});
    if (j.contains("final") && !j["final"].is_null()) t.final = Candidate::from_json(j["final"]);
    if (j.contains("manifest")) {
        t.config_echo = j["manifest"].value("config", json::object());
        t.model = j["manifest"].value("model", std::string{});
        t.created_at = j["manifest"].value("created_at", std::string{});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Candidate generation
// ---------------------------------------------------------------------------

namespace {

/// Parses one generator completion against the "Error introduced / Title /
/// Description" layout; returns the candidate text (title \n description).
std::optional<std::string> parse_candidate(const std::string& completion) {
    std::optional<std::string> title;
    std::vector<std::string> description;
    bool in_description = false;
    for (const auto& raw_line : split_lines(completion)) {
        std::string line = trim(raw_line);
        std::string lower = to_lower(line);
        if (lower.rfind("title:", 0) == 0) {
            title = trim(line.substr(6));
            in_description = false;
        } else if (lower.rfind("description:", 0) == 0) {
            std::string first = trim(line.substr(12));
            if (!first.empty()) description.push_back(first);
            in_description = true;
        } else if (lower.rfind("error introduced:", 0) == 0) {
            in_description = false;
        } else if (in_description && !line.empty()) {
            description.push_back(line);
        }
    }
    if (!title || title->empty() || description.empty()) return std::nullopt;
    std::string body;
    for (std::size_t i = 0; i < description.size(); ++i) {
        if (i > 0) body += " ";
        body += description[i];
    }
    return *title + "\n" + body;
}

}  // namespace

std::vector<std::string> generate_candidates(const NewsItem& seed, const Candidate* prev,
                                             const Rationale* rationale, int m, Gateway& gateway,
                                             const std::string& model_name, double temperature) {
    const PromptLibrary& prompts = gateway.prompts();
    PromptTemplate tpl = prompts.get(TemplateId::generator);
    Bindings bindings{{"news", seed.full_text()}};
    if (prev) {
        tpl = rationale ? prompts.get(TemplateId::generator_feedback)
                        : prompts.feedback_without_rationale();
        bindings["last_iter_news"] = prev->text;
        if (rationale) bindings["rationale"] = rationale->joined();
    }

    ChatRequest request;
    request.template_id = tpl.id;
    request.bindings = bindings;
    request.temperature = temperature;
    request.max_output = 1024;
    request.model_name = model_name;

    const int budget = 3 * m;
    int drawn = 0;
    std::vector<std::string> texts;
    texts.reserve(static_cast<std::size_t>(m));
    while (static_cast<int>(texts.size()) < m && drawn < budget) {
        int take = std::min(m - static_cast<int>(texts.size()), budget - drawn);
        request.n_samples = take;
        ChatResponse response = gateway.complete_with(tpl, request);
        for (const auto& completion : response.texts) {
            if (auto parsed = parse_candidate(completion)) texts.push_back(std::move(*parsed));
        }
        drawn += take;
    }
    if (texts.empty())
        throw DataError("zero parseable candidates after in-batch resampling (seed " + seed.id + ")");
    if (static_cast<int>(texts.size()) > m) texts.resize(static_cast<std::size_t>(m));
    return texts;
}

std::vector<Candidate> filter_candidates(const NewsItem& seed, std::vector<Candidate>& candidates,
                                         Gateway& gateway, int votes, double min_overlap,
                                         const std::string& model_name) {
    std::vector<Candidate> passing;
    for (auto& candidate : candidates) {
        candidate.edits = check_edit_limit(seed.full_text(), candidate.text, min_overlap);
        if (!candidate.edits.within_limit) {
            candidate.verdict = ContradictionVerdict{};  // vote skipped, filter already failed
            candidate.passed_filters = false;
            continue;
        }
        candidate.verdict =
            check_contradiction(seed, candidate.text, gateway, votes, model_name);
        candidate.passed_filters = candidate.verdict.contradicts && candidate.edits.within_limit;
        if (candidate.passed_filters) passing.push_back(candidate);
    }
    return passing;
}

std::pair<std::size_t, std::vector<Candidate>> rank_and_select(std::vector<Candidate> candidates,
                                                               const DetectorConfig& detector,
                                                               Gateway& gateway,
                                                               const ContextBlock* context) {
    if (candidates.empty()) throw DataError("rank_and_select on an empty candidate list");
    std::size_t best = 0;
    bool any = false;
    std::string last_error;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& candidate = candidates[i];
        DetectorInput input{"candidate-r" + std::to_string(candidate.round) + "-b" +
                                std::to_string(candidate.batch_index),
                            candidate.headline(), candidate.text, std::nullopt};
        try {
            // shared round context only; retrieval never runs per candidate
            DetectorResult result = score_plausibility(input, detector, gateway, nullptr, context);
            result.context.reset();  // the round record owns the shared context
            candidate.score = std::move(result);
            if (!any || candidate.score->normalized > candidates[best].score->normalized) {
                best = i;
                any = true;
            }
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    if (!any) throw DataError("all candidate scorings failed: " + last_error);
    return {best, std::move(candidates)};
}

// ---------------------------------------------------------------------------
// run_rewrite
// ---------------------------------------------------------------------------

namespace {

std::string hash_generation_prompt(const NewsItem& seed, const Candidate* prev,
                                   const Rationale* rationale) {
    std::string material = seed.full_text();
    if (prev) material += "\x1f" + prev->text;
    if (rationale) material += "\x1f" + rationale->joined();
    return Sha256::hex(material);
}

DetectorConfig ranking_detector(const LoopConfig& cfg) {
    DetectorConfig detector = cfg.adversary_detector;
    if (!mode_uses_rag(cfg.feedback_mode)) detector.retriever.kind = RetrieverKind::none;
    return detector;
}

}  // namespace

RewriteTrace run_rewrite(const NewsItem& seed, const LoopConfig& cfg, Gateway& gateway,
                         Retriever* retriever) {
    RewriteTrace trace;
    trace.seed = seed;
    trace.config_echo = cfg.to_json();
    trace.model = cfg.generator_model.empty() ? cfg.adversary_detector.model.model_name
                                              : cfg.generator_model;
    trace.created_at = gateway.scripted() ? "1970-01-01T00:00:00Z" : now_utc_iso();

    const std::string generator_model = trace.model;
    const bool need_rag = mode_uses_rag(cfg.feedback_mode);
    const bool need_rationale = mode_uses_rationale(cfg.feedback_mode);
    if (need_rag && !retriever)
        throw ConfigError("feedback mode " + feedback_mode_name(cfg.feedback_mode) +
                          " requires a retriever");
    const DetectorConfig detector = ranking_detector(cfg);

    std::optional<Candidate> prev;
    std::optional<Rationale> rationale;
    std::optional<ContextBlock> context;

    auto fetch_feedback = [&](const Candidate& selected) {
        if (need_rag)
            context = retriever->retrieve(selected.headline(), cfg.adversary_detector.retriever,
                                          &seed);
        if (need_rationale) {
            DetectorInput input{seed.id + "::selected-r" + std::to_string(selected.round),
                                selected.headline(), selected.text, std::nullopt};
            const ContextBlock* grounded = (cfg.feedback_mode == FeedbackMode::full && context)
                                               ? &*context
                                               : nullptr;
            DetectorConfig rationale_cfg = detector;
            if (!grounded) rationale_cfg.retriever.kind = RetrieverKind::none;
            rationale = generate_rationale(input, rationale_cfg, gateway, nullptr, grounded);
        }
    };

    auto generate_filtered_batch =
        [&](int round) -> std::optional<std::pair<std::vector<Candidate>, std::vector<Candidate>>> {
        std::vector<Candidate> all;
        for (int attempt = 0; attempt < cfg.resample_cap; ++attempt) {
            auto texts = generate_candidates(seed, prev ? &*prev : nullptr,
                                             rationale ? &*rationale : nullptr, cfg.m_candidates,
                                             gateway, generator_model, cfg.generator_temperature);
            std::vector<Candidate> batch;
            batch.reserve(texts.size());
            for (std::size_t i = 0; i < texts.size(); ++i) {
                Candidate c;
                c.text = std::move(texts[i]);
                c.round = round;
                c.batch_index = static_cast<int>(all.size() + i);
                batch.push_back(std::move(c));
            }
            auto passing = filter_candidates(seed, batch, gateway, cfg.contradiction_votes,
                                             cfg.min_overlap, generator_model);
            all.insert(all.end(), batch.begin(), batch.end());
            if (!passing.empty()) return std::make_pair(std::move(all), std::move(passing));
        }
        return std::nullopt;
    };

    auto fail = [&](int round) {
        trace.failed = true;
        trace.failure_reason = "resample cap exhausted with zero passing candidates in round " +
                               std::to_string(round);
        return trace;
    };

    if (cfg.round0_direct) {
        auto batches = generate_filtered_batch(0);
        if (!batches) return fail(0);
        auto& [all, passing] = *batches;
        RoundRecord record;
        record.round = 0;
        record.generation_prompt_hash = hash_generation_prompt(seed, nullptr, nullptr);
        record.candidates = std::move(all);
        // direct rewrite: the first filter-passing candidate, unranked
        for (std::size_t i = 0; i < record.candidates.size(); ++i) {
            if (record.candidates[i].passed_filters) {
                record.selected_index = static_cast<int>(i);
                break;
            }
        }
        prev = record.selected();
        trace.rounds.push_back(std::move(record));
        fetch_feedback(*prev);
    }

    for (int round = 1; round <= cfg.k_iterations; ++round) {
        if (need_rag && !context) {
            // no preparation round supplied a context yet; seed headline bootstrap
            context = retriever->retrieve(seed.title, cfg.adversary_detector.retriever, &seed);
        }
        RoundRecord record;
        record.round = round;
        record.generation_prompt_hash = hash_generation_prompt(
            seed, prev ? &*prev : nullptr,
            (prev && need_rationale && rationale) ? &*rationale : nullptr);
        record.rationale_used = (prev && need_rationale) ? rationale : std::nullopt;
        record.context_used = need_rag ? context : std::nullopt;

        auto batches = generate_filtered_batch(round);
        if (!batches) {
            trace.rounds.push_back(std::move(record));
            return fail(round);
        }
        auto& [all, passing] = *batches;
        auto [best, scored] = rank_and_select(std::move(passing), detector, gateway,
                                              need_rag && context ? &*context : nullptr);

        // fold the scored annotations back into the full candidate list
        record.candidates = std::move(all);
        const Candidate* selected_ptr = &scored[best];
        for (auto& annotated : scored) {
            for (auto& original : record.candidates) {
                if (original.batch_index == annotated.batch_index) {
                    bool is_selected = (&annotated == selected_ptr);
                    original = std::move(annotated);
                    if (is_selected) record.selected_index = original.batch_index;
                    break;
                }
            }
        }
        for (std::size_t i = 0; i < record.candidates.size(); ++i) {
            if (record.candidates[i].batch_index == record.selected_index) {
                record.selected_index = static_cast<int>(i);
                break;
            }
        }

        prev = record.selected();
        trace.rounds.push_back(std::move(record));
        if (round < cfg.k_iterations) fetch_feedback(*prev);
    }

    // final selection: the max-score selected candidate across all iterations
    for (const auto& record : trace.rounds) {
        const Candidate& selected = record.selected();
        if (!selected.score) continue;  // round 0 is unranked
        if (!trace.final || selected.score->normalized > trace.final->score->normalized)
            trace.final = selected;
    }
    if (!trace.final) {
        trace.failed = true;
        trace.failure_reason = "no scored selection across rounds";
    }
    return trace;
}

// ---------------------------------------------------------------------------
// RunStore
// ---------------------------------------------------------------------------

RunStore::RunStore(std::filesystem::path run_dir) : run_dir_(std::move(run_dir)) {
    std::filesystem::create_directories(run_dir_ / "traces");
    auto manifest_path = run_dir_ / "run_manifest.json";
    std::error_code ec;
    if (std::filesystem::exists(manifest_path, ec)) {
        json j = json::parse(read_file(manifest_path));
        completed_ = j.value("completed", std::vector<std::string>{});
        for (const auto& f : j.value("failed", json::array()))
            failed_.emplace_back(f.at("id").get<std::string>(), f.value("reason", std::string{}));
    }
}

std::filesystem::path RunStore::trace_path(const std::string& seed_id) const {
    return run_dir_ / "traces" / ("trace_" + Sha256::hex(seed_id).substr(0, 16) + ".json");
}

bool RunStore::is_completed(const std::string& seed_id) const {
    std::lock_guard lock(mutex_);
    if (std::find(completed_.begin(), completed_.end(), seed_id) == completed_.end()) return false;
    std::error_code ec;
    return std::filesystem::exists(trace_path(seed_id), ec);
}

RewriteTrace RunStore::load_trace(const std::string& seed_id) const {
    return RewriteTrace::from_json(json::parse(read_file(trace_path(seed_id))));
}

void RunStore::store_trace(const RewriteTrace& trace) {
    write_file_atomic(trace_path(trace.seed.id), trace.to_json().dump() + "\n");
    std::lock_guard lock(mutex_);
    if (trace.failed)
        failed_.emplace_back(trace.seed.id, trace.failure_reason);
    else if (std::find(completed_.begin(), completed_.end(), trace.seed.id) == completed_.end())
        completed_.push_back(trace.seed.id);
    flush_manifest();
}

void RunStore::flush_manifest() const {
    json failed = json::array();
    for (const auto& [id, reason] : failed_) failed.push_back({{"id", id}, {"reason", reason}});
    json j{{"completed", completed_}, {"failed", failed}};
    write_file_atomic(run_dir_ / "run_manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// run_batch
// ---------------------------------------------------------------------------

BatchOutcome run_batch(std::span<const NewsItem> seeds, const LoopConfig& cfg, Gateway& gateway,
                       Retriever* retriever, int parallel_seeds, RunStore* store) {
    std::vector<std::optional<RewriteTrace>> slots(seeds.size());

    parallel_for(seeds.size(), parallel_seeds, [&](std::size_t i) {
        const NewsItem& seed = seeds[i];
        if (store && store->is_completed(seed.id)) {
            slots[i] = store->load_trace(seed.id);
            return;
        }
        RewriteTrace trace;
        try {
            trace = run_rewrite(seed, cfg, gateway, retriever);
        } catch (const std::exception& e) {
            trace.seed = seed;
            trace.config_echo = cfg.to_json();
            trace.failed = true;
            trace.failure_reason = e.what();
        }
        if (store) store->store_trace(trace);
        slots[i] = std::move(trace);
    });

    BatchOutcome outcome;
    for (auto& slot : slots) outcome.traces.push_back(std::move(*slot));

    for (const auto& trace : outcome.traces) {
        if (trace.failed || !trace.final) {
            ++outcome.failed_seeds;
            continue;
        }
        LabeledNews truth;
        truth.item = trace.seed;
        truth.label = 1;
        truth.origin = Origin::seed;
        outcome.dataset.push_back(truth);

        auto fake_from = [&](const Candidate& candidate, const std::string& id_suffix,
                             std::optional<int> round) {
            LabeledNews fake;
            auto nl = candidate.text.find('\n');
            fake.item.id = trace.seed.id + id_suffix;
            fake.item.title = nl == std::string::npos ? candidate.text : candidate.text.substr(0, nl);
            fake.item.body = nl == std::string::npos ? candidate.text : candidate.text.substr(nl + 1);
            fake.item.source = trace.model;
            fake.item.published_at = trace.seed.published_at;
            fake.item.domain_tag = trace.seed.domain_tag;
            fake.label = 0;
            fake.origin = Origin::generated;
            fake.pair_id = trace.seed.id;
            fake.round = round;
            return fake;
        };

        outcome.dataset.push_back(fake_from(*trace.final, "::fake", std::nullopt));
        for (const auto& record : trace.rounds) {
            if (record.round == 0) continue;  // preparation round, unranked
            outcome.round_dataset.push_back(fake_from(
                record.selected(), "::r" + std::to_string(record.round), record.round));
        }
    }
    return outcome;
}

}  // namespace advnews
