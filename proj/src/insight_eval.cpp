#include "ciaf/insight_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>

#include <spdlog/spdlog.h>

#include "ask.hpp"
#include "ciaf/error.hpp"
#include "ciaf/metrics.hpp"
#include "ciaf/structured.hpp"

namespace ciaf {

using detail::casefold;
using detail::trim_copy;
using nlohmann::json;

namespace {

const Shape& perspectives_shape() {
    static const Shape s = Shape::object(
        "PerspectiveLabels",
        {{"sentences", Shape::array_of(Shape::object("Label",
                                                     {{"index", Shape::integer()},
                                                      {"perspective", Shape::string().or_null(), false}},
                                                     true))}},
        true);
    return s;
}

const Shape& judgment_shape() {
    static const Shape s = Shape::object(
        "Judgment", {{"score", Shape::number()}, {"rationale", Shape::string().or_null(), false}}, true);
    return s;
}

bool is_non_label(const std::string& folded) {
    static const std::set<std::string> kNone = {"",     "none", "null", "n/a", "na", "non-insightful",
                                                "not insightful", "no insight"};
    return kNone.contains(folded);
}

std::string source_name(SummarySource s) { return s == SummarySource::generated ? "generated" : "reference"; }

}  // namespace

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        current.push_back(text[i]);
        if (text[i] != '.' && text[i] != '!' && text[i] != '?') continue;
        // closing quotes and brackets belong to the sentence they end
        while (i + 1 < text.size() && (text[i + 1] == '"' || text[i + 1] == '\'' || text[i + 1] == ')')) {
            current.push_back(text[++i]);
        }
        if (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            if (auto t = trim_copy(current); !t.empty()) out.push_back(std::move(t));
            current.clear();
        }
    }
    if (auto t = trim_copy(current); !t.empty()) out.push_back(std::move(t));
    return out;
}

QualityJudgment parse_judgment(const std::string& reply) {
    std::optional<double> raw;
    std::string rationale;

    try {
        const json j = parse_structured(reply, judgment_shape());
        raw = j.at("score").get<double>();
        if (auto r = j.find("rationale"); r != j.end() && r->is_string()) rationale = r->get<std::string>();
    } catch (const Error&) {
        static const std::regex kScoreWord(R"(score\s*(?:is|of|=|:)?\s*\**\s*(-?\d+(?:\.\d+)?))", std::regex::icase);
        static const std::regex kOutOfFive(R"((-?\d+(?:\.\d+)?)\s*/\s*5\b)");
        static const std::regex kRationale(R"(rationale\s*[:=]\s*([\s\S]*))", std::regex::icase);
        std::smatch m;
        if (std::regex_search(reply, m, kScoreWord) || std::regex_search(reply, m, kOutOfFive)) {
            raw = std::stod(m[1].str());
        }
        if (std::regex_search(reply, m, kRationale)) rationale = m[1].str();
    }
    if (!raw || !std::isfinite(*raw)) throw NoScoreFound("judge reply holds no score");

    QualityJudgment q;
    const long long rounded = std::llround(*raw);
    q.score = static_cast<int>(std::clamp<long long>(rounded, 1, 5));
    q.rationale = trim_copy(rationale.empty() ? reply : rationale);
    if (q.score != rounded) {
        q.clamped = true;
        q.rationale += " [judge score " + std::to_string(rounded) + " clamped to " + std::to_string(q.score) + "]";
        spdlog::warn("judge score {} clamped to {}", rounded, q.score);
    }
    return q;
}

const std::vector<std::string>& eval_templates() {
    static const std::vector<std::string> names = {"perspectives.system", "perspectives.user", "judge.system",
                                                   "judge.user"};
    return names;
}

InsightEvaluator::InsightEvaluator(Gateway& judge, const PromptSet& prompts) : judge_(judge), prompts_(prompts) {
    prompts_.require(eval_templates());
}

PerspectiveSet InsightEvaluator::extract_perspectives(const std::string& summary_text, const std::string& sample_id,
                                                      SummarySource source) const {
    if (trim_copy(summary_text).empty()) throw InvalidArgument("cannot extract perspectives from an empty summary");
    const auto sentences = split_sentences(summary_text);

    std::string numbered;
    for (std::size_t i = 0; i < sentences.size(); ++i) numbered += std::to_string(i + 1) + ". " + sentences[i] + "\n";
    const PromptVars vars = {{"sentences", numbered}};

    ChatRequest req;
    req.model_id = judge_.chat_model();
    req.system_prompt = prompts_.get("perspectives.system").render(vars);
    req.user_prompt = prompts_.get("perspectives.user").render(vars);
    req.temperature = 0.0;
    req.cache_namespace = prompts_.id();
    req.response_schema_hint = "PerspectiveLabels";

    auto parse = [&](const std::string& text) {
        const json j = parse_structured(text, perspectives_shape());
        std::vector<std::pair<std::size_t, std::string>> labelled;
        for (const auto& item : j.at("sentences")) {
            const auto index = item.at("index").get<long long>();
            if (index < 1 || static_cast<std::size_t>(index) > sentences.size()) {
                spdlog::warn("perspective label for sentence {} of {}; ignored", index, sentences.size());
                continue;
            }
            auto p = item.find("perspective");
            if (p == item.end() || !p->is_string()) continue;
            const auto label = trim_copy(p->get<std::string>());
            if (is_non_label(casefold(label))) continue;
            labelled.emplace_back(static_cast<std::size_t>(index - 1), label);
        }
        std::stable_sort(labelled.begin(), labelled.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        PerspectiveSet set;
        set.sample_id = sample_id;
        set.source = source;
        std::set<std::string> seen_labels;
        std::set<std::size_t> seen_sentences;
        for (const auto& [index, label] : labelled) {
            if (!seen_sentences.insert(index).second) continue;
            if (!seen_labels.insert(casefold(label)).second) continue;
            set.perspectives.push_back({sentences[index], label});
        }
        return set;
    };
    return detail::ask_with_reask<PerspectiveParseError>(judge_, std::move(req), "perspective_extractor", nullptr,
                                                         parse);
}

QualityJudgment InsightEvaluator::score_quality(const std::string& generated, const std::string& reference,
                                                const std::string& sample_id) const {
    if (trim_copy(generated).empty()) throw InvalidArgument("generated summary is empty");
    if (trim_copy(reference).empty()) throw InvalidArgument("reference summary is empty");

    const PromptVars vars = {{"reference", reference}, {"generated", generated}};
    ChatRequest req;
    req.model_id = judge_.chat_model();
    req.system_prompt = prompts_.get("judge.system").render(vars);
    req.user_prompt = prompts_.get("judge.user").render(vars);
    req.temperature = 0.0;
    req.cache_namespace = prompts_.id();
    req.response_schema_hint = "Judgment";

    std::string model_id = req.model_id;
    auto q = detail::ask_with_reask<NoScoreFound>(judge_, std::move(req), "judge", nullptr, parse_judgment);
    q.sample_id = sample_id;
    q.judge_model_id = model_id;
    return q;
}

DiversityScores InsightEvaluator::score_diversity(const PerspectiveSet& set) const {
    DiversityScores d;
    d.sample_id = set.sample_id;
    d.n_perspectives = set.perspectives.size();
    if (d.n_perspectives <= 1) return d;

    std::vector<std::string> texts;
    texts.reserve(set.perspectives.size());
    for (const auto& p : set.perspectives) texts.push_back(p.sentence);
    const auto vectors = judge_.embed(texts);
    d.rc = remote_clique(vectors);
    d.span = span(vectors);
    return d;
}

SampleEvaluation InsightEvaluator::evaluate(const ChartSummary& summary, const std::string& reference) const {
    if (trim_copy(summary.narrative).empty()) throw InvalidArgument("summary narrative is empty");
    if (trim_copy(reference).empty()) throw InvalidArgument("reference summary is empty");

    SampleEvaluation e;
    e.perspectives = in_stage("perspectives", [&] { return extract_perspectives(summary.narrative, summary.sample_id); });
    e.diversity = in_stage("diversity", [&] { return score_diversity(e.perspectives); });
    e.quality = in_stage("quality", [&] { return score_quality(summary.narrative, reference, summary.sample_id); });
    return e;
}

EvalReport aggregate(std::vector<SampleEvaluation> per_sample, std::string run_id) {
    if (per_sample.empty()) throw EmptyRun("no evaluated samples in run " + run_id);
    EvalReport r;
    r.run_id = std::move(run_id);
    double iq = 0.0, rc = 0.0, sp = 0.0;
    for (const auto& s : per_sample) {
        iq += s.quality.score;
        rc += s.diversity.rc;
        sp += s.diversity.span;
    }
    const auto n = static_cast<double>(per_sample.size());
    r.mean_iq = iq / n;
    r.mean_rc = rc / n;
    r.mean_span = sp / n;
    r.per_sample = std::move(per_sample);
    return r;
}

json to_json(const SampleEvaluation& e) {
    json perspectives = json::array();
    for (const auto& p : e.perspectives.perspectives) {
        perspectives.push_back({{"sentence", p.sentence}, {"label", p.label}});
    }
    return {{"sample_id", e.quality.sample_id},
            {"quality",
             {{"score", e.quality.score},
              {"rationale", e.quality.rationale},
              {"judge_model_id", e.quality.judge_model_id},
              {"clamped", e.quality.clamped}}},
            {"diversity",
             {{"rc", e.diversity.rc}, {"span", e.diversity.span}, {"n_perspectives", e.diversity.n_perspectives}}},
            {"perspectives", perspectives},
            {"perspective_source", source_name(e.perspectives.source)}};
}

SampleEvaluation sample_evaluation_from_json(const json& j) {
    SampleEvaluation e;
    const auto id = j.at("sample_id").get<std::string>();
    const auto& q = j.at("quality");
    e.quality = {id, q.at("score").get<int>(), q.at("rationale").get<std::string>(),
                 q.at("judge_model_id").get<std::string>(), q.value("clamped", false)};
    const auto& d = j.at("diversity");
    e.diversity = {id, d.at("rc").get<double>(), d.at("span").get<double>(), d.at("n_perspectives").get<std::size_t>()};
    e.perspectives.sample_id = id;
    e.perspectives.source =
        j.value("perspective_source", std::string("generated")) == "reference" ? SummarySource::reference
                                                                               : SummarySource::generated;
    for (const auto& p : j.at("perspectives")) {
        e.perspectives.perspectives.push_back({p.at("sentence").get<std::string>(), p.at("label").get<std::string>()});
    }
    return e;
}

json to_json(const EvalReport& r) {
    json samples = json::array();
    for (const auto& s : r.per_sample) samples.push_back(to_json(s));
    return {{"run_id", r.run_id},
            {"mean_iq", r.mean_iq},
            {"mean_rc", r.mean_rc},
            {"mean_span", r.mean_span},
            {"n_evaluated", r.per_sample.size()},
            {"metrics", {{"rc", std::string(kRemoteCliqueDefinition)}, {"span", std::string(kSpanDefinition)}}},
            {"per_sample", samples}};
}

}  // namespace ciaf
