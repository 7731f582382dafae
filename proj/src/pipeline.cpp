#include "ciaf/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <spdlog/spdlog.h>

#include "ask.hpp"
#include "ciaf/error.hpp"
#include "ciaf/structured.hpp"

namespace ciaf {

using nlohmann::json;

namespace detail {

std::string casefold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : trim_copy(s)) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

std::string trim_copy(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

using detail::casefold;
using detail::trim_copy;

namespace {

constexpr std::size_t kMaxPlannerExamples = 4;

std::string insight_kind_name(InsightKind k) { return k == InsightKind::data ? "data" : "domain"; }

// Replies are plain prose, but models like to wrap them in a code fence.
std::string strip_fence(const std::string& text) {
    std::string t = trim_copy(text);
    if (t.starts_with("```") && t.ends_with("```") && t.size() >= 6) {
        const auto first_nl = t.find('\n');
        if (first_nl != std::string::npos && first_nl < t.size() - 3) {
            t = trim_copy(std::string_view(t).substr(first_nl + 1, t.size() - 3 - first_nl - 1));
        } else {
            t = trim_copy(std::string_view(t).substr(3, t.size() - 6));
        }
    }
    return t;
}

std::string parse_narrative(const std::string& text) {
    auto narrative = strip_fence(text);
    if (narrative.empty()) throw InvalidArgument("empty narrative");
    return narrative;
}

std::string format_planner_examples(const json& examples, ChartType type) {
    std::vector<const json*> ordered;
    for (const auto& e : examples) {
        if (e.value("chart_type", "") == to_string(type)) ordered.push_back(&e);
    }
    for (const auto& e : examples) {
        if (e.value("chart_type", "") != to_string(type)) ordered.push_back(&e);
    }
    if (ordered.size() > kMaxPlannerExamples) ordered.resize(kMaxPlannerExamples);

    std::string out;
    for (const auto* e : ordered) {
        out += "- Chart type: " + e->value("chart_type", "other") + "; domain: " + e->value("domain", "general") +
               "; perspectives: ";
        bool first = true;
        for (const auto& p : e->at("perspectives")) {
            if (!first) out += ", ";
            out += p.get<std::string>();
            first = false;
        }
        out += "\n";
    }
    return out;
}

std::string format_plan(const InsightPlan& plan) {
    std::string out;
    for (std::size_t i = 0; i < plan.perspectives.size(); ++i) {
        out += std::to_string(i + 1) + ". " + plan.perspectives[i].name + ": " + plan.perspectives[i].instruction + "\n";
    }
    return out;
}

std::string format_data_examples(const json& examples) {
    std::string out;
    for (const auto& e : examples) {
        out += "- [" + e.value("perspective", std::string(kUnplanned)) + "] " + e.at("text").get<std::string>() + "\n";
    }
    return out;
}

std::string format_insights(const std::vector<Insight>& insights) {
    std::string data, domain;
    for (const auto& in : insights) {
        auto& section = in.kind == InsightKind::data ? data : domain;
        section += "- (" + in.perspective + ") " + in.text + "\n";
    }
    std::string out;
    if (!data.empty()) out += "Data insights:\n" + data;
    if (!domain.empty()) out += (out.empty() ? "" : "\n") + std::string("Domain insights:\n") + domain;
    return out;
}

const Shape& plan_shape() {
    static const Shape s = Shape::object(
        "InsightPlan", {{"domain", Shape::string()}, {"perspectives", Shape::array_of(Shape::any())}}, true);
    return s;
}

const Shape& data_insights_shape() {
    static const Shape s = Shape::object(
        "DataInsights",
        {{"insights", Shape::array_of(Shape::object("Insight",
                                                    {{"perspective", Shape::string().or_null(), false},
                                                     {"text", Shape::string()}},
                                                    true))}},
        true);
    return s;
}

const Shape& domain_insights_shape() {
    static const Shape s = Shape::object(
        "DomainInsights",
        {{"insights", Shape::array_of(Shape::object("Insight",
                                                    {{"source", Shape::integer().or_null(), false},
                                                     {"perspective", Shape::string().or_null(), false},
                                                     {"text", Shape::string()}},
                                                    true))}},
        true);
    return s;
}

InsightPlan plan_from_reply(const std::string& text, std::size_t cap) {
    const json j = parse_structured(text, plan_shape());
    InsightPlan plan;
    plan.domain_label = trim_copy(j.at("domain").get<std::string>());
    if (plan.domain_label.empty()) throw InvalidArgument("plan has an empty domain");

    std::set<std::string> seen;
    const auto& items = j.at("perspectives");
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        PlanStep step;
        if (item.is_string()) {
            step.name = trim_copy(item.get<std::string>());
            step.instruction = step.name;
        } else if (item.is_object() && item.contains("name") && item["name"].is_string()) {
            step.name = trim_copy(item["name"].get<std::string>());
            const auto instr = item.find("instruction");
            step.instruction = instr != item.end() && instr->is_string() ? trim_copy(instr->get<std::string>()) : "";
            if (step.instruction.empty()) step.instruction = step.name;
        } else {
            throw SchemaMismatch({"perspectives[" + std::to_string(i) + "]"});
        }
        if (step.name.empty()) continue;
        if (!seen.insert(casefold(step.name)).second) {
            spdlog::debug("planner repeated perspective '{}'; dropped", step.name);
            continue;
        }
        plan.perspectives.push_back(std::move(step));
    }
    if (plan.perspectives.empty()) throw InvalidArgument("plan has no perspectives");
    if (plan.perspectives.size() > cap) plan.perspectives.resize(cap);
    return plan;
}

}  // namespace

void InsightPlan::validate(std::size_t cap) const {
    if (perspectives.empty() || perspectives.size() > cap) {
        throw InvalidArgument("plan must have between 1 and " + std::to_string(cap) + " perspectives");
    }
    if (trim_copy(domain_label).empty()) throw InvalidArgument("plan domain_label is empty");
    std::set<std::string> seen;
    for (const auto& step : perspectives) {
        if (trim_copy(step.name).empty() || trim_copy(step.instruction).empty()) {
            throw InvalidArgument("plan step with empty name or instruction");
        }
        if (!seen.insert(casefold(step.name)).second) {
            throw InvalidArgument("duplicate plan perspective '" + step.name + "'");
        }
    }
}

InsightPlan default_plan() {
    return {{{"describe notable findings", "Describe the most notable findings shown in the chart."}}, "general"};
}

void validate_insights(const std::vector<Insight>& insights) {
    for (std::size_t i = 0; i < insights.size(); ++i) {
        const auto& in = insights[i];
        if (trim_copy(in.text).empty()) throw InvalidArgument("insight " + std::to_string(i) + " has empty text");
        if (!in.derived_from) continue;
        if (in.kind == InsightKind::data) {
            throw InvalidArgument("data insight " + std::to_string(i) + " must not carry derived_from");
        }
        const auto ref = *in.derived_from;
        if (ref >= insights.size() || insights[ref].kind != InsightKind::data) {
            throw InvalidArgument("insight " + std::to_string(i) + " derived_from does not name a data insight");
        }
    }
}

PipelineConfig PipelineConfig::deterministic() const {
    PipelineConfig c = *this;
    c.temperatures = {0.0, 0.0, 0.0, 0.0, 0.0};
    return c;
}

void PipelineConfig::validate() const {
    if (max_perspectives < 1) throw InvalidArgument("max_perspectives must be >= 1");
    if (!use_planner && !use_extractor) {
        throw InvalidArgument("planner and extractor cannot both be disabled");
    }
    for (double t : {temperatures.planner, temperatures.data_analyst, temperatures.domain_analyst,
                     temperatures.summarizer, temperatures.baseline}) {
        if (!(t >= 0.0 && t <= 2.0)) throw InvalidArgument("stage temperature outside [0,2]");
    }
    if (max_output_tokens < 1) throw InvalidArgument("max_output_tokens must be >= 1");
    if (prompt_set_id.empty()) throw InvalidArgument("prompt_set_id is empty");
}

const std::vector<std::string>& pipeline_templates() {
    static const std::vector<std::string> names = {
        "planner.system",     "planner.user",       "data_analyst.system", "data_analyst.user",
        "domain_analyst.system", "domain_analyst.user", "summarizer.system", "summarizer.user",
        "baseline.system",    "baseline.user"};
    return names;
}

const std::vector<std::string>& pipeline_resources() {
    static const std::vector<std::string> names = {"planner_examples", "data_insight_examples"};
    return names;
}

ChartInsightFlow::ChartInsightFlow(Gateway& gateway, const PromptSet& prompts, PipelineConfig config)
    : gateway_(gateway), prompts_(prompts), config_(std::move(config)) {
    config_.validate();
    if (config_.prompt_set_id != prompts_.id()) {
        throw InvalidArgument("config names prompt set '" + config_.prompt_set_id + "' but '" + prompts_.id() +
                              "' was loaded");
    }
    prompts_.require(pipeline_templates(), pipeline_resources());
}

ImagePayload ChartInsightFlow::load_image(const ChartSample& sample) const {
    auto bytes = read_file_bytes(sample.image_path);
    const auto info = probe_image(bytes, sample.image_path.string());
    return {std::move(bytes), info.media_type()};
}

ChatRequest ChartInsightFlow::request(const std::string& agent, const PromptVars& vars, double temperature) const {
    ChatRequest r;
    r.model_id = gateway_.chat_model();
    r.system_prompt = prompts_.get(agent + ".system").render(vars);
    r.user_prompt = prompts_.get(agent + ".user").render(vars);
    r.temperature = temperature;
    r.max_output_tokens = config_.max_output_tokens;
    r.cache_namespace = prompts_.id();
    return r;
}

InsightPlan ChartInsightFlow::plan(const ChartSample& sample, CallTrace* trace) const {
    auto image = load_image(sample);
    const PromptVars vars = {
        {"title", sample.title},
        {"chart_type", std::string(to_string(sample.chart_type))},
        {"max_perspectives", std::to_string(config_.max_perspectives)},
        {"examples", format_planner_examples(prompts_.resource("planner_examples"), sample.chart_type)}};
    auto req = request("planner", vars, config_.temperatures.planner);
    req.image = std::move(image);
    req.response_schema_hint = "InsightPlan";

    auto plan = detail::ask_with_reask<PlanParseError>(
        gateway_, std::move(req), "planner", trace,
        [&](const std::string& text) { return plan_from_reply(text, config_.max_perspectives); });
    plan.validate(config_.max_perspectives);
    return plan;
}

std::vector<Insight> ChartInsightFlow::extract_data_insights(const ChartSample& sample, const InsightPlan& plan,
                                                             CallTrace* trace) const {
    plan.validate(std::max(config_.max_perspectives, plan.perspectives.size()));
    auto image = load_image(sample);
    const PromptVars vars = {{"title", sample.title},
                             {"chart_type", std::string(to_string(sample.chart_type))},
                             {"plan", format_plan(plan)},
                             {"examples", format_data_examples(prompts_.resource("data_insight_examples"))}};
    auto req = request("data_analyst", vars, config_.temperatures.data_analyst);
    req.image = std::move(image);
    req.response_schema_hint = "DataInsights";

    auto parse = [&](const std::string& text) {
        const json j = parse_structured(text, data_insights_shape());
        std::vector<Insight> out;
        for (const auto& item : j.at("insights")) {
            Insight in;
            in.kind = InsightKind::data;
            in.text = trim_copy(item.at("text").get<std::string>());
            if (in.text.empty()) continue;
            std::string tag;
            if (auto p = item.find("perspective"); p != item.end() && p->is_string()) tag = casefold(p->get<std::string>());
            in.perspective = kUnplanned;
            for (const auto& step : plan.perspectives) {
                if (casefold(step.name) == tag) {
                    in.perspective = step.name;
                    break;
                }
            }
            out.push_back(std::move(in));
        }
        if (out.empty()) throw InvalidArgument("reply contains no data insights");
        return out;
    };
    return detail::ask_with_reask<ExtractionParseError>(gateway_, std::move(req), "data_analyst", trace, parse);
}

std::vector<Insight> ChartInsightFlow::extract_domain_insights(const std::vector<Insight>& data_insights,
                                                               const std::string& domain_label,
                                                               const std::string& title, CallTrace* trace) const {
    if (data_insights.empty()) throw InvalidArgument("domain analysis needs at least one data insight");
    if (trim_copy(domain_label).empty()) throw InvalidArgument("domain analysis needs a domain label");

    std::string numbered;
    for (std::size_t i = 0; i < data_insights.size(); ++i) {
        numbered += std::to_string(i + 1) + ". (" + data_insights[i].perspective + ") " + data_insights[i].text + "\n";
    }
    const PromptVars vars = {{"title", title}, {"domain", domain_label}, {"data_insights", numbered}};
    auto req = request("domain_analyst", vars, config_.temperatures.domain_analyst);
    req.response_schema_hint = "DomainInsights";

    auto parse = [&](const std::string& text) {
        const json j = parse_structured(text, domain_insights_shape());
        std::vector<Insight> out;
        for (const auto& item : j.at("insights")) {
            Insight in;
            in.kind = InsightKind::domain;
            in.text = trim_copy(item.at("text").get<std::string>());
            if (in.text.empty()) continue;
            in.perspective = kUnplanned;
            if (auto p = item.find("perspective"); p != item.end() && p->is_string() &&
                                                   !trim_copy(p->get<std::string>()).empty()) {
                in.perspective = trim_copy(p->get<std::string>());
            }
            if (auto s = item.find("source"); s != item.end() && s->is_number_integer()) {
                const auto source = s->get<long long>();
                if (source >= 1 && static_cast<std::size_t>(source) <= data_insights.size() &&
                    data_insights[source - 1].kind == InsightKind::data) {
                    in.derived_from = static_cast<std::size_t>(source - 1);
                    in.perspective = data_insights[source - 1].perspective;
                } else {
                    spdlog::warn("domain insight cites data insight {} which does not exist; reference dropped",
                                 source);
                }
            }
            out.push_back(std::move(in));
        }
        if (out.empty()) throw InvalidArgument("reply contains no domain insights");
        return out;
    };
    return detail::ask_with_reask<ExtractionParseError>(gateway_, std::move(req), "domain_analyst", trace, parse);
}

ChartSummary ChartInsightFlow::summarize(const ChartSample& sample, std::vector<Insight> insights,
                                         const std::string& domain_label, CallTrace trace) const {
    if (insights.empty()) throw InvalidArgument("summarizer needs at least one insight");
    validate_insights(insights);

    const PromptVars vars = {{"title", sample.title},
                             {"chart_type", std::string(to_string(sample.chart_type))},
                             {"domain", domain_label},
                             {"insights", format_insights(insights)}};
    auto req = request("summarizer", vars, config_.temperatures.summarizer);

    ChartSummary summary;
    summary.sample_id = sample.id;
    summary.narrative = detail::ask_with_reask<EmptyNarrative>(gateway_, std::move(req), "summarizer", &trace,
                                                               parse_narrative);
    summary.insights = std::move(insights);
    summary.trace = std::move(trace);
    return summary;
}

ChartSummary ChartInsightFlow::run(const ChartSample& sample) const {
    CallTrace trace;

    InsightPlan plan = config_.use_planner ? in_stage("plan", [&] { return this->plan(sample, &trace); })
                                           : default_plan();

    std::vector<Insight> insights;
    if (config_.use_extractor) {
        insights = in_stage("extract_data", [&] { return extract_data_insights(sample, plan, &trace); });
        auto domain = in_stage("extract_domain", [&] {
            return extract_domain_insights(insights, plan.domain_label, sample.title, &trace);
        });
        insights.insert(insights.end(), std::make_move_iterator(domain.begin()), std::make_move_iterator(domain.end()));
    } else {
        // Without the extractor the summarizer works from the plan alone.
        for (const auto& step : plan.perspectives) insights.push_back({InsightKind::data, step.name, step.name, {}});
    }

    auto summary = in_stage("summarize", [&] { return summarize(sample, std::move(insights), plan.domain_label, trace); });
    summary.plan = std::move(plan);
    return summary;
}

ChartSummary ChartInsightFlow::run_baseline(const ChartSample& sample) const {
    auto image = load_image(sample);
    auto req = request("baseline", {{"title", sample.title}}, config_.temperatures.baseline);
    req.image = std::move(image);

    ChartSummary summary;
    summary.sample_id = sample.id;
    summary.narrative = detail::ask_with_reask<EmptyNarrative>(gateway_, std::move(req), "baseline", &summary.trace,
                                                               parse_narrative);
    return summary;
}

json to_json(const InsightPlan& plan) {
    json steps = json::array();
    for (const auto& s : plan.perspectives) steps.push_back({{"name", s.name}, {"instruction", s.instruction}});
    return {{"domain_label", plan.domain_label}, {"perspectives", steps}};
}

json to_json(const Insight& in) {
    return {{"kind", insight_kind_name(in.kind)},
            {"perspective", in.perspective},
            {"text", in.text},
            {"derived_from", in.derived_from ? json(*in.derived_from) : json(nullptr)}};
}

json to_json(const ChartSummary& s) {
    json insights = json::array();
    for (const auto& in : s.insights) insights.push_back(to_json(in));
    json trace = json::array();
    for (const auto& t : s.trace) trace.push_back({{"agent", t.agent}, {"cache_key", t.cache_key}});
    return {{"sample_id", s.sample_id},
            {"narrative", s.narrative},
            {"insights", insights},
            {"plan", s.plan ? to_json(*s.plan) : json(nullptr)},
            {"trace", trace}};
}

json to_json(const PipelineConfig& c) {
    return {{"use_planner", c.use_planner},
            {"use_extractor", c.use_extractor},
            {"max_perspectives", c.max_perspectives},
            {"temperatures",
             {{"planner", c.temperatures.planner},
              {"data_analyst", c.temperatures.data_analyst},
              {"domain_analyst", c.temperatures.domain_analyst},
              {"summarizer", c.temperatures.summarizer},
              {"baseline", c.temperatures.baseline}}},
            {"prompt_set_id", c.prompt_set_id},
            {"max_output_tokens", c.max_output_tokens}};
}

ChartSummary summary_from_json(const json& j) {
    ChartSummary s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.narrative = j.at("narrative").get<std::string>();
    for (const auto& in : j.at("insights")) {
        Insight insight;
        insight.kind = in.at("kind").get<std::string>() == "domain" ? InsightKind::domain : InsightKind::data;
        insight.perspective = in.at("perspective").get<std::string>();
        insight.text = in.at("text").get<std::string>();
        if (const auto& d = in.at("derived_from"); !d.is_null()) insight.derived_from = d.get<std::size_t>();
        s.insights.push_back(std::move(insight));
    }
    if (const auto& p = j.at("plan"); !p.is_null()) {
        InsightPlan plan;
        plan.domain_label = p.at("domain_label").get<std::string>();
        for (const auto& step : p.at("perspectives")) {
            plan.perspectives.push_back({step.at("name").get<std::string>(), step.at("instruction").get<std::string>()});
        }
        s.plan = std::move(plan);
    }
    for (const auto& t : j.at("trace")) {
        s.trace.push_back({t.at("agent").get<std::string>(), t.at("cache_key").get<std::string>()});
    }
    return s;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    c.use_planner = j.value("use_planner", c.use_planner);
    c.use_extractor = j.value("use_extractor", c.use_extractor);
    c.max_perspectives = j.value("max_perspectives", c.max_perspectives);
    if (auto t = j.find("temperatures"); t != j.end()) {
        c.temperatures.planner = t->value("planner", c.temperatures.planner);
        c.temperatures.data_analyst = t->value("data_analyst", c.temperatures.data_analyst);
        c.temperatures.domain_analyst = t->value("domain_analyst", c.temperatures.domain_analyst);
        c.temperatures.summarizer = t->value("summarizer", c.temperatures.summarizer);
        c.temperatures.baseline = t->value("baseline", c.temperatures.baseline);
    }
    c.prompt_set_id = j.value("prompt_set_id", c.prompt_set_id);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    return c;
}

}  // namespace ciaf
