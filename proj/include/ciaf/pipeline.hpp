#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciaf/corpus.hpp"
#include "ciaf/gateway.hpp"
#include "ciaf/prompts.hpp"

namespace ciaf {

struct PlanStep {
    std::string name;         // e.g. "long-term trend"
    std::string instruction;  // one-sentence analytical action

    bool operator==(const PlanStep&) const = default;
};

struct InsightPlan {
    std::vector<PlanStep> perspectives;
    std::string domain_label;

    /// Throws InvalidArgument unless 1 <= |perspectives| <= cap, names are
    /// distinct after case-folding, and every field is non-empty.
    void validate(std::size_t cap) const;
    bool operator==(const InsightPlan&) const = default;
};

/// Plan used when the planner is ablated.
InsightPlan default_plan();

enum class InsightKind { data, domain };

inline constexpr const char* kUnplanned = "unplanned";

struct Insight {
    InsightKind kind = InsightKind::data;
    std::string perspective;  // a plan step name or kUnplanned
    std::string text;
    // Index of the data insight this one enriches, within the same insight
    // list. Only domain insights carry it.
    std::optional<std::size_t> derived_from;

    bool operator==(const Insight&) const = default;
};

struct TraceEntry {
    std::string agent;
    std::string cache_key;

    bool operator==(const TraceEntry&) const = default;
};

using CallTrace = std::vector<TraceEntry>;

struct ChartSummary {
    std::string sample_id;
    std::string narrative;
    std::vector<Insight> insights;
    std::optional<InsightPlan> plan;
    CallTrace trace;

    bool operator==(const ChartSummary& o) const {
        return sample_id == o.sample_id && narrative == o.narrative && insights == o.insights && plan == o.plan &&
               trace == o.trace;
    }
};

/// Throws InvalidArgument when an insight breaks its invariants or a
/// derived_from does not resolve to a data insight of the same summary.
void validate_insights(const std::vector<Insight>& insights);

struct StageTemperatures {
    double planner = 0.3;
    double data_analyst = 0.2;
    double domain_analyst = 0.2;
    double summarizer = 0.2;
    double baseline = 0.2;
};

struct PipelineConfig {
    bool use_planner = true;
    bool use_extractor = true;
    std::size_t max_perspectives = 8;
    StageTemperatures temperatures;
    std::string prompt_set_id = "default";
    int max_output_tokens = 1024;

    /// Same config with every stage at temperature 0.
    PipelineConfig deterministic() const;

    /// Throws InvalidArgument.
    void validate() const;
};

/// Template and resource names a pipeline prompt set must provide.
const std::vector<std::string>& pipeline_templates();
const std::vector<std::string>& pipeline_resources();

/// The chart insight agent flow: Planner, then Data Analyst and Domain
/// Analyst, then Summarizer. Each agent is one chat call; a reply that cannot
/// be parsed is re-asked once with the parse error appended, then the stage
/// fails. Every call made is appended to the optional trace, re-asks included.
///
/// Holds references only; the gateway and prompt set must outlive it.
class ChartInsightFlow {
public:
    ChartInsightFlow(Gateway& gateway, const PromptSet& prompts, PipelineConfig config);

    /// Multimodal call. Throws PlanParseError.
    InsightPlan plan(const ChartSample& sample, CallTrace* trace = nullptr) const;

    /// Multimodal call. Insights tagged with an unknown perspective are kept
    /// and retagged kUnplanned. Throws ExtractionParseError.
    std::vector<Insight> extract_data_insights(const ChartSample& sample, const InsightPlan& plan,
                                               CallTrace* trace = nullptr) const;

    /// Text-only call. derived_from indexes into `data_insights`; references
    /// the backend states that do not resolve are cleared. Throws
    /// InvalidArgument before calling when inputs are empty,
    /// ExtractionParseError on unusable replies.
    std::vector<Insight> extract_domain_insights(const std::vector<Insight>& data_insights,
                                                 const std::string& domain_label, const std::string& title = {},
                                                 CallTrace* trace = nullptr) const;

    /// Text-only call. `trace` carries the calls of earlier stages into the
    /// summary. Throws EmptyNarrative.
    ChartSummary summarize(const ChartSample& sample, std::vector<Insight> insights, const std::string& domain_label,
                           CallTrace trace = {}) const;

    /// Full flow with the configured ablations. Stage failures surface as
    /// StageError naming the stage.
    ChartSummary run(const ChartSample& sample) const;

    /// Single multimodal call with no plan or insights.
    ChartSummary run_baseline(const ChartSample& sample) const;

    const PipelineConfig& config() const { return config_; }

private:
    ImagePayload load_image(const ChartSample& sample) const;
    ChatRequest request(const std::string& agent, const PromptVars& vars, double temperature) const;

    Gateway& gateway_;
    const PromptSet& prompts_;
    PipelineConfig config_;
};

nlohmann::json to_json(const InsightPlan& plan);
nlohmann::json to_json(const Insight& insight);
nlohmann::json to_json(const ChartSummary& summary);
nlohmann::json to_json(const PipelineConfig& config);
ChartSummary summary_from_json(const nlohmann::json& j);
PipelineConfig config_from_json(const nlohmann::json& j);

}  // namespace ciaf
