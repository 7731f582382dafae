#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciaf/gateway.hpp"
#include "ciaf/pipeline.hpp"
#include "ciaf/prompts.hpp"

namespace ciaf {

enum class SummarySource { generated, reference };

struct PerspectiveEntry {
    std::string sentence;
    std::string label;

    bool operator==(const PerspectiveEntry&) const = default;
};

struct PerspectiveSet {
    std::string sample_id;
    std::vector<PerspectiveEntry> perspectives;
    SummarySource source = SummarySource::generated;
};

struct QualityJudgment {
    std::string sample_id;
    int score = 1;  // 1..5
    std::string rationale;
    std::string judge_model_id;
    bool clamped = false;
};

struct DiversityScores {
    std::string sample_id;
    double rc = 0.0;
    double span = 0.0;
    std::size_t n_perspectives = 0;
};

struct SampleEvaluation {
    QualityJudgment quality;
    DiversityScores diversity;
    PerspectiveSet perspectives;
};

struct EvalReport {
    std::string run_id;
    double mean_iq = 0.0;
    double mean_rc = 0.0;
    double mean_span = 0.0;
    std::vector<SampleEvaluation> per_sample;
};

/// Splits prose into sentences at '.', '!' or '?' followed by whitespace or
/// the end of text, so decimals such as "4.5" stay intact.
std::vector<std::string> split_sentences(const std::string& text);

/// Extracts an integer 1-5 judgment from a judge reply: a JSON object with
/// "score" (and optionally "rationale"), or "score: N" / "N/5" in prose.
/// Out-of-range scores are clamped and flagged. Throws NoScoreFound.
QualityJudgment parse_judgment(const std::string& reply);

/// Template names an evaluation prompt set must provide.
const std::vector<std::string>& eval_templates();

/// Insight-level evaluation: perspective extraction, quality judging and the
/// embedding diversity metrics. Judge calls always run at temperature 0.
class InsightEvaluator {
public:
    InsightEvaluator(Gateway& judge, const PromptSet& prompts);

    /// One judge call labelling every sentence. Unlabelled sentences are
    /// dropped; repeated labels keep their first sentence. Throws
    /// PerspectiveParseError.
    PerspectiveSet extract_perspectives(const std::string& summary_text, const std::string& sample_id = {},
                                        SummarySource source = SummarySource::generated) const;

    /// Throws NoScoreFound, InvalidArgument for empty inputs.
    QualityJudgment score_quality(const std::string& generated, const std::string& reference,
                                  const std::string& sample_id = {}) const;

    /// Embeds each perspective's sentence and scores the set.
    DiversityScores score_diversity(const PerspectiveSet& perspectives) const;

    /// Perspectives, then diversity, then quality. Failures surface as
    /// StageError naming the phase.
    SampleEvaluation evaluate(const ChartSummary& summary, const std::string& reference) const;

private:
    Gateway& judge_;
    const PromptSet& prompts_;
};

/// Arithmetic means over `per_sample`. Throws EmptyRun.
EvalReport aggregate(std::vector<SampleEvaluation> per_sample, std::string run_id);

nlohmann::json to_json(const SampleEvaluation& e);
nlohmann::json to_json(const EvalReport& report);
SampleEvaluation sample_evaluation_from_json(const nlohmann::json& j);

}  // namespace ciaf
