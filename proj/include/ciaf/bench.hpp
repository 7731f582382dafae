#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciaf/gateway.hpp"
#include "ciaf/insight_eval.hpp"
#include "ciaf/pipeline.hpp"

namespace ciaf {

enum class RunMode { pipeline, baseline, ablate_planner, ablate_extractor };

std::string_view to_string(RunMode mode);
std::optional<RunMode> parse_run_mode(std::string_view text);

/// The pipeline config a mode actually runs with.
PipelineConfig config_for_mode(PipelineConfig base, RunMode mode);

struct SampleRecord {
    std::string sample_id;
    bool ok = false;
    std::optional<ChartSummary> summary;
    std::string error_kind;
    std::string error_stage;
    std::string error_message;
};

struct RunRecord {
    std::string run_id;
    RunMode mode = RunMode::pipeline;
    PipelineConfig config;
    std::string chat_model;
    std::string embed_model;
    std::string backend_id;
    std::filesystem::path manifest_path;
    int manifest_version = 1;
    std::string started_at;
    std::string finished_at;
    std::vector<SampleRecord> samples;  // manifest order
    TokenUsage session_usage;           // tokens spent by the invocation that finished the run

    std::size_t failures() const;
};

struct RunOptions {
    std::filesystem::path manifest;
    RunMode mode = RunMode::pipeline;
    std::filesystem::path out_dir;
    std::filesystem::path prompts_root;
    PipelineConfig config;
    std::size_t workers = 1;
    std::optional<std::string> run_id;
    // Execute at most this many pending samples, then stop without writing the
    // final record. Simulates an interrupted run.
    std::optional<std::size_t> sample_limit;
};

struct RunResult {
    RunRecord record;
    std::filesystem::path run_dir;
    bool complete = false;
    std::size_t executed = 0;
    std::size_t skipped = 0;
};

/// Runs `options.mode` over every manifest sample, one record file per sample
/// under `<out>/<run_id>/samples/`. Samples whose record says ok are skipped on
/// rerun; failed ones are retried. The run id defaults to a digest of
/// everything that determines the outputs, so rerunning the same command
/// resumes the same run. A finished run (run.json present) is returned as is.
///
/// Per-sample errors are recorded, not thrown. Throws on manifest, prompt or
/// config problems and RunConflict when the run directory belongs to a
/// different configuration.
RunResult cmd_run(const RunOptions& options, Gateway& gateway);

struct EvalFailure {
    std::string sample_id;
    std::string kind;
    std::string message;
};

struct EvalOutcome {
    EvalReport report;
    std::vector<EvalFailure> failures;
    std::size_t skipped_failed_runs = 0;  // samples that failed generation
};

/// Evaluates every successful sample of a run directory, persisting one file
/// per sample under `eval/` and the aggregate as `eval.json` plus `eval.txt`.
/// Throws EmptyRun, MissingReference.
EvalOutcome cmd_eval(const std::filesystem::path& run_dir, Gateway& judge, const std::filesystem::path& prompts_root,
                     std::size_t workers = 1);

struct MetricTriple {
    double iq = 0.0;
    double rc = 0.0;
    double span = 0.0;
};

struct ComparisonRow {
    std::string run_id;
    std::string mode;
    std::size_t n_evaluated = 0;
    std::size_t n_failed = 0;
    MetricTriple value;
    MetricTriple delta;  // value - base
    // 100 * delta / base; empty when the base value is 0
    std::optional<double> pct_iq, pct_rc, pct_span;
};

struct ComparisonReport {
    std::string base_run_id;
    std::vector<ComparisonRow> rows;
};

ComparisonRow compare_row(const ComparisonRow& base, ComparisonRow row);

/// Reads `eval.json` from every run directory and computes deltas against
/// `base_run_id`. Throws MissingEvalReport, InvalidArgument if the base run
/// is not among them.
ComparisonReport cmd_report(const std::vector<std::filesystem::path>& run_dirs, const std::string& base_run_id);

std::string render_table(const ComparisonReport& report);
nlohmann::json to_json(const ComparisonReport& report);

/// Markdown with, for every sample, the reference and each run's narrative
/// and scores, base run first.
std::string render_side_by_side(const std::vector<std::filesystem::path>& run_dirs, const std::string& base_run_id);

nlohmann::json to_json(const SampleRecord& record);
SampleRecord sample_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

/// File-name-safe form of a sample id.
std::string sample_file_stem(const std::string& sample_id);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace ciaf
