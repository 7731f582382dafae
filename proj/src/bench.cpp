#include "ciaf/bench.hpp"

#include <atomic>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ciaf/corpus.hpp"
#include "ciaf/digest.hpp"
#include "ciaf/error.hpp"
#include "ciaf/prompts.hpp"

namespace ciaf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kModeNames = {"pipeline", "baseline", "ablate-planner", "ablate-extractor"};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
    try {
        return json::parse(read_text(p));
    } catch (const json::parse_error& e) {
        throw IoError(p.string() + ": " + e.what());
    }
}

void write_json_atomic(const fs::path& p, const json& j) { write_text_atomic(p, j.dump(2) + "\n"); }

/// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must not throw.
void parallel_for(std::size_t n, std::size_t workers, const std::function<bool(std::size_t)>& fn) {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    auto worker = [&] {
        while (!stop.load()) {
            const auto i = next.fetch_add(1);
            if (i >= n) return;
            if (!fn(i)) stop = true;
        }
    };
    const auto count = std::max<std::size_t>(1, std::min(workers, n));
    if (count == 1) {
        worker();
        return;
    }
    std::vector<std::jthread> threads;
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
}

fs::path sample_path(const fs::path& run_dir, const std::string& id) {
    return run_dir / "samples" / (sample_file_stem(id) + ".json");
}

fs::path eval_path(const fs::path& run_dir, const std::string& id) {
    return run_dir / "eval" / (sample_file_stem(id) + ".json");
}

SampleRecord record_failure(const std::string& id, const std::exception& e) {
    SampleRecord r;
    r.sample_id = id;
    r.ok = false;
    r.error_message = e.what();
    if (const auto* stage = dynamic_cast<const StageError*>(&e)) {
        r.error_stage = stage->stage();
        r.error_kind = innermost_kind(e);
    } else if (const auto* err = dynamic_cast<const Error*>(&e)) {
        r.error_kind = err->kind();
    } else {
        r.error_kind = "std::exception";
    }
    return r;
}

std::optional<SampleRecord> load_sample_record(const fs::path& p) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) return std::nullopt;
    try {
        return sample_record_from_json(read_json(p));
    } catch (const std::exception& e) {
        spdlog::warn("ignoring unreadable sample record {}: {}", p.string(), e.what());
        return std::nullopt;
    }
}

// Sample records of a run in manifest order, whether or not it finished.
std::vector<SampleRecord> load_run_samples(const fs::path& run_dir, const CorpusManifest* manifest) {
    if (fs::exists(run_dir / "run.json")) return run_record_from_json(read_json(run_dir / "run.json")).samples;
    std::vector<SampleRecord> out;
    if (manifest) {
        for (const auto& s : manifest->samples) {
            if (auto r = load_sample_record(sample_path(run_dir, s.id))) out.push_back(std::move(*r));
        }
        return out;
    }
    if (!fs::is_directory(run_dir / "samples")) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(run_dir / "samples")) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        if (auto r = load_sample_record(f)) out.push_back(std::move(*r));
    }
    return out;
}

std::string format_signed(double v) { return fmt::format("{:+.2f}", v); }

std::string format_pct(const std::optional<double>& v) {
    return v ? fmt::format("{:+.2f}%", *v) : std::string("n/a");
}

}  // namespace

std::string_view to_string(RunMode mode) { return kModeNames[static_cast<std::size_t>(mode)]; }

std::optional<RunMode> parse_run_mode(std::string_view text) {
    for (std::size_t i = 0; i < kModeNames.size(); ++i) {
        if (kModeNames[i] == text) return static_cast<RunMode>(i);
    }
    return std::nullopt;
}

PipelineConfig config_for_mode(PipelineConfig base, RunMode mode) {
    switch (mode) {
        case RunMode::pipeline:
        case RunMode::baseline:
            base.use_planner = true;
            base.use_extractor = true;
            break;
        case RunMode::ablate_planner:
            base.use_planner = false;
            base.use_extractor = true;
            break;
        case RunMode::ablate_extractor:
            base.use_planner = true;
            base.use_extractor = false;
            break;
    }
    return base;
}

std::size_t RunRecord::failures() const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const auto& s) { return !s.ok; }));
}

std::string sample_file_stem(const std::string& sample_id) {
    std::string stem;
    bool changed = false;
    for (char c : sample_id) {
        const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        stem.push_back(safe ? c : '_');
        changed |= !safe;
    }
    if (stem.empty() || stem.front() == '.') changed = true;
    if (changed) stem += "-" + sha256_hex(sample_id).substr(0, 8);
    return stem;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    static std::atomic<unsigned long> counter{0};
    fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
           std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

json to_json(const SampleRecord& r) {
    json j = {{"sample_id", r.sample_id}, {"status", r.ok ? "ok" : "failed"}};
    j["summary"] = r.summary ? to_json(*r.summary) : json(nullptr);
    j["error"] = r.ok ? json(nullptr)
                      : json{{"kind", r.error_kind}, {"stage", r.error_stage}, {"message", r.error_message}};
    return j;
}

SampleRecord sample_record_from_json(const json& j) {
    SampleRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.ok = j.at("status").get<std::string>() == "ok";
    if (const auto& s = j.at("summary"); !s.is_null()) r.summary = summary_from_json(s);
    if (const auto& e = j.at("error"); !e.is_null()) {
        r.error_kind = e.value("kind", "");
        r.error_stage = e.value("stage", "");
        r.error_message = e.value("message", "");
    }
    if (r.ok && !r.summary) throw IoError("sample record " + r.sample_id + " is ok but has no summary");
    return r;
}

json to_json(const RunRecord& r) {
    json samples = json::array();
    for (const auto& s : r.samples) samples.push_back(to_json(s));
    return {{"run_id", r.run_id},
            {"mode", std::string(to_string(r.mode))},
            {"baseline", r.mode == RunMode::baseline},
            {"config", to_json(r.config)},
            {"prompt_set_id", r.config.prompt_set_id},
            {"models", {{"chat", r.chat_model}, {"embed", r.embed_model}}},
            {"backend_id", r.backend_id},
            {"manifest_path", r.manifest_path.string()},
            {"manifest_version", r.manifest_version},
            {"started_at", r.started_at},
            {"finished_at", r.finished_at},
            {"n_samples", r.samples.size()},
            {"n_failed", r.failures()},
            {"session_usage", {{"input_tokens", r.session_usage.input}, {"output_tokens", r.session_usage.output}}},
            {"samples", samples}};
}

RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    auto mode = parse_run_mode(j.at("mode").get<std::string>());
    if (!mode) throw IoError("run record with unknown mode");
    r.mode = *mode;
    r.config = config_from_json(j.at("config"));
    r.chat_model = j.at("models").value("chat", "");
    r.embed_model = j.at("models").value("embed", "");
    r.backend_id = j.value("backend_id", "");
    r.manifest_path = j.value("manifest_path", "");
    r.manifest_version = j.value("manifest_version", 1);
    r.started_at = j.value("started_at", "");
    r.finished_at = j.value("finished_at", "");
    if (auto u = j.find("session_usage"); u != j.end()) {
        r.session_usage = {u->value("input_tokens", 0LL), u->value("output_tokens", 0LL)};
    }
    for (const auto& s : j.at("samples")) r.samples.push_back(sample_record_from_json(s));
    return r;
}

RunResult cmd_run(const RunOptions& options, Gateway& gateway) {
    const auto manifest = load_manifest(options.manifest);
    const auto config = config_for_mode(options.config, options.mode);
    config.validate();
    const auto prompts = PromptSet::load(options.prompts_root, config.prompt_set_id);
    const ChartInsightFlow flow(gateway, prompts, config);

    // Everything that determines the outputs; the default run id is its digest.
    const json identity = {{"mode", std::string(to_string(options.mode))},
                           {"config", to_json(config)},
                           {"chat_model", gateway.chat_model()},
                           {"backend_id", gateway.backend_id()},
                           {"manifest_digest", sha256_hex(read_text(options.manifest))}};
    const std::string run_id =
        options.run_id.value_or(std::string(to_string(options.mode)) + "-" + sha256_hex(identity.dump()).substr(0, 12));
    if (run_id.empty() || run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos) {
        throw InvalidArgument("invalid run id '" + run_id + "'");
    }

    RunResult result;
    result.run_dir = options.out_dir / run_id;
    const auto config_path = result.run_dir / "run_config.json";
    std::string started_at;
    if (fs::exists(config_path)) {
        const json stored = read_json(config_path);
        if (stored.value("identity", json{}) != identity) {
            throw RunConflict("run directory " + result.run_dir.string() + " belongs to a different configuration");
        }
        started_at = stored.value("created_at", "");
        spdlog::info("resuming run {}", run_id);
    } else {
        started_at = utc_timestamp();
        write_json_atomic(config_path, {{"run_id", run_id},
                                        {"identity", identity},
                                        {"manifest_path", fs::absolute(options.manifest).lexically_normal().string()},
                                        {"manifest_version", manifest.manifest_version},
                                        {"embed_model", gateway.embed_model()},
                                        {"created_at", started_at}});
    }

    if (fs::exists(result.run_dir / "run.json")) {
        result.record = run_record_from_json(read_json(result.run_dir / "run.json"));
        result.complete = true;
        result.skipped = result.record.samples.size();
        spdlog::info("run {} is already complete", run_id);
        return result;
    }

    std::vector<const ChartSample*> pending;
    for (const auto& s : manifest.samples) {
        auto existing = load_sample_record(sample_path(result.run_dir, s.id));
        if (existing && existing->ok && existing->sample_id == s.id) {
            ++result.skipped;
            continue;
        }
        pending.push_back(&s);
    }
    spdlog::info("run {}: {} samples pending, {} already done", run_id, pending.size(), result.skipped);

    const auto usage_before = gateway.usage_totals();
    const std::size_t budget = options.sample_limit.value_or(pending.size());
    std::atomic<std::size_t> started{0};
    std::atomic<std::size_t> executed{0};

    parallel_for(pending.size(), options.workers, [&](std::size_t i) {
        if (started.fetch_add(1) >= budget) return false;
        const auto& sample = *pending[i];
        SampleRecord rec;
        try {
            rec.summary = options.mode == RunMode::baseline ? flow.run_baseline(sample) : flow.run(sample);
            rec.sample_id = sample.id;
            rec.ok = true;
        } catch (const std::exception& e) {
            rec = record_failure(sample.id, e);
            spdlog::warn("sample {} failed: {}", sample.id, e.what());
        }
        write_json_atomic(sample_path(result.run_dir, sample.id), to_json(rec));
        executed.fetch_add(1);
        return true;
    });
    result.executed = executed.load();

    if (result.executed < pending.size()) {
        spdlog::info("run {} stopped after {} samples", run_id, result.executed);
        return result;
    }

    RunRecord& record = result.record;
    record.run_id = run_id;
    record.mode = options.mode;
    record.config = config;
    record.chat_model = gateway.chat_model();
    record.embed_model = gateway.embed_model();
    record.backend_id = gateway.backend_id();
    record.manifest_path = fs::absolute(options.manifest).lexically_normal();
    record.manifest_version = manifest.manifest_version;
    record.started_at = started_at;
    for (const auto& s : manifest.samples) {
        auto rec = load_sample_record(sample_path(result.run_dir, s.id));
        if (!rec) throw IoError("sample record for " + s.id + " vanished during the run");
        record.samples.push_back(std::move(*rec));
    }
    const auto usage_after = gateway.usage_totals();
    record.session_usage = {usage_after.input - usage_before.input, usage_after.output - usage_before.output};
    record.finished_at = utc_timestamp();
    write_json_atomic(result.run_dir / "run.json", to_json(record));
    result.complete = true;
    return result;
}

EvalOutcome cmd_eval(const fs::path& run_dir, Gateway& judge, const fs::path& prompts_root, std::size_t workers) {
    const auto config_path = run_dir / "run_config.json";
    if (!fs::exists(config_path)) throw IoError("not a run directory: " + run_dir.string());
    const json run_config = read_json(config_path);
    const std::string run_id = run_config.at("run_id").get<std::string>();
    const auto manifest = load_manifest(run_config.at("manifest_path").get<std::string>());

    const auto records = load_run_samples(run_dir, &manifest);
    std::vector<const SampleRecord*> ok;
    EvalOutcome outcome;
    for (const auto& r : records) {
        if (r.ok) ok.push_back(&r);
        else ++outcome.skipped_failed_runs;
    }
    if (ok.empty()) throw EmptyRun("run " + run_id + " has no successful summaries");
    for (const auto* r : ok) {
        if (!manifest.find(r->sample_id)) throw MissingReference("no reference summary for sample " + r->sample_id);
    }

    const auto prompts = PromptSet::load(prompts_root, "eval");
    const InsightEvaluator evaluator(judge, prompts);

    std::vector<std::optional<SampleEvaluation>> results(ok.size());
    std::mutex failures_mu;
    parallel_for(ok.size(), workers, [&](std::size_t i) {
        const auto& rec = *ok[i];
        const auto path = eval_path(run_dir, rec.sample_id);
        if (fs::exists(path)) {
            try {
                const json stored = read_json(path);
                if (stored.at("quality").at("judge_model_id") == judge.chat_model() &&
                    stored.value("embed_model", "") == judge.embed_model()) {
                    results[i] = sample_evaluation_from_json(stored);
                    return true;
                }
            } catch (const std::exception& e) {
                spdlog::warn("re-evaluating {}: {}", rec.sample_id, e.what());
            }
        }
        try {
            auto e = evaluator.evaluate(*rec.summary, manifest.find(rec.sample_id)->reference_summary);
            json j = to_json(e);
            j["embed_model"] = judge.embed_model();
            write_json_atomic(path, j);
            results[i] = std::move(e);
        } catch (const std::exception& e) {
            spdlog::warn("evaluation of {} failed: {}", rec.sample_id, e.what());
            std::lock_guard lock(failures_mu);
            outcome.failures.push_back({rec.sample_id, innermost_kind(e), e.what()});
        }
        return true;
    });

    std::vector<SampleEvaluation> evaluated;
    for (auto& r : results) {
        if (r) evaluated.push_back(std::move(*r));
    }
    outcome.report = aggregate(std::move(evaluated), run_id);

    json report = to_json(outcome.report);
    report["mode"] = run_config.at("identity").value("mode", "");
    report["n_failed"] = outcome.failures.size() + outcome.skipped_failed_runs;
    report["n_generation_failed"] = outcome.skipped_failed_runs;
    report["judge_model"] = judge.chat_model();
    report["embed_model"] = judge.embed_model();
    json failures = json::array();
    for (const auto& f : outcome.failures) {
        failures.push_back({{"sample_id", f.sample_id}, {"kind", f.kind}, {"message", f.message}});
    }
    report["eval_failures"] = failures;
    write_json_atomic(run_dir / "eval.json", report);

    const auto n = outcome.report.per_sample.size();
    std::string text = fmt::format("run {}  judge {}  embed {}\n\n", run_id, judge.chat_model(), judge.embed_model());
    text += fmt::format("{:<24} {:>4} {:>8} {:>8} {:>6}\n", "sample", "IQ", "ID-RC", "ID-Span", "n");
    for (const auto& s : outcome.report.per_sample) {
        text += fmt::format("{:<24} {:>4} {:>8.4f} {:>8.4f} {:>6}\n", s.quality.sample_id, s.quality.score,
                            s.diversity.rc, s.diversity.span, s.diversity.n_perspectives);
    }
    text += fmt::format("\nmean IQ {:.2f}  ID-RC {:.4f}  ID-Span {:.4f}  over {} of {} samples\n",
                        outcome.report.mean_iq, outcome.report.mean_rc, outcome.report.mean_span, n, records.size());
    write_text_atomic(run_dir / "eval.txt", text);
    return outcome;
}

ComparisonRow compare_row(const ComparisonRow& base, ComparisonRow row) {
    auto pct = [](double delta, double b) -> std::optional<double> {
        if (b == 0.0) return std::nullopt;
        return 100.0 * delta / b;
    };
    row.delta = {row.value.iq - base.value.iq, row.value.rc - base.value.rc, row.value.span - base.value.span};
    row.pct_iq = pct(row.delta.iq, base.value.iq);
    row.pct_rc = pct(row.delta.rc, base.value.rc);
    row.pct_span = pct(row.delta.span, base.value.span);
    return row;
}

ComparisonReport cmd_report(const std::vector<fs::path>& run_dirs, const std::string& base_run_id) {
    std::vector<ComparisonRow> rows;
    for (const auto& dir : run_dirs) {
        const auto path = dir / "eval.json";
        if (!fs::exists(path)) throw MissingEvalReport("no eval.json in " + dir.string());
        const json j = read_json(path);
        ComparisonRow row;
        row.run_id = j.at("run_id").get<std::string>();
        row.mode = j.value("mode", "");
        row.n_evaluated = j.value("n_evaluated", std::size_t{0});
        row.n_failed = j.value("n_failed", std::size_t{0});
        row.value = {j.at("mean_iq").get<double>(), j.at("mean_rc").get<double>(), j.at("mean_span").get<double>()};
        rows.push_back(std::move(row));
    }
    auto base = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.run_id == base_run_id; });
    if (base == rows.end()) throw InvalidArgument("base run '" + base_run_id + "' is not among the runs");
    const ComparisonRow base_row = *base;

    ComparisonReport report;
    report.base_run_id = base_run_id;
    report.rows.push_back(compare_row(base_row, base_row));
    for (const auto& r : rows) {
        if (r.run_id != base_run_id) report.rows.push_back(compare_row(base_row, r));
    }
    return report;
}

std::string render_table(const ComparisonReport& report) {
    std::size_t id_width = 6;
    for (const auto& r : report.rows) id_width = std::max(id_width, r.run_id.size());

    std::string out = fmt::format("{:<{}}  {:<16} {:>5} {:>6} {:>7} {:>7}   {:>6} {:>8}  {:>6} {:>8}  {:>6} {:>8}\n",
                                  "run", id_width, "mode", "n", "IQ", "ID-RC", "ID-Span", "+IQ", "(+%)", "+RC", "(+%)",
                                  "+Span", "(+%)");
    for (const auto& r : report.rows) {
        out += fmt::format("{:<{}}  {:<16} {:>5} {:>6.2f} {:>7.2f} {:>7.2f}   {:>6} {:>8}  {:>6} {:>8}  {:>6} {:>8}\n",
                           r.run_id, id_width, r.mode, fmt::format("{}/{}", r.n_evaluated, r.n_evaluated + r.n_failed),
                           r.value.iq, r.value.rc, r.value.span, format_signed(r.delta.iq), format_pct(r.pct_iq),
                           format_signed(r.delta.rc), format_pct(r.pct_rc), format_signed(r.delta.span),
                           format_pct(r.pct_span));
    }
    out += "\nbase: " + report.base_run_id +
           ". Means are over successfully evaluated samples (n = evaluated/total). Single-run means; no "
           "significance testing.\n";
    return out;
}

json to_json(const ComparisonReport& report) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"run_id", r.run_id},
                        {"mode", r.mode},
                        {"n_evaluated", r.n_evaluated},
                        {"n_failed", r.n_failed},
                        {"mean_iq", r.value.iq},
                        {"mean_rc", r.value.rc},
                        {"mean_span", r.value.span},
                        {"delta_iq", r.delta.iq},
                        {"delta_rc", r.delta.rc},
                        {"delta_span", r.delta.span},
                        {"pct_iq", opt(r.pct_iq)},
                        {"pct_rc", opt(r.pct_rc)},
                        {"pct_span", opt(r.pct_span)}});
    }
    return {{"base_run_id", report.base_run_id}, {"rows", rows}};
}

std::string render_side_by_side(const std::vector<fs::path>& run_dirs, const std::string& base_run_id) {
    struct RunView {
        std::string run_id;
        std::string mode;
        std::map<std::string, SampleRecord> samples;
        fs::path dir;
    };
    std::vector<RunView> runs;
    std::optional<CorpusManifest> manifest;
    for (const auto& dir : run_dirs) {
        const json cfg = read_json(dir / "run_config.json");
        RunView v{cfg.at("run_id").get<std::string>(), cfg.at("identity").value("mode", ""), {}, dir};
        if (!manifest) {
            try {
                manifest = load_manifest(cfg.at("manifest_path").get<std::string>());
            } catch (const std::exception& e) {
                spdlog::warn("side-by-side without references: {}", e.what());
            }
        }
        for (auto& s : load_run_samples(dir, manifest ? &*manifest : nullptr)) v.samples.emplace(s.sample_id, s);
        runs.push_back(std::move(v));
    }
    std::stable_partition(runs.begin(), runs.end(), [&](const auto& r) { return r.run_id == base_run_id; });

    std::vector<std::string> ids;
    if (manifest) {
        for (const auto& s : manifest->samples) ids.push_back(s.id);
    } else if (!runs.empty()) {
        for (const auto& [id, _] : runs.front().samples) ids.push_back(id);
    }

    std::string out = "# Side-by-side summaries\n\nBase run: `" + base_run_id + "`\n";
    for (const auto& id : ids) {
        out += "\n## " + id + "\n";
        if (manifest) {
            if (const auto* s = manifest->find(id)) {
                out += "\n**" + s->title + "** (" + std::string(to_string(s->chart_type)) + ", " + s->domain_label +
                       ")\n\n**Reference**\n\n" + s->reference_summary + "\n";
            }
        }
        for (const auto& run : runs) {
            out += "\n**" + run.run_id + "** (" + run.mode + ")";
            const auto eval_file = eval_path(run.dir, id);
            if (fs::exists(eval_file)) {
                try {
                    const auto e = sample_evaluation_from_json(read_json(eval_file));
                    out += fmt::format(" IQ {} | ID-RC {:.2f} | ID-Span {:.2f}", e.quality.score, e.diversity.rc,
                                       e.diversity.span);
                } catch (const std::exception&) {
                }
            }
            out += "\n\n";
            auto it = run.samples.find(id);
            if (it == run.samples.end()) out += "_not run_\n";
            else if (!it->second.ok) out += "_failed: " + it->second.error_kind + " " + it->second.error_message + "_\n";
            else out += it->second.summary->narrative + "\n";
        }
    }
    return out;
}

}  // namespace ciaf
