// ciaf: run the chart insight pipeline over a corpus, evaluate runs and
// compare them.
//
//   ciaf run --manifest <path> --mode <pipeline|baseline|ablate-planner|ablate-extractor>
//            --out <dir> [--mock] [--workers N] [--prompt-set ID]
//   ciaf eval --run <dir> [--mock]
//   ciaf report --runs <dir...> --base <run_id> [--out <dir>]
//
// Settings resolve as flags > environment > --config file > defaults.
// Exit codes: 0 success, 1 usage error, 2 completed with sample failures,
// 3 fatal error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ciaf/bench.hpp"
#include "ciaf/error.hpp"
#include "ciaf/mock_backend.hpp"
#include "ciaf/remote_backend.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSampleFailures = 2;
constexpr int kExitFatal = 3;

struct CommonFlags {
    std::string config_file;
    bool mock = false;
    std::string mock_script;
    std::string prompts_dir;
    std::string cache_dir;
    bool no_cache = false;
    bool cache_all = false;
    int max_in_flight = 0;
    bool verbose = false;
    bool quiet = false;
};

/// Looks a setting up as flag, then environment variable, then config file.
class Settings {
public:
    explicit Settings(const std::string& config_file) {
        if (config_file.empty()) return;
        std::ifstream in(config_file);
        if (!in) throw ciaf::IoError("cannot read config file " + config_file);
        try {
            file_ = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ciaf::InvalidArgument("config file " + config_file + ": " + e.what());
        }
    }

    std::string get(const std::string& flag, const char* env, const char* key, const std::string& fallback = {}) const {
        if (!flag.empty()) return flag;
        if (env) {
            if (const char* v = std::getenv(env); v && *v) return v;
        }
        if (key && file_.contains(key) && file_[key].is_string()) return file_[key].get<std::string>();
        return fallback;
    }

    template <typename T>
    T number(const std::optional<T>& flag, const char* key, T fallback) const {
        if (flag) return *flag;
        if (key && file_.contains(key) && file_[key].is_number()) return file_[key].get<T>();
        return fallback;
    }

    const json& file() const { return file_; }

private:
    json file_ = json::object();
};

void setup_logging(const CommonFlags& flags) {
    auto logger = spdlog::stderr_color_mt("ciaf");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_level(flags.verbose ? spdlog::level::debug : flags.quiet ? spdlog::level::warn : spdlog::level::info);
}

std::unique_ptr<ciaf::Gateway> make_gateway(const CommonFlags& flags, const Settings& settings,
                                            const fs::path& default_cache, bool judge) {
    ciaf::GatewayOptions opts;
    std::shared_ptr<ciaf::Backend> backend;

    if (flags.mock) {
        const auto script =
            settings.get(flags.mock_script, "CIAF_MOCK_SCRIPT", "mock_script", CIAF_DEFAULT_MOCK_SCRIPT);
        backend = ciaf::load_mock_script(script);
        opts.retry.initial_backoff = std::chrono::milliseconds(0);
        spdlog::info("mock backend from {}", script);
    } else {
        ciaf::RemoteConfig rc;
        rc.base_url = settings.get({}, "CIAF_API_BASE", "api_base");
        rc.api_key = settings.get({}, "CIAF_API_KEY", "api_key");
        rc.timeout = std::chrono::seconds(settings.number<long>(std::nullopt, "timeout_s", 120));
        if (rc.base_url.empty()) {
            throw ciaf::InvalidArgument("no backend configured: set CIAF_API_BASE (or api_base) or pass --mock");
        }
        backend = std::make_shared<ciaf::RemoteBackend>(rc);
    }

    const auto chat_model = settings.get({}, "CIAF_CHAT_MODEL", "chat_model", flags.mock ? "mock-chat" : "");
    opts.chat_model = judge ? settings.get({}, "CIAF_JUDGE_MODEL", "judge_model", chat_model) : chat_model;
    opts.embed_model = settings.get({}, "CIAF_EMBED_MODEL", "embed_model", flags.mock ? "mock-embed" : "");
    if (opts.chat_model.empty()) throw ciaf::InvalidArgument("no chat model: set CIAF_CHAT_MODEL (or chat_model)");
    if (judge && opts.embed_model.empty()) {
        throw ciaf::InvalidArgument("no embedding model: set CIAF_EMBED_MODEL (or embed_model)");
    }

    opts.max_in_flight = flags.max_in_flight > 0 ? flags.max_in_flight
                                                 : settings.number<int>(std::nullopt, "max_in_flight", 4);
    opts.retry.max_retries = settings.number<int>(std::nullopt, "max_retries", 2);
    opts.cache_all = flags.cache_all || settings.file().value("cache_all", false);
    if (!flags.no_cache) opts.cache_dir = settings.get(flags.cache_dir, "CIAF_CACHE_DIR", "cache_dir", default_cache);
    return std::make_unique<ciaf::Gateway>(std::move(backend), std::move(opts));
}

fs::path prompts_root(const CommonFlags& flags, const Settings& settings) {
    return settings.get(flags.prompts_dir, "CIAF_PROMPTS_DIR", "prompts_dir", CIAF_DEFAULT_PROMPTS_DIR);
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_file, "JSON settings file");
    cmd->add_flag("--mock", flags.mock, "use the scripted mock backend");
    cmd->add_option("--mock-script", flags.mock_script, "mock script (default: bundled fixture script)");
    cmd->add_option("--prompts-dir", flags.prompts_dir, "root directory of prompt sets");
    cmd->add_option("--cache-dir", flags.cache_dir, "response cache directory");
    cmd->add_flag("--no-cache", flags.no_cache, "disable the response cache");
    cmd->add_flag("--cache-all", flags.cache_all, "cache sampled (temperature > 0) responses too");
    cmd->add_option("--max-in-flight", flags.max_in_flight, "concurrent backend requests (default 4)");
    cmd->add_flag("-v,--verbose", flags.verbose);
    cmd->add_flag("-q,--quiet", flags.quiet);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chart insight agent flow: generate, evaluate and compare chart summaries"};
    app.require_subcommand(1);

    CommonFlags flags;

    std::string manifest, mode_name, out_dir, prompt_set, run_id;
    std::optional<std::size_t> workers, limit, max_perspectives;
    auto* run = app.add_subcommand("run", "run a mode over every sample of a manifest");
    run->add_option("--manifest", manifest, "line-delimited corpus manifest")->required();
    run->add_option("--mode", mode_name, "pipeline | baseline | ablate-planner | ablate-extractor")->required();
    run->add_option("--out", out_dir, "output directory; the run lands in <out>/<run_id>")->required();
    run->add_option("--workers", workers, "samples processed in parallel (default 1)");
    run->add_option("--prompt-set", prompt_set, "prompt set id (default: default)");
    run->add_option("--run-id", run_id, "explicit run id (default: derived from the configuration)");
    run->add_option("--max-perspectives", max_perspectives, "planner perspective cap (default 8)");
    run->add_option("--limit", limit, "stop after this many samples without finishing the run");
    add_common(run, flags);

    std::string eval_run;
    std::optional<std::size_t> eval_workers;
    auto* eval = app.add_subcommand("eval", "evaluate a finished run");
    eval->add_option("--run", eval_run, "run directory")->required();
    eval->add_option("--workers", eval_workers, "samples evaluated in parallel (default 1)");
    add_common(eval, flags);

    std::vector<std::string> report_runs;
    std::string base, report_out;
    auto* report = app.add_subcommand("report", "compare evaluated runs against a base run");
    report->add_option("--runs", report_runs, "run directories")->required();
    report->add_option("--base", base, "run id of the base run")->required();
    report->add_option("--out", report_out, "where to write report files (default: parent of the first run)");
    add_common(report, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    setup_logging(flags);

    try {
        const Settings settings(flags.config_file);

        if (run->parsed()) {
            auto mode = ciaf::parse_run_mode(mode_name);
            if (!mode) {
                std::cerr << "unknown --mode '" << mode_name << "'\n";
                return kExitUsage;
            }
            ciaf::RunOptions opts;
            opts.manifest = manifest;
            opts.mode = *mode;
            opts.out_dir = out_dir;
            opts.prompts_root = prompts_root(flags, settings);
            opts.workers = settings.number<std::size_t>(workers, "workers", 1);
            opts.sample_limit = limit;
            if (!run_id.empty()) opts.run_id = run_id;

            ciaf::PipelineConfig config;
            if (auto t = settings.file().find("pipeline"); t != settings.file().end()) {
                config = ciaf::config_from_json(*t);
            }
            config.prompt_set_id = settings.get(prompt_set, "CIAF_PROMPT_SET", "prompt_set", config.prompt_set_id);
            config.max_perspectives = settings.number<std::size_t>(max_perspectives, "max_perspectives",
                                                                   config.max_perspectives);
            if (flags.mock) config = config.deterministic();
            opts.config = config;

            auto gateway = make_gateway(flags, settings, fs::path(out_dir) / ".cache", false);
            const auto result = ciaf::cmd_run(opts, *gateway);
            if (!result.complete) {
                std::cout << "run " << result.run_dir.string() << " stopped after " << result.executed
                          << " samples; rerun the same command to resume\n";
                return kExitOk;
            }
            const auto failures = result.record.failures();
            std::cout << "run " << result.record.run_id << ": " << result.record.samples.size() - failures << "/"
                      << result.record.samples.size() << " samples ok (" << result.executed << " executed, "
                      << result.skipped << " reused) -> " << result.run_dir.string() << "\n";
            return failures == 0 ? kExitOk : kExitSampleFailures;
        }

        if (eval->parsed()) {
            const fs::path run_dir = eval_run;
            auto gateway = make_gateway(flags, settings, run_dir.parent_path() / ".cache", true);
            const auto outcome = ciaf::cmd_eval(run_dir, *gateway, prompts_root(flags, settings),
                                                settings.number<std::size_t>(eval_workers, "workers", 1));
            std::ifstream table(run_dir / "eval.txt");
            std::cout << table.rdbuf();
            const bool failures = !outcome.failures.empty() || outcome.skipped_failed_runs > 0;
            return failures ? kExitSampleFailures : kExitOk;
        }

        if (report->parsed()) {
            std::vector<fs::path> dirs(report_runs.begin(), report_runs.end());
            const auto comparison = ciaf::cmd_report(dirs, base);
            const fs::path out = report_out.empty() ? dirs.front().parent_path() : fs::path(report_out);
            const auto table = ciaf::render_table(comparison);
            ciaf::write_text_atomic(out / "report.txt", table);
            ciaf::write_text_atomic(out / "report.json", ciaf::to_json(comparison).dump(2) + "\n");
            ciaf::write_text_atomic(out / "side_by_side.md", ciaf::render_side_by_side(dirs, base));
            std::cout << table << "\nwritten to " << out.string() << "\n";
            return kExitOk;
        }
    } catch (const ciaf::InvalidArgument& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitFatal;
    }
    return kExitUsage;
}
