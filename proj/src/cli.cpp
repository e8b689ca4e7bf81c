#include "ssr/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace ssr {

namespace {

// Reads typed members of one JSON object and rejects members nobody asked for.
class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& dst)
    {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        read(obj_.at(key), child(key), dst);
    }

    void allow(const char* key) { seen_.insert(key); }

    void finish() const
    {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(child(it.key().c_str()) + ": unknown field");
    }

    std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    static void read(const json& v, const std::string& path, double& dst)
    {
        if (!v.is_number()) throw ConfigError(path + ": expected a number");
        dst = v.get<double>();
        if (!std::isfinite(dst)) throw ConfigError(path + ": must be finite");
    }
    static void read(const json& v, const std::string& path, bool& dst)
    {
        if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
        dst = v.get<bool>();
    }
    static void read(const json& v, const std::string& path, std::string& dst)
    {
        if (!v.is_string()) throw ConfigError(path + ": expected a string");
        dst = v.get<std::string>();
    }
    static void read(const json& v, const std::string& path, std::uint64_t& dst)
    {
        if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
        dst = v.get<std::uint64_t>();
    }
    template <typename I>
        requires std::is_integral_v<I> && std::is_signed_v<I>
    static void read(const json& v, const std::string& path, I& dst)
    {
        if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
        const auto raw = v.get<std::int64_t>();
        if (raw < std::numeric_limits<I>::min() || raw > std::numeric_limits<I>::max())
            throw ConfigError(path + ": integer out of range");
        dst = static_cast<I>(raw);
    }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const char* what)
{
    if (!ok) throw ConfigError(path + ": " + what);
}

bool safe_name(const std::string& name)
{
    if (name.empty() || name == "." || name == "..") return false;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

RunConfig parse_run(const json& j, const std::string& path, Index experts)
{
    Fields f(j, path);
    RunConfig run;
    RouterConfig& r = run.router;
    std::string cost = to_string(r.cost_mode);
    std::string mode = to_string(r.mode);
    std::string force;
    std::string regularizer = to_string(run.regularizer);
    std::uint64_t seed = 0;
    const bool has_seed = j.is_object() && j.contains("seed");

    f.get("name", run.name);
    f.get("p", r.p);
    f.get("xi", r.xi);
    f.get("delta", r.delta);
    f.get("eta", r.eta);
    f.get("k", r.k);
    f.get("cost", cost);
    f.get("alpha_noise", r.alpha_noise);
    f.get("sigma", r.sigma);
    f.get("mode", mode);
    f.get("force_branch", force);
    f.get("stabilized", r.stabilized);
    f.get("regularizer", regularizer);
    f.get("coefficient", run.coefficient);
    f.get("gate_init_std", run.gate_init_std);
    f.get("seed", seed);
    f.finish();

    require(safe_name(run.name), f.child("name"), "required; letters, digits, '_', '-' and '.' only");
    try {
        r.cost_mode = parse_cost_mode(cost);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(f.child("cost") + ": " + e.what());
    }
    try {
        r.mode = parse_router_mode(mode);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(f.child("mode") + ": " + e.what());
    }
    if (!force.empty()) {
        try {
            r.branch_override = parse_branch_override(force);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(f.child("force_branch") + ": " + e.what());
        }
    }
    try {
        run.regularizer = parse_regularizer(regularizer);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(f.child("regularizer") + ": " + e.what());
    }
    require(run.coefficient >= 0.0, f.child("coefficient"), "must be >= 0");
    require(run.gate_init_std > 0.0, f.child("gate_init_std"), "must be > 0");
    if (has_seed) run.seed = seed;
    try {
        validate(r, experts);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return run;
}

std::filesystem::path output_dir(const ExperimentConfig& config)
{
    if (const char* env = std::getenv("SSR_OUTPUT_DIR"); env && *env) return env;
    return config.output_dir;
}

std::uint64_t run_seed(const ExperimentConfig& config, const RunConfig& run)
{
    return run.seed.value_or(config.seed);
}

std::string fixed(double v, int digits)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

// Shared front half of train and bench: load, parse, report.
std::optional<ExperimentConfig> load_config(const std::string& path, std::ostream& err)
{
    try {
        return parse_experiment_config_text(read_text_file(path));
    } catch (const ConfigError& e) {
        err << "config error: " << path << ": " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
    }
    return std::nullopt;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc)
{
    ExperimentConfig cfg;
    Fields root(doc, "");
    root.get("seed", cfg.seed);
    root.get("output_dir", cfg.output_dir);
    root.allow("task");
    root.allow("bench");
    root.allow("routers");
    root.finish();

    if (doc.contains("task")) {
        TaskConfig& t = cfg.task;
        Fields f(doc.at("task"), "task");
        f.get("clusters", t.clusters);
        f.get("d", t.d);
        f.get("tokens", t.tokens);
        f.get("steps", t.steps);
        f.get("learning_rate", t.learning_rate);
        f.get("batch_size", t.batch_size);
        f.get("experts", t.experts);
        f.get("hidden", t.hidden);
        f.get("cluster_std", t.cluster_std);
        f.get("separation", t.separation);
        f.finish();
        require(t.clusters >= 2, "task.clusters", "must be >= 2");
        require(t.d >= 1, "task.d", "must be >= 1");
        require(t.tokens >= 1, "task.tokens", "must be >= 1");
        require(t.steps >= 1, "task.steps", "must be >= 1");
        require(t.learning_rate >= 0.0, "task.learning_rate", "must be >= 0");
        require(t.batch_size >= 0, "task.batch_size", "must be >= 0");
        require(t.experts >= 2, "task.experts", "must be >= 2");
        require(t.hidden >= 0, "task.hidden", "must be >= 0");
        require(t.cluster_std > 0.0, "task.cluster_std", "must be > 0");
        require(t.separation >= 0.0, "task.separation", "must be >= 0");
    }
    if (doc.contains("bench")) {
        BenchConfig& b = cfg.bench;
        Fields f(doc.at("bench"), "bench");
        f.get("m", b.m);
        f.get("n", b.n);
        f.get("d", b.d);
        f.get("repetitions", b.repetitions);
        f.get("warmup", b.warmup);
        f.finish();
        require(b.m >= 1, "bench.m", "must be >= 1");
        require(b.n >= 2, "bench.n", "must be >= 2");
        require(b.d >= 1, "bench.d", "must be >= 1");
        require(b.repetitions >= 1, "bench.repetitions", "must be >= 1");
        require(b.warmup >= 0, "bench.warmup", "must be >= 0");
    }

    if (!doc.contains("routers")) throw ConfigError("routers: required");
    const json& list = doc.at("routers");
    require(list.is_array(), "routers", "expected an array");
    require(!list.empty(), "routers", "must name at least one router");
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = "routers[" + std::to_string(i) + "]";
        RunConfig run = parse_run(list[i], path, cfg.task.experts);
        if (!names.insert(run.name).second) throw ConfigError(path + ".name: duplicate name '" + run.name + "'");
        cfg.routers.push_back(std::move(run));
    }
    return cfg;
}

ExperimentConfig parse_experiment_config_text(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": invalid JSON");
    }
    return parse_experiment_config(doc);
}

SyntheticTask make_task(const ExperimentConfig& config)
{
    SyntheticOptions opt;
    opt.clusters = config.task.clusters;
    opt.d = config.task.d;
    opt.tokens = config.task.tokens;
    opt.seed = config.seed;
    opt.cluster_std = config.task.cluster_std;
    opt.separation = config.task.separation;
    return make_synthetic_task(opt);
}

RunSummary run_training(const ExperimentConfig& config, const RunConfig& run, const SyntheticTask& task)
{
    const std::uint64_t seed = run_seed(config, run);
    RouterConfig router = run.router;
    router.seed = seed;
    Rng init(seed + 100);
    MoEBlock block =
        MoEBlock::random(config.task.experts, config.task.d, router, init, run.gate_init_std, config.task.hidden);

    TrainOptions opt;
    opt.steps = config.task.steps;
    opt.learning_rate = config.task.learning_rate;
    opt.regularizer = run.regularizer;
    opt.coefficient = run.coefficient;
    opt.batch_size = config.task.batch_size;
    opt.seed = seed + 200;

    RunSummary summary;
    summary.name = run.name;
    const auto start = std::chrono::steady_clock::now();
    try {
        summary.records = train(block, task.batch, opt);
        const Evaluation ev = evaluate(block, task.batch);
        summary.final_loss = ev.loss;
        summary.load_entropy = ev.load.entropy_topk;
        summary.load_cv = ev.load.cv_topk;
        if (!std::isfinite(ev.loss)) {
            summary.failed = true;
            summary.failure = "NaN";
            summary.failed_step = opt.steps;
        }
    } catch (const TrainAborted& e) {
        summary.failed = true;
        summary.failure = e.reason();
        summary.failed_step = e.step();
        summary.records = e.records();
    }
    summary.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

json run_summary_to_json(const RunSummary& s)
{
    json j;
    j["name"] = s.name;
    j["status"] = s.failed ? "failed" : "ok";
    j["failed"] = s.failed ? json(s.failure) : json(nullptr);
    j["failed_step"] = s.failed ? json(s.failed_step) : json(nullptr);
    j["final_loss"] = s.failed ? json(nullptr) : json(s.final_loss);
    j["load_entropy"] = s.failed ? json(nullptr) : json(s.load_entropy);
    j["load_cv"] = s.failed ? json(nullptr) : json(s.load_cv);
    j["steps_completed"] = s.records.size();
    j["wall_time_s"] = s.wall_time_s;
    return j;
}

int cmd_verify(const std::string& filter, const VerifyContext& ctx, std::ostream& out, std::ostream& err)
{
    const std::vector<CheckResult> results = run_verification(ctx, filter);
    if (results.empty()) {
        err << "no verification check matches '" << filter << "'\n";
        return kExitInputError;
    }
    std::size_t width = 5;
    for (const auto& r : results) width = std::max(width, r.name.size());
    out << std::left << std::setw(static_cast<int>(width)) << "check" << "  result  seconds  detail\n";
    const CheckResult* first_failure = nullptr;
    for (const auto& r : results) {
        out << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << (r.passed ? "PASS  " : "FAIL  ")
            << "  " << std::right << std::setw(7) << fixed(r.seconds, 2) << "  " << r.detail << "\n";
        if (!r.passed && !first_failure) first_failure = &r;
    }
    const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
    out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
    if (!first_failure) return kExitOk;
    const json report = {{"check", first_failure->name},
                         {"detail", first_failure->detail},
                         {"counterexample", first_failure->counterexample}};
    out << report.dump() << "\n";
    return kExitVerifyFailed;
}

int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err)
{
    const auto config = load_config(config_path, err);
    if (!config) return kExitInputError;
    const std::filesystem::path dir = output_dir(*config);

    const auto start = std::chrono::steady_clock::now();
    SyntheticTask task;
    try {
        task = make_task(*config);
    } catch (const std::invalid_argument& e) {
        err << "config error: task: " << e.what() << "\n";
        return kExitInputError;
    }

    json runs = json::array();
    out << std::left << std::setw(20) << "run" << "  status  final_loss  entropy  cv      seconds\n";
    for (const RunConfig& run : config->routers) {
        const RunSummary s = run_training(*config, run, task);
        write_text_file(dir / (run.name + ".csv"), train_records_csv(s.records));
        json entry = run_summary_to_json(s);
        entry["csv"] = run.name + ".csv";
        runs.push_back(std::move(entry));
        out << std::left << std::setw(20) << s.name << "  " << (s.failed ? "failed" : "ok    ") << "  ";
        if (s.failed)
            out << s.failure << " at step " << s.failed_step;
        else
            out << std::setw(10) << fixed(s.final_loss, 6) << "  " << fixed(s.load_entropy, 4) << "   "
                << fixed(s.load_cv, 4);
        out << "  " << fixed(s.wall_time_s, 2) << "\n";
    }
    json summary;
    summary["seed"] = config->seed;
    summary["runs"] = std::move(runs);
    summary["total_wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    out << "wrote " << (dir / "summary.json").string() << "\n";
    return kExitOk;
}

int cmd_bench(const std::string& config_path, std::ostream& out, std::ostream& err)
{
    const auto config = load_config(config_path, err);
    if (!config) return kExitInputError;
    const std::filesystem::path dir = output_dir(*config);

    BenchmarkSetup setup;
    setup.m = config->bench.m;
    setup.n = config->bench.n;
    setup.d = config->bench.d;
    setup.repetitions = config->bench.repetitions;
    setup.warmup = config->bench.warmup;
    setup.seed = config->seed;
    if (setup.repetitions < 30)
        err << "warning: " << setup.repetitions << " repetitions; at least 30 are needed for stable means\n";

    std::vector<NamedRouter> routers;
    for (const RunConfig& run : config->routers) {
        RouterConfig r = run.router;
        r.seed = run_seed(*config, run);
        routers.push_back({run.name, r});
    }
    std::vector<BenchmarkRow> rows;
    try {
        rows = overhead_benchmark(routers, setup);
    } catch (const SinkhornOverflow& e) {
        err << "numeric failure: Sinkhorn overflow during benchmark\n";
        out << json{{"error", "overflow"}, {"diagnostics", diagnostics_to_json(e.diagnostics())}}.dump() << "\n";
        return kExitNumericFailure;
    } catch (const std::invalid_argument& e) {
        err << "config error: routers: " << e.what() << "\n";
        return kExitInputError;
    }

    json report;
    report["setup"] = {{"m", setup.m},       {"n", setup.n},         {"d", setup.d},
                       {"repetitions", setup.repetitions}, {"warmup", setup.warmup}, {"groups", setup.groups},
                       {"seed", setup.seed}};
    report["rows"] = json::array();
    out << std::left << std::setw(20) << "config" << "  mean_ms   std_ms    ratio   sinkhorn_calls\n";
    for (const auto& r : rows) {
        report["rows"].push_back({{"config_id", r.config_id},
                                  {"p", r.config.p},
                                  {"xi", r.config.xi},
                                  {"cost_mode", to_string(r.config.cost_mode)},
                                  {"mean_ms", r.mean_ms},
                                  {"std_ms", r.std_ms},
                                  {"standard_error_ms", r.standard_error()},
                                  {"overhead_ratio", r.overhead_ratio},
                                  {"sinkhorn_calls", r.sinkhorn_calls},
                                  {"samples_ms", r.samples_ms}});
        out << std::left << std::setw(20) << r.config_id << "  " << std::setw(8) << fixed(r.mean_ms, 3) << "  "
            << std::setw(8) << fixed(r.std_ms, 3) << "  " << std::setw(6) << fixed(r.overhead_ratio, 3) << "  "
            << r.sinkhorn_calls << "\n";
    }
    write_text_file(dir / "bench.csv", benchmark_csv(rows));
    write_text_file(dir / "bench.json", report.dump(2) + "\n");
    out << "wrote " << (dir / "bench.csv").string() << "\n";
    return kExitOk;
}

int cmd_route(const RouteArgs& args, std::ostream& out, std::ostream& err)
{
    RouterConfig cfg;
    GatingScores scores;
    try {
        cfg.k = args.k;
        cfg.p = args.p;
        cfg.xi = args.xi;
        cfg.delta = args.delta;
        cfg.eta = args.eta;
        cfg.cost_mode = parse_cost_mode(args.cost);
        cfg.alpha_noise = args.alpha_noise;
        cfg.sigma = args.sigma;
        cfg.mode = parse_router_mode(args.mode);
        if (!args.force_branch.empty()) cfg.branch_override = parse_branch_override(args.force_branch);
        cfg.stabilized = !args.naive;
        cfg.seed = args.seed;
        scores.values = matrix_from_csv(read_text_file(args.scores_path));
        validate(cfg, scores.values.cols());
        build_cost(scores, cfg.cost_mode);  // rejects non-finite scores before any randomness is drawn
    } catch (const std::exception& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInputError;
    }

    Rng rng(args.seed);
    SsrOutcome outcome;
    try {
        outcome = ssr_route_detailed(scores, cfg, rng);
    } catch (const SinkhornOverflow& e) {
        err << "numeric failure: Sinkhorn overflow\n";
        out << json{{"error", "overflow"}, {"diagnostics", diagnostics_to_json(e.diagnostics())}}.dump(2) << "\n";
        return kExitNumericFailure;
    }
    json doc = decision_to_json(outcome.decision);
    if (args.plan) {
        doc["plan"] = outcome.sinkhorn ? plan_to_json(outcome.sinkhorn->plan) : json(nullptr);
        doc["diagnostics"] = outcome.sinkhorn ? diagnostics_to_json(outcome.sinkhorn->diagnostics) : json(nullptr);
    }
    out << doc.dump(2) << "\n";
    return kExitOk;
}

}  // namespace ssr
