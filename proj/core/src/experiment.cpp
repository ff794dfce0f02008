#include "longtail/experiment.hpp"

#include "longtail/report.hpp"
#include "longtail/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

namespace longtail {

std::string_view to_string(Method method)
{
    switch (method) {
    case Method::joint: return "joint";
    case Method::crt: return "crt";
    case Method::ncm: return "ncm";
    case Method::tau: return "tau";
    case Method::lws: return "lws";
    case Method::learn_tau: return "learn_tau";
    }
    return "?";
}

Method parse_method(std::string_view text)
{
    if (text == "learn-tau") {
        return Method::learn_tau;
    }
    for (auto m : {Method::joint, Method::crt, Method::ncm, Method::tau, Method::lws,
                   Method::learn_tau}) {
        if (text == to_string(m)) {
            return m;
        }
    }
    throw Error("unknown method '" + std::string(text)
                + "' (expected joint | crt | ncm | tau | lws | learn_tau)");
}

TrainConfig ExperimentConfig::default_stage_two()
{
    TrainConfig config;
    config.epochs = 10;
    return config;
}

void ExperimentConfig::validate() const
{
    if (methods.empty()) {
        throw Error("experiment: at least one method is required");
    }
    if (samplers.empty()) {
        throw Error("experiment: at least one sampler is required");
    }
    if (seeds.empty()) {
        throw Error("experiment: at least one seed is required");
    }
    if (tau_grid.empty() || sweep_grid.empty()) {
        throw Error("experiment: tau grids must be non-empty");
    }
    if (train_file.empty()) {
        synthetic.validate();
    } else if (test_file.empty()) {
        throw Error("experiment: test_file is required with train_file");
    }
    if (few_threshold < 1 || many_threshold < few_threshold) {
        throw Error("experiment: need many_threshold >= few_threshold >= 1");
    }
    stage_one.validate();
    stage_two.validate();
    for (int w : hidden) {
        if (w < 1) {
            throw Error("experiment: hidden widths must be positive");
        }
    }
}

namespace {

std::string join(const std::vector<std::string>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += items[i];
    }
    return out;
}

template <typename T, typename F>
std::string join_as(const std::vector<T>& items, F&& format)
{
    std::vector<std::string> text;
    for (const auto& item : items) {
        text.push_back(std::string(format(item)));
    }
    return join(text);
}

std::string grid_text(const std::vector<double>& grid)
{
    return join_as(grid, [](double v) { return format_real(v); });
}

void read_train_config(KeyValueConfig& kv, const std::string& prefix, TrainConfig& config)
{
    config.epochs = static_cast<int>(kv.get_int(prefix + "epochs", config.epochs));
    config.batch_size = static_cast<int>(kv.get_int(prefix + "batch_size", config.batch_size));
    config.lr0 = kv.get_real(prefix + "lr", config.lr0);
    config.momentum = kv.get_real(prefix + "momentum", config.momentum);
    config.weight_decay = kv.get_real(prefix + "weight_decay", config.weight_decay);
}

void write_train_config(std::vector<std::pair<std::string, std::string>>& out,
                        const std::string& prefix, const TrainConfig& config)
{
    out.emplace_back(prefix + "epochs", std::to_string(config.epochs));
    out.emplace_back(prefix + "batch_size", std::to_string(config.batch_size));
    out.emplace_back(prefix + "lr", format_real(config.lr0));
    out.emplace_back(prefix + "momentum", format_real(config.momentum));
    out.emplace_back(prefix + "weight_decay", format_real(config.weight_decay));
}

} // namespace

std::vector<double> parse_tau_grid(const std::string& text)
{
    if (text.find(':') != std::string::npos) {
        std::istringstream in(text);
        double lo = 0.0;
        double hi = 0.0;
        double step = 0.0;
        char c1 = 0;
        char c2 = 0;
        if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':') {
            throw Error("bad grid '" + text + "', expected lo:hi:step");
        }
        return tau_grid(lo, hi, step);
    }
    std::vector<double> grid;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            grid.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error("bad grid value '" + item + "'");
        }
    }
    return grid;
}

SyntheticSpec synthetic_spec_from(KeyValueConfig& kv)
{
    SyntheticSpec spec;
    spec.num_classes = static_cast<int>(kv.get_int("classes", spec.num_classes));
    const auto n_max = kv.get_int("n_max", static_cast<long long>(spec.n_max));
    const auto n_min = kv.get_int("n_min", static_cast<long long>(spec.n_min));
    if (n_max < 0 || n_min < 0) {
        throw Error("synthetic spec: counts must be non-negative");
    }
    spec.n_max = static_cast<std::size_t>(n_max);
    spec.n_min = static_cast<std::size_t>(n_min);
    spec.decay = parse_decay(kv.get_string("decay", std::string(to_string(spec.decay))));
    spec.dim = static_cast<int>(kv.get_int("dim", spec.dim));
    spec.class_separation = kv.get_real("class_separation", spec.class_separation);
    spec.val_per_class = kv.get_uint("val_per_class", spec.val_per_class);
    spec.test_per_class = kv.get_uint("test_per_class", spec.test_per_class);
    spec.seed = kv.get_uint("seed", spec.seed);
    return spec;
}

ExperimentConfig experiment_config_from(KeyValueConfig& kv)
{
    ExperimentConfig config;
    config.train_file = kv.get_string("train_file", "");
    config.val_file = kv.get_string("val_file", "");
    config.test_file = kv.get_string("test_file", "");

    auto& spec = config.synthetic;
    spec.num_classes = static_cast<int>(kv.get_int("classes", spec.num_classes));
    spec.n_max = kv.get_uint("n_max", spec.n_max);
    spec.n_min = kv.get_uint("n_min", spec.n_min);
    spec.decay = parse_decay(kv.get_string("decay", std::string(to_string(spec.decay))));
    spec.dim = static_cast<int>(kv.get_int("dim", spec.dim));
    spec.class_separation = kv.get_real("class_separation", spec.class_separation);
    spec.val_per_class = kv.get_uint("val_per_class", spec.val_per_class);
    spec.test_per_class = kv.get_uint("test_per_class", spec.test_per_class);

    config.many_threshold = kv.get_uint("many_threshold", config.many_threshold);
    config.few_threshold = kv.get_uint("few_threshold", config.few_threshold);

    const auto samplers = kv.get_list(
        "samplers", {"instance", "class", "sqrt", "progressive"});
    config.samplers.clear();
    for (const auto& s : samplers) {
        config.samplers.push_back(parse_sampler(s));
    }
    read_train_config(kv, "", config.stage_one);
    config.stage_one.loss.kind = parse_loss(kv.get_string("loss", "ce"));
    config.stage_one.loss.gamma = kv.get_real("focal_gamma", config.stage_one.loss.gamma);
    config.stage_one.loss.beta = kv.get_real("cb_beta", config.stage_one.loss.beta);
    config.stage_one.loss.max_margin =
        kv.get_real("ldam_max_margin", config.stage_one.loss.max_margin);
    config.hidden.clear();
    for (const auto& w : kv.get_list("hidden", {})) {
        try {
            config.hidden.push_back(std::stoi(w));
        } catch (const std::exception&) {
            throw Error("hidden: bad width '" + w + "'");
        }
    }

    const auto methods = kv.get_list("methods", {"joint", "crt", "ncm", "tau", "lws"});
    config.methods.clear();
    for (const auto& m : methods) {
        config.methods.push_back(parse_method(m));
    }
    read_train_config(kv, "stage2_", config.stage_two);
    config.ncm_metric = parse_ncm_metric(kv.get_string("ncm_metric", "cosine"));
    if (kv.contains("tau_grid")) {
        config.tau_grid = parse_tau_grid(kv.get_string("tau_grid", ""));
    }
    if (kv.contains("sweep_grid")) {
        config.sweep_grid = parse_tau_grid(kv.get_string("sweep_grid", ""));
    }
    config.learn_tau.epochs =
        static_cast<int>(kv.get_int("learn_tau_epochs", config.learn_tau.epochs));
    config.learn_tau.lr0 = kv.get_real("learn_tau_lr", config.learn_tau.lr0);
    config.learn_tau.init = kv.get_real("learn_tau_init", config.learn_tau.init);
    config.learn_tau.batch_size =
        static_cast<int>(kv.get_int("learn_tau_batch_size", config.learn_tau.batch_size));

    const auto seeds = kv.get_list("seeds", {"0", "1", "2", "3", "4"});
    config.seeds.clear();
    for (const auto& s : seeds) {
        try {
            config.seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
            throw Error("seeds: bad seed '" + s + "'");
        }
    }
    config.output_dir = kv.get_string("output_dir", config.output_dir.string());
    config.threads = static_cast<int>(kv.get_int("threads", config.threads));
    kv.reject_unknown();
    config.validate();
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    auto kv = KeyValueConfig::load(path);
    return experiment_config_from(kv);
}

std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& config)
{
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("train_file", config.train_file.string());
    out.emplace_back("val_file", config.val_file.string());
    out.emplace_back("test_file", config.test_file.string());
    const auto& spec = config.synthetic;
    out.emplace_back("classes", std::to_string(spec.num_classes));
    out.emplace_back("n_max", std::to_string(spec.n_max));
    out.emplace_back("n_min", std::to_string(spec.n_min));
    out.emplace_back("decay", std::string(to_string(spec.decay)));
    out.emplace_back("dim", std::to_string(spec.dim));
    out.emplace_back("class_separation", format_real(spec.class_separation));
    out.emplace_back("val_per_class", std::to_string(spec.val_per_class));
    out.emplace_back("test_per_class", std::to_string(spec.test_per_class));
    out.emplace_back("many_threshold", std::to_string(config.many_threshold));
    out.emplace_back("few_threshold", std::to_string(config.few_threshold));
    out.emplace_back("samplers",
                     join_as(config.samplers, [](SamplerKind k) { return to_string(k); }));
    write_train_config(out, "", config.stage_one);
    out.emplace_back("loss", std::string(to_string(config.stage_one.loss.kind)));
    out.emplace_back("focal_gamma", format_real(config.stage_one.loss.gamma));
    out.emplace_back("cb_beta", format_real(config.stage_one.loss.beta));
    out.emplace_back("ldam_max_margin", format_real(config.stage_one.loss.max_margin));
    out.emplace_back("hidden", join_as(config.hidden, [](int w) { return std::to_string(w); }));
    out.emplace_back("methods", join_as(config.methods, [](Method m) { return to_string(m); }));
    write_train_config(out, "stage2_", config.stage_two);
    out.emplace_back("ncm_metric", std::string(to_string(config.ncm_metric)));
    out.emplace_back("tau_grid", grid_text(config.tau_grid));
    out.emplace_back("sweep_grid", grid_text(config.sweep_grid));
    out.emplace_back("learn_tau_epochs", std::to_string(config.learn_tau.epochs));
    out.emplace_back("learn_tau_lr", format_real(config.learn_tau.lr0));
    out.emplace_back("learn_tau_init", format_real(config.learn_tau.init));
    out.emplace_back("learn_tau_batch_size", std::to_string(config.learn_tau.batch_size));
    out.emplace_back("seeds",
                     join_as(config.seeds, [](std::uint64_t s) { return std::to_string(s); }));
    out.emplace_back("output_dir", config.output_dir.string());
    out.emplace_back("threads", std::to_string(config.threads));
    return out;
}

const MethodResult* SamplerRun::find(Method method) const
{
    for (const auto& m : methods) {
        if (m.method == method) {
            return &m;
        }
    }
    return nullptr;
}

const SamplerRun* ExperimentResult::find(std::uint64_t seed, SamplerKind sampler) const
{
    for (const auto& run : runs) {
        if (run.seed == seed && run.sampler == sampler) {
            return &run;
        }
    }
    return nullptr;
}

namespace {

struct Data {
    Dataset train;
    std::optional<Dataset> val;
    Dataset test;
};

Data load_data(const ExperimentConfig& config, std::uint64_t seed)
{
    if (config.train_file.empty()) {
        auto spec = config.synthetic;
        spec.seed = seed;
        auto splits = generate_longtail(spec);
        std::optional<Dataset> val;
        if (splits.val.size() > 0) {
            val = std::move(splits.val);
        }
        return Data{std::move(splits.train), std::move(val), std::move(splits.test)};
    }
    Data data{load_feature_dataset(config.train_file), std::nullopt,
              load_feature_dataset(config.test_file, true)};
    if (!config.val_file.empty()) {
        data.val = load_feature_dataset(config.val_file, true);
    }
    const auto check = [&](const Dataset& d, const char* name) {
        if (d.num_classes != data.train.num_classes || d.dim() != data.train.dim()) {
            throw Error(std::string(name) + " set shape does not match the training set");
        }
    };
    check(data.test, "test");
    if (data.val) {
        check(*data.val, "val");
    }
    return data;
}

Dataset represent(const ClassifierHead& head, const Dataset& data)
{
    if (head.hidden.empty()) {
        return data;
    }
    return Dataset{head.represent(data.features), data.labels, data.num_classes};
}

std::uint64_t stream_seed(std::uint64_t seed, SamplerKind sampler, Method method)
{
    return derive_seed(seed, static_cast<std::uint64_t>(sampler) + 1,
                       static_cast<std::uint64_t>(method) + 1);
}

SamplerRun run_cell(const ExperimentConfig& config, std::uint64_t seed, SamplerKind sampler)
{
    SamplerRun run;
    run.seed = seed;
    run.sampler = sampler;
    std::string data_error;
    std::optional<Data> data;
    try {
        data = load_data(config, seed);
        run.profile = class_profile(data->train, config.many_threshold, config.few_threshold);
    } catch (const std::exception& e) {
        data_error = std::string("data: ") + e.what();
    }

    std::optional<ClassifierHead> joint;
    std::string joint_error = data_error;
    if (data) {
        try {
            TrainConfig stage_one = config.stage_one;
            stage_one.sampler = SamplingStrategy::from_kind(sampler, stage_one.epochs);
            stage_one.seed = stream_seed(seed, sampler, Method::joint);
            const auto kind = config.hidden.empty() ? HeadKind::linear : HeadKind::mlp;
            auto trained = train_head(data->train, stage_one, kind, config.hidden);
            joint = std::move(trained.head);
            run.history = std::move(trained.history);
        } catch (const std::exception& e) {
            joint_error = std::string("joint training: ") + e.what();
        }
    }

    std::optional<ClassifierHead> crt_head;
    std::optional<ClassifierHead> tau_head;
    std::optional<ClassifierHead> lws_head;
    for (const Method method : config.methods) {
        MethodResult result;
        result.method = method;
        const std::string name(to_string(method));
        if (!joint) {
            result.error = joint_error;
            run.methods.push_back(std::move(result));
            continue;
        }
        try {
            TrainConfig stage_two = config.stage_two;
            stage_two.seed = stream_seed(seed, sampler, method);
            switch (method) {
            case Method::joint:
                result.report = evaluate(*joint, data->test, run.profile, name);
                break;
            case Method::crt:
                crt_head = crt(*joint, data->train, stage_two);
                result.report = evaluate(*crt_head, data->test, run.profile, name);
                break;
            case Method::ncm: {
                const auto ncm = ncm_fit(represent(*joint, data->train), config.ncm_metric);
                result.report = evaluate(ncm, represent(*joint, data->test), run.profile, name);
                break;
            }
            case Method::tau: {
                run.tau_train = select_tau(*joint, data->train, config.tau_grid,
                                           TauObjective::train_class_averaged);
                if (data->val) {
                    run.tau_val = select_tau(*joint, *data->val, config.tau_grid,
                                             TauObjective::val_top1);
                }
                const double chosen = run.tau_val ? run.tau_val->chosen : run.tau_train->chosen;
                tau_head = tau_normalize(*joint, chosen);
                result.tau = chosen;
                result.report = evaluate(*tau_head, data->test, run.profile, name);
                break;
            }
            case Method::lws:
                lws_head = lws_fit(*joint, data->train, stage_two);
                result.report = evaluate(*lws_head, data->test, run.profile, name);
                break;
            case Method::learn_tau: {
                LearnTauConfig learn = config.learn_tau;
                learn.seed = stream_seed(seed, sampler, method);
                run.tau_learned = learn_tau(*joint, data->train, learn);
                result.tau = run.tau_learned;
                result.report = evaluate(tau_normalize(*joint, *run.tau_learned), data->test,
                                         run.profile, name);
                break;
            }
            }
        } catch (const std::exception& e) {
            result.error = e.what();
        }
        run.methods.push_back(std::move(result));
    }

    if (joint) {
        try {
            run.joint_norms = weight_norm_profile(*joint, run.profile);
            run.norm_heads.push_back("joint");
            run.norm_profiles.push_back(*run.joint_norms);
            const std::pair<const char*, const std::optional<ClassifierHead>*> others[] = {
                {"crt", &crt_head}, {"tau", &tau_head}, {"lws", &lws_head}};
            for (const auto& [label, head] : others) {
                if (*head) {
                    run.norm_heads.emplace_back(label);
                    run.norm_profiles.push_back(weight_norm_profile(**head, run.profile));
                }
            }
            run.sweep = tau_sweep(*joint, data->test, run.profile, config.sweep_grid);
        } catch (const std::exception&) {
            // Diagnostics are best effort; a failure here leaves them empty.
            run.sweep.clear();
        }
    }
    return run;
}

std::filesystem::path seed_dir(const ExperimentConfig& config, std::uint64_t seed)
{
    return config.output_dir / ("seed_" + std::to_string(seed));
}

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

void write_run_files(const ExperimentConfig& config, const SamplerRun& run)
{
    const auto dir = seed_dir(config, run.seed);
    const std::string sampler(to_string(run.sampler));
    std::filesystem::create_directories(dir / "reports");
    const ReportContext context{sampler, std::to_string(run.seed)};
    for (const auto& m : run.methods) {
        if (m.report) {
            auto out = open_output(dir / "reports" / (sampler + "__" + std::string(to_string(m.method)) + ".csv"));
            write_report_csv(*m.report, context, out);
        }
    }
    if (!run.history.empty()) {
        auto out = open_output(dir / ("history_" + sampler + ".csv"));
        write_history_csv(run.history, out);
    }
    if (!run.norm_profiles.empty()) {
        auto out = open_output(dir / ("weight_norms_" + sampler + ".csv"));
        write_norms_csv(run.profile, run.norm_heads, run.norm_profiles, out);
    }
    if (!run.sweep.empty()) {
        auto out = open_output(dir / ("tau_sweep_" + sampler + ".csv"));
        write_sweep_csv(run.sweep, out);
    }
}

nlohmann::ordered_json config_json(const ExperimentConfig& config)
{
    nlohmann::ordered_json json = nlohmann::ordered_json::object();
    for (const auto& [key, value] : to_key_values(config)) {
        if (key != "seeds" && key != "output_dir" && key != "threads") {
            json[key] = value;
        }
    }
    return json;
}

nlohmann::ordered_json versions_json()
{
    nlohmann::ordered_json json;
    json["longtail"] = LONGTAIL_VERSION;
    json["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION)
                    + "." + std::to_string(EIGEN_MINOR_VERSION);
    json["compiler"] = __VERSION__;
    return json;
}

void write_seed_manifest(const ExperimentConfig& config, std::uint64_t seed)
{
    nlohmann::ordered_json manifest;
    manifest["config"] = config_json(config);
    manifest["seed"] = seed;
    manifest["versions"] = versions_json();
    std::filesystem::create_directories(seed_dir(config, seed));
    auto out = open_output(seed_dir(config, seed) / "manifest.json");
    out << manifest.dump(2) << '\n';
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream out;
    out << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::optional<double> median(std::vector<double> values)
{
    if (values.empty()) {
        return std::nullopt;
    }
    std::sort(values.begin(), values.end());
    const auto mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

void write_summaries(const ExperimentConfig& config, const ExperimentResult& result)
{
    {
        auto out = open_output(config.output_dir / "summary.csv");
        CsvWriter csv(out);
        csv.row({"seed", "sampler", "method", "many", "medium", "few", "all", "tau", "status"});
        for (const auto& run : result.runs) {
            for (const auto& m : run.methods) {
                const auto& r = m.report;
                csv.row({std::to_string(run.seed), to_string(run.sampler), to_string(m.method),
                         r ? format_percent(r->top1(Split::many)) : "",
                         r ? format_percent(r->top1(Split::medium)) : "",
                         r ? format_percent(r->top1(Split::few)) : "",
                         r ? format_percent(r->top1_all()) : "",
                         m.tau ? format_real(*m.tau) : "", m.error.empty() ? "ok" : "failed"});
            }
        }
    }

    bool any_failure = false;
    std::ostringstream failures;
    {
        CsvWriter csv(failures);
        csv.row({"seed", "sampler", "method", "error"});
        for (const auto& run : result.runs) {
            for (const auto& m : run.methods) {
                if (!m.error.empty()) {
                    any_failure = true;
                    csv.row({std::to_string(run.seed), to_string(run.sampler),
                             to_string(m.method), m.error});
                }
            }
        }
    }
    if (any_failure) {
        auto out = open_output(config.output_dir / "failures.csv");
        out << failures.str();
    }

    auto out = open_output(config.output_dir / "summary.md");
    out << "# Long-tail experiment summary\n\n";
    out << "Top-1 accuracy (%) on the test set, median over " << config.seeds.size()
        << " seed(s). Many/Medium/Few split by training count (> " << config.many_threshold
        << ", " << config.few_threshold << "-" << config.many_threshold << ", < "
        << config.few_threshold << ").\n\n";
    out << "| Method | Sampler | Many | Medium | Few | All | Runs ok |\n";
    out << "|---|---|---:|---:|---:|---:|---:|\n";
    for (const Method method : config.methods) {
        for (const SamplerKind sampler : config.samplers) {
            std::vector<double> many;
            std::vector<double> medium;
            std::vector<double> few;
            std::vector<double> all;
            std::size_t ok = 0;
            for (const auto& run : result.runs) {
                if (run.sampler != sampler) {
                    continue;
                }
                const auto* m = run.find(method);
                if (m == nullptr || !m->report) {
                    continue;
                }
                ++ok;
                const auto& r = *m->report;
                if (auto v = r.top1(Split::many)) {
                    many.push_back(*v);
                }
                if (auto v = r.top1(Split::medium)) {
                    medium.push_back(*v);
                }
                if (auto v = r.top1(Split::few)) {
                    few.push_back(*v);
                }
                all.push_back(r.top1_all());
            }
            const auto cell = [](std::optional<double> v) {
                return v ? format_percent(v) : std::string("-");
            };
            out << "| " << to_string(method) << " | " << to_string(sampler) << " | "
                << cell(median(many)) << " | " << cell(median(medium)) << " | "
                << cell(median(few)) << " | " << cell(median(all)) << " | " << ok << "/"
                << config.seeds.size() << " |\n";
        }
    }
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config)
{
    config.validate();
    std::filesystem::create_directories(config.output_dir);
    for (const auto seed : config.seeds) {
        write_seed_manifest(config, seed);
    }

    std::vector<std::pair<std::uint64_t, SamplerKind>> cells;
    for (const auto seed : config.seeds) {
        for (const auto sampler : config.samplers) {
            cells.emplace_back(seed, sampler);
        }
    }
    ExperimentResult result;
    result.runs.resize(cells.size());

    unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                          : std::max(1U, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            result.runs[i] = run_cell(config, cells[i].first, cells[i].second);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }

    for (const auto& run : result.runs) {
        write_run_files(config, run);
    }
    write_summaries(config, result);

    nlohmann::ordered_json manifest;
    manifest["config"] = config_json(config);
    manifest["seeds"] = config.seeds;
    manifest["versions"] = versions_json();
    manifest["created_utc"] = utc_timestamp();
    auto out = open_output(config.output_dir / "run_manifest.json");
    out << manifest.dump(2) << '\n';
    return result;
}

} // namespace longtail
