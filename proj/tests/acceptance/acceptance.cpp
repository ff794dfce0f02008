// Acceptance suite. Prints one line per criterion and exits non-zero if any
// criterion fails. Usage: acceptance [output_dir]

#include "longtail/balancing.hpp"
#include "longtail/evaluation.hpp"
#include "longtail/experiment.hpp"
#include "longtail/head.hpp"
#include "longtail/log.hpp"
#include "longtail/losses.hpp"
#include "longtail/sampling.hpp"

#include "support.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace longtail;
using longtail::testing::numeric_gradient;
using longtail::testing::random_matrix;
using longtail::testing::random_vector;
using longtail::testing::read_file;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int failures = 0;

void verdict(int id, bool pass, const std::string& detail)
{
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << "  " << detail << std::endl;
    if (!pass) {
        ++failures;
    }
}

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buffer[256];
    std::snprintf(buffer, sizeof buffer, pattern, a, b, c, d);
    return buffer;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double norm_relative_error(const Vector& analytic, const Vector& numeric)
{
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
    return (analytic - numeric).norm() / scale;
}

void sampler_fidelity()
{
    const auto start = Clock::now();
    const std::vector<std::size_t> counts{1000, 100, 10};
    const auto data = longtail::testing::blobs(counts, 1, 0.0, 1);
    const EpochSampler sampler(data, SamplingStrategy::instance_balanced(), 11);
    const std::size_t draws = 1000000;
    const boost::math::chi_squared dist(2.0);
    const double critical = boost::math::quantile(boost::math::complement(dist, 0.001));

    bool pass = true;
    double worst_rel = 0.0;
    double worst_chi = 0.0;
    std::uint64_t stream = 0;
    for (double q : {0.0, 0.5, 1.0}) {
        const auto probs = sampling_weights(counts, q);
        const auto indices = sampler.draw(probs, draws, ++stream);
        std::vector<double> observed(3, 0.0);
        for (auto i : indices) {
            observed[static_cast<std::size_t>(data.labels[i])] += 1.0;
        }
        double chi = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double expected = probs[j] * static_cast<double>(draws);
            worst_rel = std::max(worst_rel, std::abs(observed[j] / expected - 1.0));
            chi += (observed[j] - expected) * (observed[j] - expected) / expected;
        }
        worst_chi = std::max(worst_chi, chi);
        pass = pass && indices.size() == draws;
    }
    const double elapsed = seconds_since(start);
    pass = pass && worst_rel <= 0.01 && worst_chi < critical && elapsed < 10.0;
    verdict(1, pass,
            fmt("sampler fidelity: max rel dev %.4f (<= 0.01), max chi2 %.2f (< %.2f), %.2fs (< 10s)",
                worst_rel, worst_chi, critical, elapsed));
}

void progressive_endpoints()
{
    Rng rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> counts(1 + rng.below(50));
        for (auto& c : counts) {
            c = 1 + rng.below(10000);
        }
        const int total = 1 + static_cast<int>(rng.below(200));
        const auto ib = sampling_weights(counts, 1.0);
        const auto cb = sampling_weights(counts, 0.0);
        const auto start = progressive_weights(counts, 0, total);
        const auto end = progressive_weights(counts, total, total);
        for (std::size_t j = 0; j < counts.size(); ++j) {
            worst = std::max({worst, std::abs(start[j] - ib[j]), std::abs(end[j] - cb[j])});
        }
    }
    verdict(2, worst <= 1e-15,
            fmt("progressive endpoints: max abs deviation %.3g (<= 1e-15)", worst));
}

void gradient_oracle()
{
    const auto start = Clock::now();
    Rng rng(3);
    const int instances = 100;
    auto random_case = [&](Vector& z, int& label) {
        const auto c = 2 + static_cast<Eigen::Index>(rng.below(9));
        z = random_vector(rng, c, 2.0);
        label = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    };

    std::vector<std::pair<std::string, double>> worst;
    auto check = [&](const std::string& name,
                     const std::function<LossResult(const Vector&, int)>& loss) {
        double w = 0.0;
        for (int i = 0; i < instances; ++i) {
            Vector z;
            int label = 0;
            random_case(z, label);
            const auto analytic = loss(z, label).grad;
            const auto fd = numeric_gradient([&](const Vector& x) { return loss(x, label).loss; }, z);
            w = std::max(w, norm_relative_error(analytic, fd));
        }
        worst.emplace_back(name, w);
    };

    check("ce", [](const Vector& z, int y) { return softmax_xent(z, y); });
    for (double gamma : {0.5, 1.0, 2.0}) {
        check(fmt("focal%.1f", gamma), [gamma](const Vector& z, int y) { return focal(z, y, gamma); });
    }
    check("ldam", [&](const Vector& z, int y) {
        Rng margin_rng(static_cast<std::uint64_t>(z.size()));
        const Vector margins = random_vector(margin_rng, z.size()).cwiseAbs();
        return ldam(z, y, margins);
    });

    double tau_worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        const auto d = 2 + static_cast<Eigen::Index>(rng.below(8));
        const auto c = 2 + static_cast<Eigen::Index>(rng.below(8));
        const auto n = 1 + static_cast<Eigen::Index>(rng.below(16));
        Matrix weights = random_matrix(rng, d, c);
        for (Eigen::Index j = 0; j < c; ++j) {
            weights.col(j) *= std::exp(rng.normal());
        }
        const RowMatrix features = random_matrix(rng, n, d);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (auto& l : labels) {
            l = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
        }
        const double tau = 1.5 * rng.uniform() - 0.25;
        const double analytic = tau_loss_and_gradient(weights, features, labels, tau).grad;
        const double eps = 1e-5;
        const double fd = (tau_loss_and_gradient(weights, features, labels, tau + eps).loss -
                           tau_loss_and_gradient(weights, features, labels, tau - eps).loss) /
                          (2.0 * eps);
        const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-12});
        tau_worst = std::max(tau_worst, std::abs(analytic - fd) / scale);
    }
    worst.emplace_back("learn_tau", tau_worst);

    const double elapsed = seconds_since(start);
    bool pass = elapsed < 5.0;
    std::ostringstream detail;
    detail << "gradient oracle (max rel err <= 1e-4):";
    for (const auto& [name, w] : worst) {
        pass = pass && w <= 1e-4;
        detail << ' ' << name << '=' << fmt("%.2g", w);
    }
    detail << fmt(", %.2fs (< 5s)", elapsed);
    verdict(3, pass, detail.str());
}

void normalization_identities()
{
    Rng rng(4);
    double identity_err = 0.0;
    double unit_err = 0.0;
    double direction_err = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto d = 1 + static_cast<Eigen::Index>(rng.below(16));
        const auto c = 2 + static_cast<Eigen::Index>(rng.below(16));
        ClassifierHead head;
        head.weights = random_matrix(rng, d, c, 3.0);
        for (Eigen::Index j = 0; j < c; ++j) {
            head.weights.col(j) *= std::exp(rng.normal());
        }
        head.bias = random_vector(rng, c);
        identity_err = std::max(
            identity_err, (tau_normalize(head, 0.0).weights - head.weights).cwiseAbs().maxCoeff());
        const auto unit = tau_normalize(head, 1.0);
        for (Eigen::Index j = 0; j < c; ++j) {
            unit_err = std::max(unit_err, std::abs(unit.weights.col(j).norm() - 1.0));
        }
        const auto scaled = tau_normalize(head, rng.uniform());
        for (Eigen::Index j = 0; j < c; ++j) {
            const double cosine = scaled.weights.col(j).dot(head.weights.col(j)) /
                                  (scaled.weights.col(j).norm() * head.weights.col(j).norm());
            direction_err = std::max(direction_err, std::abs(1.0 - cosine));
        }
    }

    ClassifierHead head;
    head.weights = random_matrix(rng, 12, 20);
    for (Eigen::Index j = 0; j < 20; ++j) {
        head.weights.col(j) *= std::exp(rng.normal());
    }
    const auto unit = tau_normalize(head, 1.0);
    int agree = 0;
    for (int i = 0; i < 1000; ++i) {
        const Vector z = random_vector(rng, 12);
        agree += unit.predict_one(z) == cosine_predict(head, z, false).label ? 1 : 0;
    }
    const bool pass = identity_err <= 1e-12 && unit_err <= 1e-12 && direction_err <= 1e-12 &&
                      agree == 1000;
    verdict(4, pass,
            fmt("tau identities: tau=0 err %.2g, tau=1 unit err %.2g, direction err %.2g "
                "(<= 1e-12); cosine argmax agreement %.0f/1000",
                identity_err, unit_err, direction_err, agree));
}

void ncm_equivalence()
{
    Rng rng(5);
    const Eigen::Index d = 16;
    const Eigen::Index c = 30;
    NCMClassifier cosine;
    cosine.means = random_matrix(rng, d, c);
    cosine.means.colwise().normalize();
    NCMClassifier euclid = cosine;
    euclid.metric = NcmMetric::euclidean_l2norm;
    int agree = 0;
    const int queries = 10000;
    for (int i = 0; i < queries; ++i) {
        const Vector z = random_vector(rng, d).normalized();
        agree += cosine.predict_one(z).label == euclid.predict_one(z).label ? 1 : 0;
    }
    verdict(5, agree == queries,
            fmt("NCM cosine vs L2-normalised euclidean agreement %.0f/%.0f", agree, queries));
}

struct DefaultRun {
    ExperimentResult result;
    std::vector<std::uint64_t> seeds;
    double seconds = 0.0;
};

DefaultRun run_default(const fs::path& out)
{
    ExperimentConfig config;
    config.methods = {Method::joint, Method::crt, Method::tau, Method::learn_tau};
    config.output_dir = out;
    const auto start = Clock::now();
    DefaultRun run{run_experiment(config), config.seeds, 0.0};
    run.seconds = seconds_since(start);
    return run;
}

const SamplerRun& get(const DefaultRun& run, std::uint64_t seed, SamplerKind sampler)
{
    const auto* found = run.result.find(seed, sampler);
    if (found == nullptr) {
        throw Error("acceptance: missing run for seed " + std::to_string(seed));
    }
    return *found;
}

const EvalReport& report_of(const SamplerRun& run, Method method)
{
    const auto* m = run.find(method);
    if (m == nullptr || !m->report) {
        throw Error("acceptance: method " + std::string(to_string(method)) + " failed: " +
                    (m ? m->error : std::string("missing")));
    }
    return *m->report;
}

void norm_correlation(const DefaultRun& run)
{
    int hits = 0;
    std::ostringstream rhos;
    for (auto seed : run.seeds) {
        const auto& r = get(run, seed, SamplerKind::instance_balanced);
        const double rho = r.joint_norms ? r.joint_norms->rank_correlation : 0.0;
        hits += rho > 0.5 ? 1 : 0;
        rhos << ' ' << fmt("%.3f", rho);
    }
    const bool pass = hits >= 4 && run.seconds < 180.0;
    verdict(6, pass,
            "norm/count Spearman > 0.5 in " + std::to_string(hits) + "/5 seeds (need 4); rho:" +
                rhos.str() + fmt("; experiment %.1fs (< 180s)", run.seconds));
}

void sweep_slopes(const DefaultRun& run)
{
    int hits = 0;
    std::ostringstream slopes;
    for (auto seed : run.seeds) {
        const auto& r = get(run, seed, SamplerKind::instance_balanced);
        std::vector<double> tau;
        std::vector<double> many;
        std::vector<double> few;
        for (const auto& row : r.sweep) {
            tau.push_back(row.tau);
            many.push_back(row.many.value_or(0.0));
            few.push_back(row.few.value_or(0.0));
        }
        const double sm = fitted_slope(tau, many);
        const double sf = fitted_slope(tau, few);
        hits += (sm < 0.0 && sf > 0.0) ? 1 : 0;
        slopes << fmt(" (%.1f, %.1f)", sm, sf);
    }
    verdict(7, hits >= 4,
            "tau sweep many<0 and few>0 slopes in " + std::to_string(hits) +
                "/5 seeds (need 4); (many, few):" + slopes.str());
}

void stage_two_gain(const DefaultRun& run)
{
    auto deltas = [&](Method method) {
        std::vector<double> all;
        std::vector<double> few;
        for (auto seed : run.seeds) {
            const auto& r = get(run, seed, SamplerKind::instance_balanced);
            const auto& joint = report_of(r, Method::joint);
            const auto& other = report_of(r, method);
            all.push_back(other.top1_all() - joint.top1_all());
            few.push_back(other.top1(Split::few).value_or(0.0) -
                          joint.top1(Split::few).value_or(0.0));
        }
        return std::pair{median(all), median(few)};
    };
    const auto [crt_all, crt_few] = deltas(Method::crt);
    const auto [tau_all, tau_few] = deltas(Method::tau);
    const bool pass = crt_all >= 0.0 && crt_few > 0.0 && tau_all >= 0.0 && tau_few > 0.0 &&
                      run.seconds < 600.0;
    verdict(8, pass,
            fmt("median deltas vs joint-IB: cRT All %+.2f Few %+.2f, tau All %+.2f Few %+.2f",
                crt_all, crt_few, tau_all, tau_few) +
                fmt("; experiment %.1fs (< 600s)", run.seconds));
}

void sampler_ordering(const DefaultRun& run)
{
    const SamplerKind kinds[] = {SamplerKind::instance_balanced, SamplerKind::class_balanced,
                                 SamplerKind::square_root, SamplerKind::progressive};
    std::vector<double> many_median;
    std::vector<double> all_median;
    for (auto kind : kinds) {
        std::vector<double> many;
        std::vector<double> all;
        for (auto seed : run.seeds) {
            const auto& joint = report_of(get(run, seed, kind), Method::joint);
            many.push_back(joint.top1(Split::many).value_or(0.0));
            all.push_back(joint.top1_all());
        }
        many_median.push_back(median(many));
        all_median.push_back(median(all));
    }
    const bool ib_best = std::max_element(many_median.begin(), many_median.end()) ==
                         many_median.begin();
    const bool pass = ib_best && all_median[3] >= all_median[0];
    verdict(9, pass,
            fmt("median Many IB %.1f / CB %.1f / SR %.1f / PB %.1f", many_median[0],
                many_median[1], many_median[2], many_median[3]) +
                fmt("; median All PB %.1f >= IB %.1f", all_median[3], all_median[0]));
}

void tau_consistency(const DefaultRun& run)
{
    std::vector<double> val_train;
    std::vector<double> learned_val;
    std::ostringstream values;
    for (auto seed : run.seeds) {
        const auto& r = get(run, seed, SamplerKind::instance_balanced);
        if (!r.tau_val || !r.tau_train || !r.tau_learned) {
            throw Error("acceptance: tau selections missing for seed " + std::to_string(seed));
        }
        val_train.push_back(std::abs(r.tau_val->chosen - r.tau_train->chosen));
        learned_val.push_back(std::abs(*r.tau_learned - r.tau_val->chosen));
        values << fmt(" (%.2f, %.2f, %.3f)", r.tau_val->chosen, r.tau_train->chosen,
                      *r.tau_learned);
    }
    const double a = median(val_train);
    const double b = median(learned_val);
    verdict(10, a <= 0.2 && b <= 0.2,
            fmt("median |tau_val - tau_train| %.3f, |tau_learned - tau_val| %.3f (<= 0.2);",
                a, b) +
                " (val, train, learned):" + values.str());
}

std::vector<std::string> csv_files(const fs::path& dir)
{
    std::vector<std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            out.push_back(fs::relative(entry.path(), dir).generic_string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void determinism(const fs::path& out)
{
    ExperimentConfig config;
    config.synthetic.num_classes = 10;
    config.synthetic.n_max = 200;
    config.synthetic.dim = 8;
    config.stage_one.epochs = 8;
    config.stage_two.epochs = 3;
    config.methods = {Method::joint, Method::crt, Method::ncm, Method::tau, Method::lws,
                      Method::learn_tau};
    config.seeds = {7, 8};
    config.output_dir = out / "a";
    run_experiment(config);
    config.output_dir = out / "b";
    config.threads = 1;
    run_experiment(config);
    const auto files = csv_files(out / "a");
    bool same = !files.empty() && files == csv_files(out / "b");
    std::size_t compared = 0;
    for (const auto& f : files) {
        if (same) {
            same = read_file(out / "a" / f) == read_file(out / "b" / f);
            ++compared;
        }
    }

    Rng rng(6);
    bool heads_ok = true;
    std::vector<ClassifierHead> heads;
    heads.push_back(init_head(6, 5, HeadKind::linear, 1));
    heads.back().bias = random_vector(rng, 5, 1e-300);
    heads.push_back(init_head(6, 5, HeadKind::mlp, 2, {7}));
    heads.push_back(init_head(6, 5, HeadKind::cosine, 3));
    auto scaled = heads.front();
    scaled.scales = random_vector(rng, 5, 1e200);
    heads.push_back(scaled);
    for (const auto& head : heads) {
        std::stringstream first;
        write_head(head, first);
        const auto back = read_head(first);
        std::stringstream second;
        write_head(back, second);
        heads_ok = heads_ok && second.str() == first.str() &&
                   (back.weights.array() == head.weights.array()).all();
        if (head.bias) {
            heads_ok = heads_ok && back.bias && (back.bias->array() == head.bias->array()).all();
        }
        if (head.scales) {
            heads_ok = heads_ok && back.scales &&
                       (back.scales->array() == head.scales->array()).all();
        }
        for (std::size_t l = 0; l < head.hidden.size(); ++l) {
            heads_ok = heads_ok &&
                       (back.hidden[l].weights.array() == head.hidden[l].weights.array()).all() &&
                       (back.hidden[l].bias.array() == head.hidden[l].bias.array()).all();
        }
    }

    RowMatrix features = random_matrix(rng, 40, 5, 1e3);
    features(0, 0) = 5e-324;
    features(1, 1) = -1.7976931348623157e308;
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = static_cast<int>(i % 4);
    }
    const auto data = make_dataset(features, labels, 4);
    save_feature_dataset(data, out / "round_trip.txt");
    const auto back = load_feature_dataset(out / "round_trip.txt");
    const bool data_ok = back.labels == data.labels && back.num_classes == data.num_classes &&
                         (back.features.array() == data.features.array()).all();

    verdict(11, same && heads_ok && data_ok,
            std::string("determinism: ") + std::to_string(compared) + " report CSVs " +
                (same ? "byte-identical" : "DIFFER") + "; head round trip " +
                (heads_ok ? "exact" : "BROKEN") + "; dataset round trip " +
                (data_ok ? "exact" : "BROKEN"));
}

template <typename F>
void guarded(int id, F&& body)
{
    try {
        body();
    } catch (const std::exception& e) {
        verdict(id, false, std::string("error: ") + e.what());
    }
}

} // namespace

int main(int argc, char** argv)
{
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::remove_all(out);
    fs::create_directories(out);
    set_warning_handler([](std::string_view) {});

    const auto start = Clock::now();
    guarded(1, sampler_fidelity);
    guarded(2, progressive_endpoints);
    guarded(3, gradient_oracle);
    guarded(4, normalization_identities);
    guarded(5, ncm_equivalence);

    std::optional<DefaultRun> run;
    try {
        run = run_default(out / "default");
    } catch (const std::exception& e) {
        for (int id = 6; id <= 10; ++id) {
            verdict(id, false, std::string("default experiment failed: ") + e.what());
        }
    }
    if (run) {
        guarded(6, [&] { norm_correlation(*run); });
        guarded(7, [&] { sweep_slopes(*run); });
        guarded(8, [&] { stage_two_gain(*run); });
        guarded(9, [&] { sampler_ordering(*run); });
        guarded(10, [&] { tau_consistency(*run); });
    }
    guarded(11, [&] { determinism(out / "determinism"); });

    std::cout << fmt("total %.1fs; ", seconds_since(start)) << (11 - failures) << "/11 criteria pass"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
