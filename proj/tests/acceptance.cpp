// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "dect/errors.hpp"
#include "dect/experiments.hpp"
#include "families.hpp"
#include "oracles.hpp"

using namespace dect;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

std::vector<std::uint64_t> seeds(std::uint64_t n) {
    std::vector<std::uint64_t> out(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = i;
    return out;
}

Outcome gradient_oracle() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> input_dim(1, 32), dim(1, 8), classes(2, 5), batch(1, 20);
    int instances = 0, failed = 0;
    std::size_t coordinates = 0;
    double worst = 0.0;
    for (int kind = 0; kind < 2; ++kind) {
        for (int centers = 0; centers < 2; ++centers) {
            for (int i = 0; i < 30; ++i) {
                const int k = classes(rng), big_d = input_dim(rng), d = dim(rng);
                const auto model = oracle::random_model(k, big_d, d, kind ? DecoderKind::mlp : DecoderKind::proto, rng);
                const auto records = oracle::random_batch(batch(rng), k, big_d, rng);
                const CalibrationRecord cal{oracle::random_simplex(k, rng)};
                const auto check = oracle::check_gradients(model, records, cal, gradients(model, records, cal),
                                                           centers == 1, 1e-5, 1e-4);
                ++instances;
                failed += check.failures > 0;
                coordinates += check.coordinates;
                worst = std::max(worst, check.worst_relative);
            }
        }
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return {instances >= 100 && failed == 0 && elapsed.count() < 10.0,
            fmt("%d instances, %zu coordinates, %d failing, worst rel err %.2e, %.2f s", instances, coordinates,
                failed, worst, elapsed.count())};
}

Outcome calibration_properties() {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> size(2, 10);
    int constant_fail = 0, identity_fail = 0, degenerate_fail = 0;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int k = size(rng);
        const Vector sc = oracle::random_simplex(k, rng);
        const Vector self = calibrate(sc, sc);
        const double spread = self.maxCoeff() - self.minCoeff();
        worst = std::max(worst, spread);
        constant_fail += !(spread <= 1e-9 && std::abs(self[0] - sc.mean()) <= 1e-9);

        const Vector s = oracle::random_simplex(k, rng);
        identity_fail += !(calibrate(s, Vector::Constant(k, 1.0 / k)) == s);

        Vector bad = sc;
        bad[std::uniform_int_distribution<int>(0, k - 1)(rng)] = (i % 2) ? 0.0 : -0.1;
        try {
            calibrate(s, bad);
            ++degenerate_fail;
        } catch (const CalibrationDegenerate&) {
        }
    }
    return {constant_fail + identity_fail + degenerate_fail == 0,
            fmt("1000 vectors: constant fails %d (worst spread %.1e), identity fails %d, degenerate fails %d",
                constant_fail, worst, identity_fail, degenerate_fail)};
}

Outcome reduction_oracle() {
    std::mt19937_64 rng(13);
    const int k = 5, d = 6;
    DecoderModel model;
    model.projection = Matrix::Identity(d, d);
    model.centers = oracle::random_matrix(k, d, rng);
    model.radii = Vector::Zero(k);
    model.lambda = 0.0;
    int agree = 0;
    for (int i = 0; i < 1000; ++i) {
        const FeatureRecord r{"p", -1, oracle::random_vector(d, rng, 1.5), oracle::random_simplex(k, rng)};
        const CalibrationRecord cal{oracle::random_simplex(k, rng)};
        int best = 0;
        double best_sq = INFINITY;
        for (int c = 0; c < k; ++c) {
            double sq = 0.0;
            for (int j = 0; j < d; ++j) sq += (r.hidden[j] - model.centers(c, j)) * (r.hidden[j] - model.centers(c, j));
            if (sq < best_sq) best_sq = sq, best = c;
        }
        agree += predict(model, r, cal) == best;
    }
    return {agree == 1000, fmt("%d / 1000 agree", agree)};
}

Outcome end_to_end() {
    const auto data = make_synthetic(family::separated());
    TrialOptions opts;
    opts.shots = 16;
    opts.seeds = seeds(5);
    const auto report = run_trial(data.features, {}, data.calibration, opts, family::small_config());
    double slowest = 0.0;
    for (const auto& s : report.seeds) slowest = std::max(slowest, s.train_seconds);
    return {report.mean >= 0.95 && report.std <= 0.05 && slowest < 5.0,
            fmt("mean %.4f, std %.4f, slowest seed %.4f s", report.mean, report.std, slowest)};
}

Outcome ablation_trend(const FeatureSet& pool, const CalibrationRecord& cal) {
    TrialOptions opts;
    opts.shots = 1;
    opts.seeds = seeds(20);
    opts.jobs = 4;
    const auto rows = ablation_suite(pool, {}, cal, opts, family::small_config(), true);
    auto mean_of = [&](const std::string& name) {
        for (const auto& r : rows) {
            if (r.name == name) return r.report.mean;
        }
        return std::nan("");
    };
    const double full = mean_of("full"), no_scores = mean_of("no-scores"), mlp = mean_of("mlp");
    return {full > no_scores && full >= mlp,
            fmt("prior-only %.3f; full %.4f vs lambda=0 %.4f; proto %.4f vs mlp %.4f",
                prior_accuracy(pool.records, cal), full, no_scores, full, mlp)};
}

Outcome lambda_sweep_shape(const FeatureSet& pool, const CalibrationRecord& cal) {
    TrialOptions opts;
    opts.shots = 1;
    opts.seeds = seeds(20);
    opts.jobs = 4;
    const std::vector<double> lambdas{0.0, 0.25, 1.0, 4.0};
    const auto sweep = lambda_sweep(pool, {}, cal, lambdas, opts, family::small_config());
    int at_large = 0, strict = 0;
    for (std::size_t i = 0; i < opts.seeds.size(); ++i) {
        double small_best = -1.0, large_best = -1.0;
        for (std::size_t j = 0; j < lambdas.size(); ++j) {
            const double acc = sweep.rows[j].report.seeds[i].accuracy;
            double& best = lambdas[j] >= 1.0 ? large_best : small_best;
            best = std::max(best, acc);
        }
        at_large += large_best >= small_best;
        strict += large_best > small_best;
    }
    return {at_large * 2 > static_cast<int>(opts.seeds.size()),
            fmt("max at lambda >= 1 in %d / 20 seeds (%d strictly); row means %.3f %.3f %.3f %.3f", at_large, strict,
                sweep.rows[0].report.mean, sweep.rows[1].report.mean, sweep.rows[2].report.mean,
                sweep.rows[3].report.mean)};
}

Outcome determinism() {
    cli::TempDir dir("dect-acceptance");
    const auto features = dir / "features.jsonl", calib = dir / "calib.jsonl";
    if (cli::run("synth --features-out " + features + " --calib-out " + calib + " --seed 5").status != 0) {
        return {false, "synth failed"};
    }
    const std::string flags = " --features " + features + " --calib " + calib + " --shots 16 --seed 3 --out ";
    const auto a = cli::run("train" + flags + (dir / "a.json"));
    const auto b = cli::run("train" + flags + (dir / "b.json"));
    if (a.status != 0 || b.status != 0) return {false, "train failed"};
    const auto first = cli::slurp(dir / "a.json"), second = cli::slurp(dir / "b.json");
    return {!first.empty() && first == second, fmt("%zu bytes, identical: %s", first.size(),
                                                   first == second ? "yes" : "no")};
}

} // namespace

int main() {
    const auto prior_family = make_synthetic(family::informative_prior());
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient oracle", gradient_oracle},
        {"calibration properties", calibration_properties},
        {"reduction oracle", reduction_oracle},
        {"synthetic end-to-end", end_to_end},
        {"ablation trend", [&] { return ablation_trend(prior_family.features, prior_family.calibration); }},
        {"lambda sweep shape", [&] { return lambda_sweep_shape(prior_family.features, prior_family.calibration); }},
        {"determinism", determinism},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome outcome;
        try {
            outcome = run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        failures += !outcome.pass;
        std::printf("%s  %s: %s\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail.c_str());
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
    return failures == 0 ? 0 : 1;
}
