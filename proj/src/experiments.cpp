#include "dect/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dect/errors.hpp"

namespace dect {

using nlohmann::json;

namespace {

double accuracy_of(std::span<const FeatureRecord> records, auto&& predictor) {
    if (records.empty()) throw SchemaError("cannot evaluate on an empty test set");
    std::size_t correct = 0;
    for (const auto& r : records) {
        if (r.label < 0) throw SchemaError("record '" + r.id + "' has no label");
        if (predictor(r) == r.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

SeedResult run_seed(const FeatureSet& pool, std::span<const FeatureRecord> test, const CalibrationRecord& cal,
                    int shots, std::uint64_t seed, TrainingConfig cfg) {
    const ShotSplit split = make_shot_split(pool.records, pool.header.num_classes, shots, seed);
    const auto train_set = select_records(pool.records, split.train_ids);
    const auto validation = select_records(pool.records, split.validation_ids);
    cfg.seed = seed;

    const auto start = std::chrono::steady_clock::now();
    const TrainResult trained = train(train_set, cal, cfg);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    SeedResult out;
    out.seed = seed;
    out.lambda = trained.model.lambda;
    out.train_seconds = elapsed.count();
    out.validation_accuracy = evaluate(trained.model, validation, cal);
    if (test.empty()) {
        out.accuracy = evaluate(trained.model, held_out_records(pool.records, split), cal);
    } else {
        out.accuracy = evaluate(trained.model, test, cal);
    }
    return out;
}

json seed_json(const SeedResult& s, bool include_timing) {
    json j{{"seed", s.seed}, {"accuracy", s.accuracy}, {"validation_accuracy", s.validation_accuracy},
           {"lambda", s.lambda}};
    if (include_timing) j["train_seconds"] = s.train_seconds;
    return j;
}

json trial_json(const TrialReport& r) {
    return json{{"shots", r.shots},
                {"seeds", r.seeds.size()},
                {"mean", r.mean},
                {"std", r.std},
                {"validation_mean", r.validation_mean}};
}

std::string pct(double x) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * x;
    return s.str();
}

std::string mean_pm_std(const TrialReport& r) { return pct(r.mean) + " +- " + pct(r.std); }

} // namespace

double evaluate(const DecoderModel& model, std::span<const FeatureRecord> test, const CalibrationRecord& cal) {
    return accuracy_of(test, [&](const FeatureRecord& r) { return predict(model, r, cal); });
}

double prior_accuracy(std::span<const FeatureRecord> records, const CalibrationRecord& cal) {
    return accuracy_of(records, [&](const FeatureRecord& r) { return argmax(calibrate(r.scores, cal.scores)); });
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::sqrt(var)};
}

TrialReport run_trial(const FeatureSet& pool, std::span<const FeatureRecord> test, const CalibrationRecord& cal,
                      const TrialOptions& opts, const TrainingConfig& cfg) {
    if (opts.seeds.empty()) throw SchemaError("run_trial needs at least one seed");
    cfg.validate();

    const std::size_t n = opts.seeds.size();
    std::vector<SeedResult> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = run_seed(pool, test, cal, opts.shots, opts.seeds[i], cfg);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const std::size_t jobs = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(opts.jobs, 1)), 1, n);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    TrialReport report;
    report.shots = opts.shots;
    report.seeds = std::move(results);
    std::vector<double> acc, val;
    for (const auto& s : report.seeds) {
        acc.push_back(s.accuracy);
        val.push_back(s.validation_accuracy);
    }
    std::tie(report.mean, report.std) = mean_std(acc);
    report.validation_mean = mean_std(val).first;
    return report;
}

SweepReport lambda_sweep(const FeatureSet& pool, std::span<const FeatureRecord> test, const CalibrationRecord& cal,
                         std::span<const double> lambdas, const TrialOptions& opts, const TrainingConfig& cfg) {
    if (lambdas.empty()) throw SchemaError("lambda sweep needs at least one value");
    SweepReport sweep;
    double best_val = -1.0;
    for (double lambda : lambdas) {
        TrainingConfig c = cfg;
        c.ablate_scores = false;
        c.lambda_policy = LambdaPolicy::fixed_value(lambda);
        SweepRow row{lambda, run_trial(pool, test, cal, opts, c)};
        if (row.report.validation_mean > best_val) {
            best_val = row.report.validation_mean;
            sweep.best_lambda = lambda;
        }
        sweep.rows.push_back(std::move(row));
    }
    return sweep;
}

std::vector<AblationRow> ablation_suite(const FeatureSet& pool, std::span<const FeatureRecord> test,
                                        const CalibrationRecord& cal, const TrialOptions& opts,
                                        const TrainingConfig& cfg, bool include_mlp) {
    std::vector<AblationRow> rows{
        {"no-scores,no-radius", false, false, DecoderKind::proto, {}},
        {"no-scores", false, true, DecoderKind::proto, {}},
        {"no-radius", true, false, DecoderKind::proto, {}},
        {"full", true, true, DecoderKind::proto, {}},
    };
    if (include_mlp) rows.push_back({"mlp", true, false, DecoderKind::mlp, {}});

    for (auto& row : rows) {
        TrainingConfig c = cfg;
        c.ablate_scores = !row.use_scores;
        c.ablate_radius = !row.use_radius;
        c.decoder_kind = row.decoder;
        row.report = run_trial(pool, test, cal, opts, c);
    }
    return rows;
}

void write_trial_report(std::ostream& out, const TrialReport& report, bool include_timing) {
    json head = trial_json(report);
    head["kind"] = "trial";
    out << head.dump() << '\n';
    for (const auto& s : report.seeds) out << seed_json(s, include_timing).dump() << '\n';
}

void write_sweep_report(std::ostream& out, const SweepReport& report, bool include_timing) {
    out << json{{"kind", "lambda_sweep"}, {"rows", report.rows.size()}, {"best_lambda", report.best_lambda}}.dump()
        << '\n';
    for (const auto& row : report.rows) {
        json j = trial_json(row.report);
        j["lambda"] = row.lambda;
        json seeds = json::array();
        for (const auto& s : row.report.seeds) seeds.push_back(seed_json(s, include_timing));
        j["per_seed"] = std::move(seeds);
        out << j.dump() << '\n';
    }
}

void write_ablation_report(std::ostream& out, std::span<const AblationRow> rows, bool include_timing) {
    out << json{{"kind", "ablation"}, {"rows", rows.size()}}.dump() << '\n';
    for (const auto& row : rows) {
        json j = trial_json(row.report);
        j["name"] = row.name;
        j["scores"] = row.use_scores;
        j["radius"] = row.use_radius;
        j["decoder"] = to_string(row.decoder);
        json seeds = json::array();
        for (const auto& s : row.report.seeds) seeds.push_back(seed_json(s, include_timing));
        j["per_seed"] = std::move(seeds);
        out << j.dump() << '\n';
    }
}

void print_trial_table(std::ostream& out, const TrialReport& report) {
    out << std::left << std::setw(8) << "seed" << std::setw(10) << "acc" << std::setw(10) << "val"
        << std::setw(10) << "lambda"
        << "train_s\n";
    for (const auto& s : report.seeds) {
        out << std::setw(8) << s.seed << std::setw(10) << pct(s.accuracy) << std::setw(10)
            << pct(s.validation_accuracy) << std::setw(10) << s.lambda << std::setprecision(3) << s.train_seconds
            << std::setprecision(6) << '\n';
    }
    out << report.shots << "-shot accuracy: " << mean_pm_std(report) << " (" << report.seeds.size() << " seeds)\n";
}

void print_sweep_table(std::ostream& out, const SweepReport& report) {
    out << std::left << std::setw(10) << "lambda" << std::setw(18) << "acc" << "val\n";
    for (const auto& row : report.rows) {
        out << std::setw(10) << row.lambda << std::setw(18) << mean_pm_std(row.report)
            << pct(row.report.validation_mean) << '\n';
    }
    out << "best lambda by validation: " << report.best_lambda << '\n';
}

void print_ablation_table(std::ostream& out, std::span<const AblationRow> rows) {
    out << std::left << std::setw(22) << "config" << std::setw(8) << "scores" << std::setw(8) << "radius"
        << std::setw(8) << "decoder" << "acc\n";
    for (const auto& row : rows) {
        out << std::setw(22) << row.name << std::setw(8) << (row.use_scores ? "yes" : "no") << std::setw(8)
            << (row.use_radius ? "yes" : "no") << std::setw(8) << to_string(row.decoder)
            << mean_pm_std(row.report) << '\n';
    }
}

} // namespace dect
