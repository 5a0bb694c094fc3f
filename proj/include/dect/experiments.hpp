#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dect/data_io.hpp"
#include "dect/training.hpp"

namespace dect {

/// Fraction of labeled records whose prediction matches the label.
double evaluate(const DecoderModel& model, std::span<const FeatureRecord> test, const CalibrationRecord& cal);

/// Accuracy of the argmax of the calibrated scores alone (the zero-shot
/// prompt baseline on the same features).
double prior_accuracy(std::span<const FeatureRecord> records, const CalibrationRecord& cal);

struct SeedResult {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double validation_accuracy = 0.0;
    double lambda = 0.0;
    double train_seconds = 0.0;
};

struct TrialReport {
    int shots = 0;
    std::vector<SeedResult> seeds;
    double mean = 0.0;
    double std = 0.0; // population standard deviation over seeds
    double validation_mean = 0.0;
};

/// Population mean and standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

struct TrialOptions {
    int shots = 16;
    std::vector<std::uint64_t> seeds{0};
    int jobs = 1; // seeds evaluated concurrently; results are reduced in seed order
};

/// For each seed: draw an n-shot split from `pool`, train with cfg.seed set
/// to that seed, and evaluate on `test` (or, when `test` is empty, on the
/// pool records outside the split).
TrialReport run_trial(const FeatureSet& pool, std::span<const FeatureRecord> test, const CalibrationRecord& cal,
                      const TrialOptions& opts, const TrainingConfig& cfg);

struct SweepRow {
    double lambda = 0.0;
    TrialReport report;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double best_lambda = 0.0; // highest mean validation accuracy, first wins on ties
};

SweepReport lambda_sweep(const FeatureSet& pool, std::span<const FeatureRecord> test, const CalibrationRecord& cal,
                         std::span<const double> lambdas, const TrialOptions& opts, const TrainingConfig& cfg);

struct AblationRow {
    std::string name;
    bool use_scores = true;
    bool use_radius = true;
    DecoderKind decoder = DecoderKind::proto;
    TrialReport report;
};

/// The four {scores on/off} x {radius on/off} prototype configurations, plus
/// an MLP-decoder row when `include_mlp` is set.
std::vector<AblationRow> ablation_suite(const FeatureSet& pool, std::span<const FeatureRecord> test,
                                        const CalibrationRecord& cal, const TrialOptions& opts,
                                        const TrainingConfig& cfg, bool include_mlp = false);

// Line-delimited reports. Timing fields are omitted when include_timing is
// false so that reports can be compared byte-for-byte.
void write_trial_report(std::ostream& out, const TrialReport& report, bool include_timing = true);
void write_sweep_report(std::ostream& out, const SweepReport& report, bool include_timing = true);
void write_ablation_report(std::ostream& out, std::span<const AblationRow> rows, bool include_timing = true);

void print_trial_table(std::ostream& out, const TrialReport& report);
void print_sweep_table(std::ostream& out, const SweepReport& report);
void print_ablation_table(std::ostream& out, std::span<const AblationRow> rows);

} // namespace dect
