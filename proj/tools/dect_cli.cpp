// dect: train and evaluate output-side decoders over frozen-model features.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dect/data_io.hpp"
#include "dect/errors.hpp"
#include "dect/experiments.hpp"
#include "dect/synthetic.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ModelFlags {
    std::string lambda = "auto";
    int dim = 128;
    int epochs = 30;
    double lr = 0.01;
    std::string decoder = "proto";
    std::string score_space = "prob";
    bool train_centers = false;
    bool no_radius = false;
    bool no_scores = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--lambda", lambda, "Fusion weight: 'auto' (1/n) or a nonnegative number")
            ->capture_default_str();
        cmd->add_option("--dim", dim, "Projected dimension")->capture_default_str()->check(CLI::PositiveNumber);
        cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
        cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
        cmd->add_option("--decoder", decoder, "Decoder head")
            ->capture_default_str()
            ->check(CLI::IsMember({"proto", "mlp"}));
        cmd->add_option("--score-space", score_space, "Space of the fused model scores")
            ->capture_default_str()
            ->check(CLI::IsMember({"prob", "logprob"}));
        cmd->add_flag("--train-centers", train_centers, "Also optimize prototype centers");
        cmd->add_flag("--no-radius", no_radius, "Freeze radii at zero");
        cmd->add_flag("--no-scores", no_scores, "Drop model scores (lambda = 0)");
    }

    dect::TrainingConfig config(std::uint64_t seed) const {
        dect::TrainingConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = lr;
        cfg.dim = dim;
        cfg.seed = seed;
        cfg.train_centers = train_centers;
        cfg.ablate_radius = no_radius;
        cfg.ablate_scores = no_scores;
        cfg.decoder_kind = dect::parse_decoder_kind(decoder);
        cfg.score_space = dect::parse_score_space(score_space);
        if (lambda != "auto") {
            double value = 0.0;
            std::size_t used = 0;
            try {
                value = std::stod(lambda, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != lambda.size() || !(value >= 0.0)) {
                throw UsageError("--lambda must be 'auto' or a nonnegative number, got '" + lambda + "'");
            }
            cfg.lambda_policy = dect::LambdaPolicy::fixed_value(value);
        }
        return cfg;
    }
};

std::vector<dect::FeatureRecord> labeled_only(const std::vector<dect::FeatureRecord>& records) {
    std::vector<dect::FeatureRecord> out;
    for (const auto& r : records) {
        if (r.label >= 0) out.push_back(r);
    }
    return out;
}

void check_calibration(const dect::FeatureSet& set, const dect::CalibrationRecord& cal) {
    if (cal.scores.size() != set.header.num_classes) {
        throw dect::SchemaError("calibration record has " + std::to_string(cal.scores.size()) +
                                " scores, feature file has k=" + std::to_string(set.header.num_classes));
    }
}

// Writes to `path`, or to stdout when path is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dect::Error("cannot write " + path);
    write(out);
}

struct ExperimentFlags {
    std::string features;
    std::string calib;
    std::string test;
    int shots = 16;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    int jobs = 1;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--features", features, "Feature file holding the labeled pool")->required();
        cmd->add_option("--calib", calib, "Calibration file")->required();
        cmd->add_option("--test", test, "Test feature file (default: pool records outside each split)");
        cmd->add_option("--shots", shots, "Training records per class")->capture_default_str()->check(
            CLI::PositiveNumber);
        cmd->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
        cmd->add_option("--jobs", jobs, "Seeds run concurrently")->capture_default_str()->check(CLI::PositiveNumber);
        cmd->add_option("--out", out, "Write the line-delimited report here");
    }

    struct Loaded {
        dect::FeatureSet pool;
        dect::CalibrationRecord cal;
        std::vector<dect::FeatureRecord> test;
    };

    Loaded load() const {
        Loaded l{dect::load_feature_file(features), dect::load_calibration_file(calib), {}};
        check_calibration(l.pool, l.cal);
        if (!test.empty()) {
            auto t = dect::load_feature_file(test);
            if (t.header.num_classes != l.pool.header.num_classes || t.header.hidden_dim != l.pool.header.hidden_dim) {
                throw dect::SchemaError("test file header does not match the feature pool");
            }
            l.test = labeled_only(t.records);
        }
        return l;
    }

    dect::TrialOptions options() const { return {shots, seeds, jobs}; }
};

int run(int argc, char** argv) {
    CLI::App app{"Decoder tuning for frozen-model features"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a decoder and write a model file");
    std::string features, calib, out, model_path;
    std::optional<int> shots;
    std::uint64_t seed = 0;
    ModelFlags model_flags;
    train->add_option("--features", features, "Feature file with labeled training records")->required();
    train->add_option("--calib", calib, "Calibration file")->required();
    train->add_option("--shots", shots, "Train on an n-shot split drawn with --seed instead of all records")
        ->check(CLI::PositiveNumber);
    train->add_option("--seed", seed, "Seed for initialization and sampling")->capture_default_str();
    train->add_option("--out", out, "Model file to write")->required();
    model_flags.attach(train);

    // eval
    auto* eval = app.add_subcommand("eval", "Accuracy of a trained model on a feature file");
    eval->add_option("--model", model_path, "Model file")->required();
    eval->add_option("--features", features, "Labeled feature file")->required();
    eval->add_option("--calib", calib, "Calibration file")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "Per-record predictions and probabilities");
    predict->add_option("--model", model_path, "Model file")->required();
    predict->add_option("--features", features, "Feature file")->required();
    predict->add_option("--calib", calib, "Calibration file")->required();
    predict->add_option("--out", out, "Write predictions here (default: stdout)");

    // trial / sweep / ablate
    ExperimentFlags trial_flags, sweep_flags, ablate_flags;
    ModelFlags trial_model, sweep_model, ablate_model;
    auto* trial = app.add_subcommand("trial", "Multi-seed n-shot experiment");
    trial_flags.attach(trial);
    trial_model.attach(trial);

    std::vector<double> lambdas;
    auto* sweep = app.add_subcommand("sweep", "Retrain per fixed lambda and tabulate accuracy");
    sweep_flags.attach(sweep);
    sweep_model.attach(sweep);
    sweep->add_option("--lambdas", lambdas, "Comma-separated lambda values")->delimiter(',')->required()->check(
        CLI::NonNegativeNumber);

    bool with_mlp = false;
    auto* ablate = app.add_subcommand("ablate", "Model-score and radius ablations");
    ablate_flags.attach(ablate);
    ablate_model.attach(ablate);
    ablate->add_flag("--mlp", with_mlp, "Add a row with the MLP decoder");

    // validate
    auto* validate = app.add_subcommand("validate", "Check feature and calibration files against the schema");
    validate->add_option("--features", features, "Feature file")->required();
    validate->add_option("--calib", calib, "Calibration file");

    // synth
    dect::SyntheticSpec spec;
    std::string synth_features, synth_calib;
    auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian-cluster feature set");
    synth->add_option("--features-out", synth_features, "Feature file to write")->required();
    synth->add_option("--calib-out", synth_calib, "Calibration file to write")->required();
    synth->add_option("--classes", spec.num_classes)->capture_default_str();
    synth->add_option("--hidden-dim", spec.hidden_dim)->capture_default_str();
    synth->add_option("--per-class", spec.per_class)->capture_default_str();
    synth->add_option("--separation", spec.separation, "Distance between class means in units of sigma")
        ->capture_default_str();
    synth->add_option("--sigma", spec.sigma, "RMS radius of each cluster")->capture_default_str();
    synth->add_option("--prior-strength", spec.prior_strength)->capture_default_str();
    synth->add_option("--prior-noise", spec.prior_noise)->capture_default_str();
    synth->add_option("--word-bias", spec.word_bias_std)->capture_default_str();
    synth->add_option("--seed", spec.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*train) {
            auto set = dect::load_feature_file(features);
            const auto cal = dect::load_calibration_file(calib);
            check_calibration(set, cal);
            std::vector<dect::FeatureRecord> train_set;
            if (shots) {
                const auto split = dect::make_shot_split(set.records, set.header.num_classes, *shots, seed);
                train_set = dect::select_records(set.records, split.train_ids);
            } else {
                train_set = labeled_only(set.records);
            }
            const auto cfg = model_flags.config(seed);
            auto result = dect::train(train_set, cal, cfg);
            dect::save_model_file(out, {result.model, cfg, result.loss_history});
            std::cerr << "trained on " << train_set.size() << " records, lambda=" << result.model.lambda
                      << ", final loss=" << result.loss_history.back() << '\n';
        } else if (*eval) {
            const auto model = dect::load_model_file(model_path).model;
            const auto set = dect::load_feature_file(features);
            const auto cal = dect::load_calibration_file(calib);
            check_calibration(set, cal);
            const auto test = labeled_only(set.records);
            std::cout << "accuracy: " << dect::evaluate(model, test, cal) << " (" << test.size() << " records)\n";
        } else if (*predict) {
            const auto model = dect::load_model_file(model_path).model;
            const auto set = dect::load_feature_file(features);
            const auto cal = dect::load_calibration_file(calib);
            check_calibration(set, cal);
            emit(out, [&](std::ostream& os) {
                for (const auto& r : set.records) {
                    const auto scored = dect::score(model, r, cal);
                    const auto& p = scored.probs;
                    os << nlohmann::json{{"id", r.id},
                                         {"label", dect::argmax(scored.logits)},
                                         {"probs", std::vector<double>(p.data(), p.data() + p.size())}}
                              .dump()
                       << '\n';
                }
            });
        } else if (*trial) {
            const auto data = trial_flags.load();
            const auto report = dect::run_trial(data.pool, data.test, data.cal, trial_flags.options(),
                                                trial_model.config(0));
            dect::print_trial_table(std::cout, report);
            if (!trial_flags.out.empty()) emit(trial_flags.out, [&](std::ostream& os) {
                dect::write_trial_report(os, report);
            });
        } else if (*sweep) {
            const auto data = sweep_flags.load();
            const auto report = dect::lambda_sweep(data.pool, data.test, data.cal, lambdas, sweep_flags.options(),
                                                   sweep_model.config(0));
            dect::print_sweep_table(std::cout, report);
            if (!sweep_flags.out.empty()) emit(sweep_flags.out, [&](std::ostream& os) {
                dect::write_sweep_report(os, report);
            });
        } else if (*ablate) {
            const auto data = ablate_flags.load();
            const auto rows = dect::ablation_suite(data.pool, data.test, data.cal, ablate_flags.options(),
                                                   ablate_model.config(0), with_mlp);
            dect::print_ablation_table(std::cout, rows);
            if (!ablate_flags.out.empty()) emit(ablate_flags.out, [&](std::ostream& os) {
                dect::write_ablation_report(os, rows);
            });
        } else if (*validate) {
            const auto set = dect::load_feature_file(features);
            std::vector<int> counts(set.header.num_classes, 0);
            int unlabeled = 0;
            for (const auto& r : set.records) {
                if (r.label < 0) ++unlabeled;
                else ++counts[r.label];
            }
            std::cout << "ok: " << set.records.size() << " records, k=" << set.header.num_classes
                      << ", d=" << set.header.hidden_dim << ", unlabeled=" << unlabeled << '\n';
            for (int k = 0; k < set.header.num_classes; ++k) {
                std::cout << "  " << set.header.labels[k] << ": " << counts[k] << '\n';
            }
            if (!calib.empty()) {
                check_calibration(set, dect::load_calibration_file(calib));
                std::cout << "calibration ok\n";
            }
        } else if (*synth) {
            const auto data = dect::make_synthetic(spec);
            dect::save_feature_file(synth_features, data.features);
            dect::save_calibration_file(synth_calib, data.calibration);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
