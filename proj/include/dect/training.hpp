#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dect/decoder.hpp"

namespace dect {

/// Fusion weight selection. `auto_inverse_n` sets lambda = 1/n with n the
/// smallest per-class training count.
struct LambdaPolicy {
    enum class Kind { auto_inverse_n, fixed } kind = Kind::auto_inverse_n;
    double value = 0.0;

    static LambdaPolicy automatic() { return {}; }
    static LambdaPolicy fixed_value(double v) { return {Kind::fixed, v}; }
};

struct TrainingConfig {
    int epochs = 30;
    double learning_rate = 0.01;
    int dim = 128; // projected dimension d; also the MLP hidden width
    std::uint64_t seed = 0;
    LambdaPolicy lambda_policy;
    bool train_centers = false;
    bool ablate_radius = false;
    bool ablate_scores = false;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    DecoderKind decoder_kind = DecoderKind::proto;
    ScoreSpace score_space = ScoreSpace::prob;

    void validate() const;
};

/// Gradient (or Adam moment) tensors mirroring the trainable parameters.
/// Tensors of parameters that do not exist for a decoder kind stay empty.
struct ParamTensors {
    Matrix projection;
    Matrix centers;
    Vector radii;
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;

    static ParamTensors zeros_like(const DecoderModel& model);
    bool all_finite() const;
};

struct TrainState {
    DecoderModel model;
    ParamTensors first_moment;
    ParamTensors second_moment;
    std::int64_t step = 0;
    std::vector<double> loss_history;
};

struct TrainResult {
    DecoderModel model;
    std::vector<double> loss_history;
    std::int64_t steps = 0;
};

/// Draws W and centers (fan-in scaled uniform), sets radii to the mean
/// projected distance of each class's records from its center, and resolves
/// lambda from the policy.
DecoderModel init_model(std::span<const FeatureRecord> train, const CalibrationRecord& cal,
                        const TrainingConfig& cfg);

/// Radius of each class: mean distance between its projected records and its
/// center under the model's current projection.
Vector mean_class_distances(const DecoderModel& model, std::span<const FeatureRecord> train);

/// Mean cross-entropy of the gold labels.
double loss(const DecoderModel& model, std::span<const FeatureRecord> batch, const CalibrationRecord& cal);

/// Analytic gradients of loss() with respect to every parameter of the model.
ParamTensors gradients(const DecoderModel& model, std::span<const FeatureRecord> batch,
                       const CalibrationRecord& cal);

/// One bias-corrected Adam update of the trainable parameters selected by cfg.
void adam_step(TrainState& state, const ParamTensors& grads, const TrainingConfig& cfg);

/// Full-batch training: one gradient evaluation and one Adam step per epoch.
TrainResult train(std::span<const FeatureRecord> train_set, const CalibrationRecord& cal,
                  const TrainingConfig& cfg);

} // namespace dect
