#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace dect {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Vector>;

/// One example's frozen-model outputs: hidden state at the mask position,
/// label-word probabilities (normalized over the K label words) and gold label.
struct FeatureRecord {
    std::string id;
    int label = -1; // -1 marks an unlabeled input
    Vector hidden;
    Vector scores;
};

/// Label-word probabilities elicited from the empty calibration input.
struct CalibrationRecord {
    Vector scores;
};

enum class DecoderKind { proto, mlp };

/// How calibrated scores enter the fused logit. `prob` uses the calibrated
/// probabilities directly, `logprob` uses their natural log.
enum class ScoreSpace { prob, logprob };

struct MlpParams {
    Matrix w1; // hidden x D
    Vector b1;
    Matrix w2; // K x hidden
    Vector b2;
};

/// Trainable output-side decoder. For the prototype decoder a class score is
/// the signed distance from the projected hidden state to the class
/// hypersphere (center row k of `centers`, radius `radii[k]`).
struct DecoderModel {
    DecoderKind kind = DecoderKind::proto;
    ScoreSpace score_space = ScoreSpace::prob;
    Matrix projection; // d x D
    Matrix centers;    // K x d, row k is the center of class k
    Vector radii;      // K
    double lambda = 0.0;
    std::optional<MlpParams> mlp; // engaged iff kind == mlp

    int num_classes() const { return static_cast<int>(radii.size()); }
    int input_dim() const { return static_cast<int>(projection.cols()); }
    int proj_dim() const { return static_cast<int>(projection.rows()); }

    // Throws SchemaError when shapes disagree or any parameter is non-finite.
    void validate() const;
};

/// Full scoring trace for one input.
struct ScoredExample {
    Vector logits;     // q = dec + lambda * s_hat
    Vector probs;      // softmax(q)
    Vector decoder;    // Dec(h, k)
    Vector calibrated; // s_hat as fed into the fusion
};

/// Smoothing constant for the Euclidean norm, sqrt(|u|^2 + eps^2).
inline constexpr double kNormEpsilon = 1e-12;

double smooth_norm(const VectorRef& u);

/// Rescales `scores` by the calibration scores normalized to unit mean:
/// s_hat[k] = s[k] * mean(s_c) / s_c[k].
Vector calibrate(const VectorRef& scores, const VectorRef& calibration);

/// calibrate() followed by the configured score-space transform.
Vector calibrated_scores(const VectorRef& scores, const VectorRef& calibration, ScoreSpace space);

Vector project(const DecoderModel& model, const VectorRef& hidden);

double proto_score(const DecoderModel& model, const VectorRef& hidden, int k);

Vector mlp_score(const DecoderModel& model, const VectorRef& hidden);

/// Dec(h, .) for whichever decoder the model carries.
Vector decoder_scores(const DecoderModel& model, const VectorRef& hidden);

/// Numerically stable softmax (max-subtracted).
Vector softmax(const VectorRef& logits);

ScoredExample fuse_and_softmax(const VectorRef& decoder, const VectorRef& calibrated, double lambda);

ScoredExample score(const DecoderModel& model, const FeatureRecord& record, const CalibrationRecord& cal);

/// Index of the largest entry; ties resolve to the lowest index.
int argmax(const VectorRef& values);

int predict(const DecoderModel& model, const FeatureRecord& record, const CalibrationRecord& cal);

const char* to_string(DecoderKind kind);
const char* to_string(ScoreSpace space);
DecoderKind parse_decoder_kind(const std::string& name);
ScoreSpace parse_score_space(const std::string& name);

} // namespace dect
