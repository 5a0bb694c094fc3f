#include "dect/decoder.hpp"

#include <cmath>
#include <sstream>

#include "dect/errors.hpp"

namespace dect {

namespace {

void require_size(Eigen::Index actual, Eigen::Index expected, const char* what) {
    if (actual != expected) {
        std::ostringstream msg;
        msg << what << ": expected length " << expected << ", got " << actual;
        throw SchemaError(msg.str());
    }
}

void require_finite(const VectorRef& v, const char* what) {
    if (!v.allFinite()) {
        throw NumericsError(std::string(what) + " contains NaN or Inf");
    }
}

} // namespace

void DecoderModel::validate() const {
    const auto k = radii.size();
    if (k < 2) throw SchemaError("model needs at least 2 classes");
    if (projection.rows() < 1 || projection.cols() < 1) throw SchemaError("projection must be at least 1x1");
    if (centers.rows() != k || centers.cols() != projection.rows()) {
        throw SchemaError("centers must be K x d");
    }
    if (!projection.allFinite() || !centers.allFinite() || !radii.allFinite() || !std::isfinite(lambda)) {
        throw SchemaError("model parameters must be finite");
    }
    if (lambda < 0.0) throw SchemaError("lambda must be nonnegative");
    if ((kind == DecoderKind::mlp) != mlp.has_value()) {
        throw SchemaError("mlp parameters present iff decoder kind is mlp");
    }
    if (mlp) {
        const auto& p = *mlp;
        if (p.w1.cols() != projection.cols() || p.b1.size() != p.w1.rows() || p.w2.cols() != p.w1.rows() ||
            p.w2.rows() != k || p.b2.size() != k) {
            throw SchemaError("mlp parameter shapes inconsistent with K and D");
        }
        if (!p.w1.allFinite() || !p.b1.allFinite() || !p.w2.allFinite() || !p.b2.allFinite()) {
            throw SchemaError("mlp parameters must be finite");
        }
    }
}

double smooth_norm(const VectorRef& u) {
    return std::sqrt(u.squaredNorm() + kNormEpsilon * kNormEpsilon);
}

Vector calibrate(const VectorRef& scores, const VectorRef& calibration) {
    require_size(scores.size(), calibration.size(), "calibration scores");
    for (Eigen::Index k = 0; k < calibration.size(); ++k) {
        if (!(calibration[k] > 0.0)) {
            std::ostringstream msg;
            msg << "calibration score " << k << " is " << calibration[k] << " (must be > 0)";
            throw CalibrationDegenerate(msg.str());
        }
    }
    // Shifted mean: exact when every entry is equal, so uniform calibration
    // leaves the scores bit-identical.
    const double anchor = calibration[0];
    const double mean = anchor + (calibration.array() - anchor).sum() / static_cast<double>(calibration.size());
    return (scores.array() * (mean / calibration.array())).matrix();
}

Vector calibrated_scores(const VectorRef& scores, const VectorRef& calibration, ScoreSpace space) {
    Vector s_hat = calibrate(scores, calibration);
    if (space == ScoreSpace::logprob) s_hat = s_hat.array().log().matrix();
    return s_hat;
}

Vector project(const DecoderModel& model, const VectorRef& hidden) {
    require_size(hidden.size(), model.input_dim(), "hidden state");
    return model.projection * hidden;
}

double proto_score(const DecoderModel& model, const VectorRef& hidden, int k) {
    if (k < 0 || k >= model.num_classes()) throw SchemaError("class index out of range");
    const Vector v = project(model, hidden);
    return -smooth_norm(v - model.centers.row(k).transpose()) + model.radii[k];
}

Vector mlp_score(const DecoderModel& model, const VectorRef& hidden) {
    if (!model.mlp) throw SchemaError("model has no mlp parameters");
    const auto& p = *model.mlp;
    require_size(hidden.size(), p.w1.cols(), "hidden state");
    const Vector a = (p.w1 * hidden + p.b1).cwiseMax(0.0);
    return p.w2 * a + p.b2;
}

Vector decoder_scores(const DecoderModel& model, const VectorRef& hidden) {
    if (model.kind == DecoderKind::mlp) return mlp_score(model, hidden);
    const Vector v = project(model, hidden);
    Vector dec(model.num_classes());
    for (int k = 0; k < model.num_classes(); ++k) {
        dec[k] = -smooth_norm(v - model.centers.row(k).transpose()) + model.radii[k];
    }
    return dec;
}

Vector softmax(const VectorRef& logits) {
    const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
    return e / e.sum();
}

ScoredExample fuse_and_softmax(const VectorRef& decoder, const VectorRef& calibrated, double lambda) {
    require_size(calibrated.size(), decoder.size(), "calibrated scores");
    require_finite(decoder, "decoder scores");
    require_finite(calibrated, "calibrated scores");
    if (!std::isfinite(lambda) || lambda < 0.0) throw NumericsError("lambda must be finite and nonnegative");

    ScoredExample out;
    out.decoder = decoder;
    out.calibrated = calibrated;
    out.logits = decoder + lambda * calibrated;
    out.probs = softmax(out.logits);
    return out;
}

ScoredExample score(const DecoderModel& model, const FeatureRecord& record, const CalibrationRecord& cal) {
    require_size(record.scores.size(), model.num_classes(), "record scores");
    const Vector s_hat = calibrated_scores(record.scores, cal.scores, model.score_space);
    return fuse_and_softmax(decoder_scores(model, record.hidden), s_hat, model.lambda);
}

int argmax(const VectorRef& values) {
    int best = 0;
    for (Eigen::Index k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) best = static_cast<int>(k);
    }
    return best;
}

int predict(const DecoderModel& model, const FeatureRecord& record, const CalibrationRecord& cal) {
    return argmax(score(model, record, cal).logits);
}

const char* to_string(DecoderKind kind) { return kind == DecoderKind::mlp ? "mlp" : "proto"; }

const char* to_string(ScoreSpace space) { return space == ScoreSpace::logprob ? "logprob" : "prob"; }

DecoderKind parse_decoder_kind(const std::string& name) {
    if (name == "proto") return DecoderKind::proto;
    if (name == "mlp") return DecoderKind::mlp;
    throw SchemaError("unknown decoder kind '" + name + "'");
}

ScoreSpace parse_score_space(const std::string& name) {
    if (name == "prob") return ScoreSpace::prob;
    if (name == "logprob") return ScoreSpace::logprob;
    throw SchemaError("unknown score space '" + name + "'");
}

} // namespace dect
