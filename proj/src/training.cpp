#include "dect/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dect/errors.hpp"

namespace dect {

namespace {

struct BatchShape {
    int classes = 0;
    int input_dim = 0;
};

// Checks that every record is labeled and matches K (from the calibration
// record) and the hidden size of the first record.
BatchShape check_batch(std::span<const FeatureRecord> batch, const CalibrationRecord& cal) {
    if (batch.empty()) throw SchemaError("empty training batch");
    BatchShape shape{static_cast<int>(cal.scores.size()), static_cast<int>(batch.front().hidden.size())};
    if (shape.classes < 2) throw SchemaError("need at least 2 classes");
    if (shape.input_dim < 1) throw SchemaError("hidden state must be non-empty");
    for (const auto& r : batch) {
        if (r.hidden.size() != shape.input_dim || r.scores.size() != shape.classes) {
            throw SchemaError("record '" + r.id + "' has inconsistent dimensions");
        }
        if (r.label < 0 || r.label >= shape.classes) {
            throw SchemaError("record '" + r.id + "' is unlabeled or has an out-of-range label");
        }
    }
    return shape;
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

double log_sum_exp(const Vector& q) {
    const double top = q.maxCoeff();
    return top + std::log((q.array() - top).exp().sum());
}

// Loss and (optionally) gradients in one pass over the batch, accumulated in
// record order.
double forward_backward(const DecoderModel& model, std::span<const FeatureRecord> batch,
                        const CalibrationRecord& cal, ParamTensors* grads) {
    const BatchShape shape = check_batch(batch, cal);
    if (shape.classes != model.num_classes() || shape.input_dim != model.input_dim()) {
        throw SchemaError("batch dimensions do not match the model");
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    if (grads) *grads = ParamTensors::zeros_like(model);

    double total = 0.0;
    for (const auto& r : batch) {
        const Vector s_hat = calibrated_scores(r.scores, cal.scores, model.score_space);

        Vector dec(shape.classes);
        Vector v;
        Matrix unit; // row k: u_k / rho_k
        Vector pre;  // MLP pre-activation
        Vector act;
        if (model.kind == DecoderKind::proto) {
            v = model.projection * r.hidden;
            unit.resize(shape.classes, v.size());
            for (int k = 0; k < shape.classes; ++k) {
                const Vector u = v - model.centers.row(k).transpose();
                const double rho = smooth_norm(u);
                dec[k] = -rho + model.radii[k];
                unit.row(k) = (u / rho).transpose();
            }
        } else {
            const auto& p = *model.mlp;
            pre = p.w1 * r.hidden + p.b1;
            act = pre.cwiseMax(0.0);
            dec = p.w2 * act + p.b2;
        }

        const Vector q = dec + model.lambda * s_hat;
        if (!q.allFinite()) throw NumericsError("non-finite logits for record '" + r.id + "'");
        total += log_sum_exp(q) - q[r.label];

        if (!grads) continue;
        Vector g = softmax(q);
        g[r.label] -= 1.0;
        g *= inv_n;

        if (model.kind == DecoderKind::proto) {
            grads->radii += g;
            // dL/dv = -sum_k g_k u_k / rho_k
            const Vector dv = -(unit.transpose() * g);
            grads->projection.noalias() += dv * r.hidden.transpose();
            grads->centers.noalias() += g.asDiagonal() * unit;
        } else {
            const auto& p = *model.mlp;
            grads->w2.noalias() += g * act.transpose();
            grads->b2 += g;
            Vector da = p.w2.transpose() * g;
            for (Eigen::Index j = 0; j < da.size(); ++j) {
                if (!(pre[j] > 0.0)) da[j] = 0.0;
            }
            grads->w1.noalias() += da * r.hidden.transpose();
            grads->b1 += da;
        }
    }
    return total * inv_n;
}

template <typename Tensor>
void adam_update(Tensor& param, Tensor& m, Tensor& v, const Tensor& g, const TrainingConfig& cfg,
                 double bias1, double bias2) {
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    param.array() -= cfg.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.adam_eps);
}

} // namespace

void TrainingConfig::validate() const {
    if (epochs < 1) throw SchemaError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw SchemaError("learning rate must be > 0");
    if (dim < 1) throw SchemaError("projected dimension must be >= 1");
    if (lambda_policy.kind == LambdaPolicy::Kind::fixed &&
        !(std::isfinite(lambda_policy.value) && lambda_policy.value >= 0.0)) {
        throw SchemaError("fixed lambda must be finite and nonnegative");
    }
}

ParamTensors ParamTensors::zeros_like(const DecoderModel& model) {
    ParamTensors t;
    t.projection = Matrix::Zero(model.projection.rows(), model.projection.cols());
    t.centers = Matrix::Zero(model.centers.rows(), model.centers.cols());
    t.radii = Vector::Zero(model.radii.size());
    if (model.mlp) {
        t.w1 = Matrix::Zero(model.mlp->w1.rows(), model.mlp->w1.cols());
        t.b1 = Vector::Zero(model.mlp->b1.size());
        t.w2 = Matrix::Zero(model.mlp->w2.rows(), model.mlp->w2.cols());
        t.b2 = Vector::Zero(model.mlp->b2.size());
    }
    return t;
}

bool ParamTensors::all_finite() const {
    return projection.allFinite() && centers.allFinite() && radii.allFinite() && w1.allFinite() &&
           b1.allFinite() && w2.allFinite() && b2.allFinite();
}

Vector mean_class_distances(const DecoderModel& model, std::span<const FeatureRecord> train) {
    const int k_count = model.num_classes();
    Vector sum = Vector::Zero(k_count);
    std::vector<int> count(k_count, 0);
    for (const auto& r : train) {
        if (r.label < 0 || r.label >= k_count) throw SchemaError("record '" + r.id + "' has an invalid label");
        const Vector v = project(model, r.hidden);
        sum[r.label] += smooth_norm(v - model.centers.row(r.label).transpose());
        ++count[r.label];
    }
    for (int k = 0; k < k_count; ++k) {
        if (count[k] == 0) throw MissingClassError("class " + std::to_string(k) + " has no training records");
        sum[k] /= count[k];
    }
    return sum;
}

DecoderModel init_model(std::span<const FeatureRecord> train, const CalibrationRecord& cal,
                        const TrainingConfig& cfg) {
    cfg.validate();
    const BatchShape shape = check_batch(train, cal);

    std::vector<int> per_class(shape.classes, 0);
    for (const auto& r : train) ++per_class[r.label];
    for (int k = 0; k < shape.classes; ++k) {
        if (per_class[k] == 0) throw MissingClassError("class " + std::to_string(k) + " has no training records");
    }

    std::mt19937_64 rng(cfg.seed);
    DecoderModel model;
    model.kind = cfg.decoder_kind;
    model.score_space = cfg.score_space;
    model.projection = uniform_matrix(cfg.dim, shape.input_dim, 1.0 / std::sqrt(double(shape.input_dim)), rng);
    model.centers = uniform_matrix(shape.classes, cfg.dim, 1.0 / std::sqrt(double(cfg.dim)), rng);
    model.radii = Vector::Zero(shape.classes);

    if (cfg.decoder_kind == DecoderKind::mlp) {
        const double in_bound = 1.0 / std::sqrt(double(shape.input_dim));
        const double hid_bound = 1.0 / std::sqrt(double(cfg.dim));
        MlpParams p;
        p.w1 = uniform_matrix(cfg.dim, shape.input_dim, in_bound, rng);
        p.b1 = uniform_matrix(cfg.dim, 1, in_bound, rng);
        p.w2 = uniform_matrix(shape.classes, cfg.dim, hid_bound, rng);
        p.b2 = uniform_matrix(shape.classes, 1, hid_bound, rng);
        model.mlp = std::move(p);
    } else if (!cfg.ablate_radius) {
        model.radii = mean_class_distances(model, train);
    }

    if (cfg.ablate_scores) {
        model.lambda = 0.0;
    } else if (cfg.lambda_policy.kind == LambdaPolicy::Kind::fixed) {
        model.lambda = cfg.lambda_policy.value;
    } else {
        model.lambda = 1.0 / *std::min_element(per_class.begin(), per_class.end());
    }
    return model;
}

double loss(const DecoderModel& model, std::span<const FeatureRecord> batch, const CalibrationRecord& cal) {
    return forward_backward(model, batch, cal, nullptr);
}

ParamTensors gradients(const DecoderModel& model, std::span<const FeatureRecord> batch,
                       const CalibrationRecord& cal) {
    ParamTensors g;
    forward_backward(model, batch, cal, &g);
    return g;
}

void adam_step(TrainState& state, const ParamTensors& grads, const TrainingConfig& cfg) {
    if (!grads.all_finite()) throw NumericsError("non-finite gradient at step " + std::to_string(state.step));
    if (state.step < 0) throw SchemaError("negative step counter");

    auto& model = state.model;
    auto& m = state.first_moment;
    auto& v = state.second_moment;
    if (m.projection.size() == 0) {
        m = ParamTensors::zeros_like(model);
        v = ParamTensors::zeros_like(model);
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.adam_beta2, t);

    if (model.kind == DecoderKind::mlp) {
        auto& p = *model.mlp;
        adam_update(p.w1, m.w1, v.w1, grads.w1, cfg, bias1, bias2);
        adam_update(p.b1, m.b1, v.b1, grads.b1, cfg, bias1, bias2);
        adam_update(p.w2, m.w2, v.w2, grads.w2, cfg, bias1, bias2);
        adam_update(p.b2, m.b2, v.b2, grads.b2, cfg, bias1, bias2);
        return;
    }
    adam_update(model.projection, m.projection, v.projection, grads.projection, cfg, bias1, bias2);
    if (!cfg.ablate_radius) adam_update(model.radii, m.radii, v.radii, grads.radii, cfg, bias1, bias2);
    if (cfg.train_centers) adam_update(model.centers, m.centers, v.centers, grads.centers, cfg, bias1, bias2);
}

TrainResult train(std::span<const FeatureRecord> train_set, const CalibrationRecord& cal,
                  const TrainingConfig& cfg) {
    TrainState state;
    state.model = init_model(train_set, cal, cfg);
    state.loss_history.reserve(cfg.epochs);

    ParamTensors grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double value = forward_backward(state.model, train_set, cal, &grads);
        state.loss_history.push_back(value);
        adam_step(state, grads, cfg);
    }
    return {std::move(state.model), std::move(state.loss_history), state.step};
}

} // namespace dect
