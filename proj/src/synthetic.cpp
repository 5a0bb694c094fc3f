#include "dect/synthetic.hpp"

#include <cmath>
#include <random>

#include "dect/errors.hpp"

namespace dect {

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.num_classes < 2 || spec.num_classes > spec.hidden_dim) {
        throw SchemaError("synthetic data needs 2 <= K <= D");
    }
    if (spec.per_class < 1 || !(spec.sigma > 0.0)) throw SchemaError("invalid synthetic spec");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const int k_count = spec.num_classes;
    Vector word_bias(k_count);
    for (int k = 0; k < k_count; ++k) word_bias[k] = spec.word_bias_std * normal(rng);

    const double offset = spec.separation * spec.sigma / std::sqrt(2.0);
    const double coord_std = spec.sigma / std::sqrt(static_cast<double>(spec.hidden_dim));

    SyntheticData data;
    auto& header = data.features.header;
    header.num_classes = k_count;
    header.hidden_dim = spec.hidden_dim;
    for (int k = 0; k < k_count; ++k) header.labels.push_back("class" + std::to_string(k));
    header.source = "synthetic";

    // Interleave classes so record order carries no label information.
    for (int i = 0; i < spec.per_class; ++i) {
        for (int k = 0; k < k_count; ++k) {
            FeatureRecord r;
            r.id = "syn-" + std::to_string(i * k_count + k);
            r.label = k;
            r.hidden.resize(spec.hidden_dim);
            for (int j = 0; j < spec.hidden_dim; ++j) r.hidden[j] = coord_std * normal(rng);
            r.hidden[k] += offset;

            Vector logits = word_bias;
            for (int c = 0; c < k_count; ++c) logits[c] += spec.prior_noise * normal(rng);
            logits[k] += spec.prior_strength;
            r.scores = softmax(logits);
            data.features.records.push_back(std::move(r));
        }
    }
    data.calibration.scores = softmax(word_bias);
    return data;
}

} // namespace dect
