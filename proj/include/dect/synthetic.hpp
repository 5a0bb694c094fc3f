#pragma once

#include <cstdint>

#include "dect/data_io.hpp"

namespace dect {

/// Isotonic Gaussian clusters standing in for frozen-model hidden states,
/// with label-word scores drawn as softmax of true-class-biased logits.
///
/// `sigma` is the RMS radius of each cluster (E|x - mu|^2 = sigma^2, so the
/// per-coordinate standard deviation is sigma / sqrt(D)). Class means sit on
/// orthogonal axes so that every pair of means is exactly `separation * sigma`
/// apart (requires K <= D). Each record's score logits
/// are `prior_strength * [k == y] + prior_noise * N(0,1) + word_bias[k]`;
/// `word_bias ~ N(0, word_bias_std)` is shared by all records and is what the
/// calibration record (softmax of word_bias) removes.
struct SyntheticSpec {
    int num_classes = 4;
    int hidden_dim = 64;
    int per_class = 100;
    double separation = 5.0;
    double sigma = 1.0;
    double prior_strength = 1.0;
    double prior_noise = 1.0;
    double word_bias_std = 0.5;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    FeatureSet features;
    CalibrationRecord calibration;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

} // namespace dect
