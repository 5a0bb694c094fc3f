#pragma once

// Synthetic datasets shared by the experiment tests and the acceptance suite.

#include "dect/synthetic.hpp"
#include "dect/training.hpp"

namespace family {

// Well separated clusters: 16-shot training should be near perfect.
inline dect::SyntheticSpec separated() {
    dect::SyntheticSpec spec;
    spec.num_classes = 4;
    spec.hidden_dim = 64;
    spec.per_class = 100;
    spec.separation = 5.0;
    spec.sigma = 1.0;
    spec.seed = 0;
    return spec;
}

// Overlapping clusters with an informative but noisy prior: hidden states
// alone are weak at 1-shot, the label-word scores carry most of the signal.
inline dect::SyntheticSpec informative_prior() {
    dect::SyntheticSpec spec;
    spec.num_classes = 4;
    spec.hidden_dim = 64;
    spec.per_class = 100;
    spec.separation = 1.0;
    spec.sigma = 1.0;
    spec.prior_strength = 1.5;
    spec.prior_noise = 1.0;
    spec.word_bias_std = 0.5;
    spec.seed = 7;
    return spec;
}

inline dect::TrainingConfig small_config() {
    dect::TrainingConfig cfg;
    cfg.dim = 16;
    return cfg;
}

} // namespace family
