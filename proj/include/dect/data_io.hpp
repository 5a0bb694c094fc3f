#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dect/decoder.hpp"
#include "dect/training.hpp"

namespace dect {

struct FeatureHeader {
    int num_classes = 0; // K
    int hidden_dim = 0;  // D
    std::vector<std::string> labels;
    std::string source;
};

struct FeatureSet {
    FeatureHeader header;
    std::vector<FeatureRecord> records;
};

struct ShotSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    int shots = 0;
    std::uint64_t seed = 0;
};

/// Scores whose sum is off from 1 by at most this much are renormalized on load.
inline constexpr double kScoreSumTolerance = 1e-4;

// Feature file: first line is the header object
//   {"k":K,"d":D,"labels":[...],"source":"..."}
// then one record object per line
//   {"id":"...","label":int,"hidden":[...],"scores":[...]}
// Blank lines are skipped; an optional "text" field is ignored.
FeatureSet read_feature_file(std::istream& in);
FeatureSet load_feature_file(const std::filesystem::path& path);
void write_feature_file(std::ostream& out, const FeatureSet& set);
void save_feature_file(const std::filesystem::path& path, const FeatureSet& set);

// Calibration file: a single object carrying at least {"scores":[...]}.
CalibrationRecord read_calibration_file(std::istream& in);
CalibrationRecord load_calibration_file(const std::filesystem::path& path);
void write_calibration_file(std::ostream& out, const CalibrationRecord& cal);
void save_calibration_file(const std::filesystem::path& path, const CalibrationRecord& cal);

/// Per-class sampling without replacement: n train and n validation ids per
/// class, deterministic in `seed`. Unlabeled records are never drawn.
ShotSplit make_shot_split(std::span<const FeatureRecord> records, int num_classes, int shots,
                          std::uint64_t seed);

/// Records whose ids are listed, in the order of `ids`.
std::vector<FeatureRecord> select_records(std::span<const FeatureRecord> records,
                                          const std::vector<std::string>& ids);

/// Records whose ids are not in the split.
std::vector<FeatureRecord> held_out_records(std::span<const FeatureRecord> records, const ShotSplit& split);

// Model file: line 1 {"format":"dect-model","version":1,...config...}, then
// one line per parameter tensor {"name":...,"rows":r,"cols":c,"data":[...]}.
struct ModelFile {
    DecoderModel model;
    TrainingConfig config;
    std::vector<double> loss_history;
};

void write_model_file(std::ostream& out, const ModelFile& file);
void save_model_file(const std::filesystem::path& path, const ModelFile& file);
ModelFile read_model_file(std::istream& in);
ModelFile load_model_file(const std::filesystem::path& path);

} // namespace dect
