#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dect/data_io.hpp"
#include "dect/decoder.hpp"
#include "dect/errors.hpp"
#include "dect/experiments.hpp"
#include "dect/synthetic.hpp"
#include "dect/training.hpp"

namespace py = pybind11;
using namespace dect;

PYBIND11_MODULE(_dect, m) {
    m.doc() = "Prototype decoder trained on frozen-model hidden states and label-word scores";

    auto base = py::register_exception<Error>(m, "DectError", PyExc_RuntimeError);
    py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
    py::register_exception<CalibrationDegenerate>(m, "CalibrationDegenerate", base.ptr());
    py::register_exception<NumericsError>(m, "NumericsError", base.ptr());
    py::register_exception<MissingClassError>(m, "MissingClassError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    py::enum_<DecoderKind>(m, "DecoderKind").value("proto", DecoderKind::proto).value("mlp", DecoderKind::mlp);
    py::enum_<ScoreSpace>(m, "ScoreSpace").value("prob", ScoreSpace::prob).value("logprob", ScoreSpace::logprob);

    py::class_<FeatureRecord>(m, "FeatureRecord")
        .def(py::init([](std::string id, int label, Vector hidden, Vector scores) {
                 return FeatureRecord{std::move(id), label, std::move(hidden), std::move(scores)};
             }),
             py::arg("id"), py::arg("label"), py::arg("hidden"), py::arg("scores"))
        .def_readwrite("id", &FeatureRecord::id)
        .def_readwrite("label", &FeatureRecord::label)
        .def_readwrite("hidden", &FeatureRecord::hidden)
        .def_readwrite("scores", &FeatureRecord::scores)
        .def("__repr__", [](const FeatureRecord& r) {
            return "FeatureRecord(id='" + r.id + "', label=" + std::to_string(r.label) + ")";
        });

    py::class_<CalibrationRecord>(m, "CalibrationRecord")
        .def(py::init([](Vector scores) { return CalibrationRecord{std::move(scores)}; }), py::arg("scores"))
        .def_readwrite("scores", &CalibrationRecord::scores);

    py::class_<FeatureSet>(m, "FeatureSet")
        .def_property_readonly("num_classes", [](const FeatureSet& s) { return s.header.num_classes; })
        .def_property_readonly("hidden_dim", [](const FeatureSet& s) { return s.header.hidden_dim; })
        .def_property_readonly("labels", [](const FeatureSet& s) { return s.header.labels; })
        .def_property_readonly("source", [](const FeatureSet& s) { return s.header.source; })
        .def_readonly("records", &FeatureSet::records)
        .def("__len__", [](const FeatureSet& s) { return s.records.size(); });

    py::class_<DecoderModel>(m, "DecoderModel")
        .def_readonly("kind", &DecoderModel::kind)
        .def_readonly("score_space", &DecoderModel::score_space)
        .def_readonly("projection", &DecoderModel::projection)
        .def_readonly("centers", &DecoderModel::centers)
        .def_readonly("radii", &DecoderModel::radii)
        .def_readwrite("lambda_", &DecoderModel::lambda)
        .def_property_readonly("num_classes", &DecoderModel::num_classes)
        .def_property_readonly("input_dim", &DecoderModel::input_dim)
        .def_property_readonly("dim", &DecoderModel::proj_dim);

    py::class_<TrainingConfig>(m, "TrainingConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainingConfig::epochs)
        .def_readwrite("learning_rate", &TrainingConfig::learning_rate)
        .def_readwrite("dim", &TrainingConfig::dim)
        .def_readwrite("seed", &TrainingConfig::seed)
        .def_readwrite("train_centers", &TrainingConfig::train_centers)
        .def_readwrite("ablate_radius", &TrainingConfig::ablate_radius)
        .def_readwrite("ablate_scores", &TrainingConfig::ablate_scores)
        .def_readwrite("decoder_kind", &TrainingConfig::decoder_kind)
        .def_readwrite("score_space", &TrainingConfig::score_space)
        .def_property(
            "lambda_",
            [](const TrainingConfig& c) -> py::object {
                if (c.lambda_policy.kind == LambdaPolicy::Kind::fixed) return py::float_(c.lambda_policy.value);
                return py::str("auto");
            },
            [](TrainingConfig& c, const py::object& value) {
                if (py::isinstance<py::str>(value)) {
                    if (value.cast<std::string>() != "auto") throw py::value_error("lambda_ must be 'auto' or a number");
                    c.lambda_policy = LambdaPolicy::automatic();
                } else {
                    c.lambda_policy = LambdaPolicy::fixed_value(value.cast<double>());
                }
            });

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("model", &TrainResult::model)
        .def_readonly("loss_history", &TrainResult::loss_history)
        .def_readonly("steps", &TrainResult::steps);

    py::class_<SeedResult>(m, "SeedResult")
        .def_readonly("seed", &SeedResult::seed)
        .def_readonly("accuracy", &SeedResult::accuracy)
        .def_readonly("validation_accuracy", &SeedResult::validation_accuracy)
        .def_readonly("lambda_", &SeedResult::lambda)
        .def_readonly("train_seconds", &SeedResult::train_seconds);

    py::class_<TrialReport>(m, "TrialReport")
        .def_readonly("shots", &TrialReport::shots)
        .def_readonly("seeds", &TrialReport::seeds)
        .def_readonly("mean", &TrialReport::mean)
        .def_readonly("std", &TrialReport::std)
        .def_readonly("validation_mean", &TrialReport::validation_mean);

    py::class_<SyntheticSpec>(m, "SyntheticSpec")
        .def(py::init<>())
        .def_readwrite("num_classes", &SyntheticSpec::num_classes)
        .def_readwrite("hidden_dim", &SyntheticSpec::hidden_dim)
        .def_readwrite("per_class", &SyntheticSpec::per_class)
        .def_readwrite("separation", &SyntheticSpec::separation)
        .def_readwrite("sigma", &SyntheticSpec::sigma)
        .def_readwrite("prior_strength", &SyntheticSpec::prior_strength)
        .def_readwrite("prior_noise", &SyntheticSpec::prior_noise)
        .def_readwrite("word_bias_std", &SyntheticSpec::word_bias_std)
        .def_readwrite("seed", &SyntheticSpec::seed);

    m.def("calibrate", [](const Vector& s, const Vector& sc) { return calibrate(s, sc); }, py::arg("scores"),
          py::arg("calibration"), "Divide scores by the normalized calibration scores.");
    m.def(
        "fuse_and_softmax",
        [](const Vector& decoder, const Vector& calibrated, double lambda) {
            const auto out = fuse_and_softmax(decoder, calibrated, lambda);
            return py::make_tuple(out.logits, out.probs);
        },
        py::arg("decoder"), py::arg("calibrated"), py::arg("lambda_"), "Return (logits, probabilities).");
    m.def(
        "score", [](const DecoderModel& model, const FeatureRecord& r, const CalibrationRecord& cal) {
            return score(model, r, cal).probs;
        },
        py::arg("model"), py::arg("record"), py::arg("calibration"));
    m.def("predict", &predict, py::arg("model"), py::arg("record"), py::arg("calibration"));

    m.def(
        "train",
        [](const std::vector<FeatureRecord>& records, const CalibrationRecord& cal, const TrainingConfig& cfg) {
            py::gil_scoped_release release;
            return train(records, cal, cfg);
        },
        py::arg("records"), py::arg("calibration"), py::arg("config") = TrainingConfig{});
    m.def(
        "evaluate",
        [](const DecoderModel& model, const std::vector<FeatureRecord>& records, const CalibrationRecord& cal) {
            return evaluate(model, records, cal);
        },
        py::arg("model"), py::arg("records"), py::arg("calibration"));
    m.def(
        "run_trial",
        [](const FeatureSet& pool, const CalibrationRecord& cal, int shots, std::vector<std::uint64_t> seeds,
           const TrainingConfig& cfg, int jobs) {
            TrialOptions opts{shots, std::move(seeds), jobs};
            py::gil_scoped_release release;
            return run_trial(pool, {}, cal, opts, cfg);
        },
        py::arg("pool"), py::arg("calibration"), py::arg("shots") = 16,
        py::arg("seeds") = std::vector<std::uint64_t>{0, 1, 2, 3, 4}, py::arg("config") = TrainingConfig{},
        py::arg("jobs") = 1);

    m.def("load_feature_file", &load_feature_file, py::arg("path"));
    m.def("load_calibration_file", &load_calibration_file, py::arg("path"));
    m.def(
        "make_synthetic",
        [](const SyntheticSpec& spec) {
            auto data = make_synthetic(spec);
            return py::make_tuple(std::move(data.features), std::move(data.calibration));
        },
        py::arg("spec") = SyntheticSpec{}, "Return (feature_set, calibration_record).");
}
