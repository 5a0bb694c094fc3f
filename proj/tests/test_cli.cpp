#include <doctest.h>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "cli_runner.hpp"
#include "dect/data_io.hpp"
#include "dect/experiments.hpp"

namespace {

// Synthetic pool shared by the cases below.
struct Fixture {
    cli::TempDir dir{"dect-cli"};
    std::string features = dir / "features.jsonl";
    std::string calib = dir / "calib.jsonl";
    Fixture() {
        const auto r = cli::run("synth --features-out " + features + " --calib-out " + calib +
                                " --per-class 40 --hidden-dim 16 --seed 4");
        REQUIRE(r.status == 0);
    }
    std::string data() const { return " --features " + features + " --calib " + calib; }
};

} // namespace

TEST_CASE("help and usage errors") {
    CHECK(cli::run("--help").status == 0);
    for (const char* sub : {"train", "eval", "predict", "trial", "sweep", "ablate", "validate", "synth"}) {
        CAPTURE(sub);
        CHECK(cli::run(std::string(sub) + " --help").status == 0);
    }
    CHECK(cli::run("").status == 2);
    CHECK(cli::run("frobnicate").status == 2);

    Fixture fx;
    CHECK(cli::run("train --features " + fx.features + " --out " + (fx.dir / "m.json")).status == 2);
    CHECK(cli::run("train" + fx.data() + " --out " + (fx.dir / "m.json") + " --lambda abc").status == 2);
    CHECK(cli::run("train" + fx.data() + " --out " + (fx.dir / "m.json") + " --dim 0").status == 2);
    CHECK(cli::run("train" + fx.data() + " --out " + (fx.dir / "m.json") + " --decoder tree").status == 2);
    CHECK(cli::run("train --features " + (fx.dir / "absent.jsonl") + " --calib " + fx.calib + " --out " +
                   (fx.dir / "m.json"))
              .status == 1);
}

TEST_CASE("train writes documented defaults") {
    Fixture fx;
    const auto model_path = fx.dir / "model.json";
    REQUIRE(cli::run("train" + fx.data() + " --shots 16 --out " + model_path).status == 0);
    const auto file = dect::load_model_file(model_path);
    CHECK(file.config.dim == 128);
    CHECK(file.config.epochs == 30);
    CHECK(file.config.learning_rate == 0.01);
    CHECK(file.model.proj_dim() == 128);
    CHECK(file.model.lambda == 0.0625);
    CHECK(file.loss_history.size() == 30);

    const auto header = nlohmann::json::parse(cli::slurp(model_path).substr(0, cli::slurp(model_path).find('\n')));
    CHECK(header.at("format") == "dect-model");
    CHECK(header.at("version") == 1);
}

TEST_CASE("eval and predict agree with the library") {
    Fixture fx;
    const auto model_path = fx.dir / "model.json";
    REQUIRE(cli::run("train" + fx.data() + " --shots 4 --dim 16 --seed 2 --out " + model_path).status == 0);

    const auto set = dect::load_feature_file(fx.features);
    const auto cal = dect::load_calibration_file(fx.calib);
    const auto model = dect::load_model_file(model_path).model;
    const double expected = dect::evaluate(model, set.records, cal);

    const auto eval = cli::run("eval --model " + model_path + fx.data());
    REQUIRE(eval.status == 0);
    const auto colon = eval.out.find(':');
    REQUIRE(colon != std::string::npos);
    CHECK(std::stod(eval.out.substr(colon + 1)) == doctest::Approx(expected).epsilon(1e-5));
    CHECK(eval.out.find("(160 records)") != std::string::npos);

    const auto predict = cli::run("predict --model " + model_path + fx.data());
    REQUIRE(predict.status == 0);
    CHECK(cli::count_lines(predict.out) == set.records.size());
    std::istringstream lines(predict.out);
    std::string line;
    std::size_t i = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("id") == set.records[i].id);
        CHECK(j.at("label").get<int>() == dect::predict(model, set.records[i], cal));
        double total = 0.0;
        for (double p : j.at("probs")) total += p;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        ++i;
    }
}

TEST_CASE("experiment commands") {
    Fixture fx;
    const auto sweep_out = fx.dir / "sweep.jsonl";
    const auto sweep = cli::run("sweep" + fx.data() + " --shots 2 --seeds 0,1 --dim 8 --lambdas 0,0.25,1 --out " +
                                sweep_out);
    REQUIRE(sweep.status == 0);
    const auto report = cli::slurp(sweep_out);
    CHECK(cli::count_lines(report) == 4);
    CHECK(nlohmann::json::parse(report.substr(0, report.find('\n'))).at("rows") == 3);

    const auto trial = cli::run("trial" + fx.data() + " --shots 2 --seeds 0,1,2 --dim 8 --jobs 2");
    CHECK(trial.status == 0);
    CHECK_FALSE(trial.out.empty());

    const auto ablate_out = fx.dir / "ablate.jsonl";
    CHECK(cli::run("ablate" + fx.data() + " --shots 1 --seeds 0 --dim 8 --mlp --out " + ablate_out).status == 0);
    CHECK(cli::slurp(ablate_out).find("\"mlp\"") != std::string::npos);

    const auto validate = cli::run("validate" + fx.data());
    CHECK(validate.status == 0);
    CHECK(validate.out.find("ok: 160 records") != std::string::npos);
}
