#include "dect/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <optional>
#include <random>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "dect/errors.hpp"

namespace dect {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, e.what());
    }
}

Vector to_vector(const json& arr, std::size_t line_no, const char* field) {
    if (!arr.is_array()) throw ParseError(line_no, std::string("field '") + field + "' must be an array");
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw ParseError(line_no, std::string("non-numeric entry in '") + field + "'");
        v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    return v;
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

const json& require_field(const json& obj, const char* name, std::size_t line_no) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(line_no, std::string("missing field '") + name + "'");
    return *it;
}

// Positive, finite, sums to 1 within kScoreSumTolerance; renormalizes in place.
void normalize_scores(Vector& scores, const std::string& owner) {
    for (Eigen::Index k = 0; k < scores.size(); ++k) {
        if (!std::isfinite(scores[k]) || !(scores[k] > 0.0)) {
            throw SchemaError(owner + ": score " + std::to_string(k) + " must be positive and finite");
        }
    }
    const double total = scores.sum();
    if (std::abs(total - 1.0) > kScoreSumTolerance) {
        throw SchemaError(owner + ": scores sum to " + std::to_string(total) + ", expected 1");
    }
    scores /= total;
}

FeatureHeader parse_header(const json& j, std::size_t line_no) {
    FeatureHeader h;
    try {
        h.num_classes = require_field(j, "k", line_no).get<int>();
        h.hidden_dim = require_field(j, "d", line_no).get<int>();
        h.labels = require_field(j, "labels", line_no).get<std::vector<std::string>>();
        h.source = j.value("source", std::string{});
    } catch (const json::type_error& e) {
        throw ParseError(line_no, e.what());
    }
    if (h.num_classes < 2) throw SchemaError("header: k must be >= 2");
    if (h.hidden_dim < 1) throw SchemaError("header: d must be >= 1");
    if (static_cast<int>(h.labels.size()) != h.num_classes) {
        throw SchemaError("header: labels list must have k entries");
    }
    return h;
}

FeatureRecord parse_record(const json& j, std::size_t line_no, const FeatureHeader& header) {
    FeatureRecord r;
    try {
        const json& id = require_field(j, "id", line_no);
        r.id = id.is_string() ? id.get<std::string>() : id.dump();
        const auto label = j.find("label");
        r.label = (label == j.end() || label->is_null()) ? -1 : label->get<int>();
    } catch (const json::type_error& e) {
        throw ParseError(line_no, e.what());
    }
    r.hidden = to_vector(require_field(j, "hidden", line_no), line_no, "hidden");
    r.scores = to_vector(require_field(j, "scores", line_no), line_no, "scores");

    const std::string owner = "record '" + r.id + "'";
    if (r.hidden.size() != header.hidden_dim) {
        throw SchemaError(owner + ": hidden has " + std::to_string(r.hidden.size()) + " entries, header says " +
                          std::to_string(header.hidden_dim));
    }
    if (!r.hidden.allFinite()) throw SchemaError(owner + ": hidden contains non-finite values");
    if (r.scores.size() != header.num_classes) {
        throw SchemaError(owner + ": scores has " + std::to_string(r.scores.size()) + " entries, header says " +
                          std::to_string(header.num_classes));
    }
    normalize_scores(r.scores, owner);
    if (r.label < -1 || r.label >= header.num_classes) throw SchemaError(owner + ": label out of range");
    return r;
}

json matrix_line(const char* name, const Matrix& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_line(const json& j, std::size_t line_no) {
    const auto rows = require_field(j, "rows", line_no).get<Eigen::Index>();
    const auto cols = require_field(j, "cols", line_no).get<Eigen::Index>();
    const Vector data = to_vector(require_field(j, "data", line_no), line_no, "data");
    if (rows < 0 || cols < 0 || data.size() != rows * cols) throw ParseError(line_no, "tensor size mismatch");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[i * cols + c];
    }
    return m;
}

} // namespace

FeatureSet read_feature_file(std::istream& in) {
    FeatureSet set;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const json j = parse_line(line, line_no);
        if (!have_header) {
            set.header = parse_header(j, line_no);
            have_header = true;
            continue;
        }
        FeatureRecord r = parse_record(j, line_no, set.header);
        if (!seen.insert(r.id).second) throw SchemaError("record '" + r.id + "': duplicate id");
        set.records.push_back(std::move(r));
    }
    if (!have_header) throw ParseError(line_no, "missing header line");
    return set;
}

FeatureSet load_feature_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_feature_file(in);
}

void write_feature_file(std::ostream& out, const FeatureSet& set) {
    out << json{{"k", set.header.num_classes},
                {"d", set.header.hidden_dim},
                {"labels", set.header.labels},
                {"source", set.header.source}}
               .dump()
        << '\n';
    for (const auto& r : set.records) {
        out << json{{"id", r.id}, {"label", r.label}, {"hidden", to_json(r.hidden)}, {"scores", to_json(r.scores)}}
                   .dump()
            << '\n';
    }
}

void save_feature_file(const std::filesystem::path& path, const FeatureSet& set) {
    auto out = open_out(path);
    write_feature_file(out, set);
}

CalibrationRecord read_calibration_file(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<CalibrationRecord> cal;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        if (cal) throw ParseError(line_no, "calibration file must hold a single record");
        const json j = parse_line(line, line_no);
        cal = CalibrationRecord{to_vector(require_field(j, "scores", line_no), line_no, "scores")};
    }
    if (!cal) throw ParseError(line_no, "calibration file is empty");
    if (cal->scores.size() < 2) throw SchemaError("calibration: need at least 2 scores");
    normalize_scores(cal->scores, "calibration record");
    return *cal;
}

CalibrationRecord load_calibration_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_calibration_file(in);
}

void write_calibration_file(std::ostream& out, const CalibrationRecord& cal) {
    out << json{{"scores", to_json(cal.scores)}}.dump() << '\n';
}

void save_calibration_file(const std::filesystem::path& path, const CalibrationRecord& cal) {
    auto out = open_out(path);
    write_calibration_file(out, cal);
}

ShotSplit make_shot_split(std::span<const FeatureRecord> records, int num_classes, int shots,
                          std::uint64_t seed) {
    if (shots < 1) throw SchemaError("shots must be >= 1");
    if (num_classes < 2) throw SchemaError("need at least 2 classes");
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const int y = records[i].label;
        if (y >= num_classes) throw SchemaError("record '" + records[i].id + "': label out of range");
        if (y >= 0) by_class[y].push_back(i);
    }

    ShotSplit split;
    split.shots = shots;
    split.seed = seed;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < num_classes; ++k) {
        auto& pool = by_class[k];
        if (pool.size() < 2 * static_cast<std::size_t>(shots)) {
            throw MissingClassError("class " + std::to_string(k) + " has " + std::to_string(pool.size()) +
                                    " labeled records, need " + std::to_string(2 * shots));
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        for (int i = 0; i < shots; ++i) {
            split.train_ids.push_back(records[pool[i]].id);
            split.validation_ids.push_back(records[pool[shots + i]].id);
        }
    }
    return split;
}

std::vector<FeatureRecord> select_records(std::span<const FeatureRecord> records,
                                          const std::vector<std::string>& ids) {
    std::unordered_map<std::string_view, const FeatureRecord*> index;
    for (const auto& r : records) index.emplace(r.id, &r);
    std::vector<FeatureRecord> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw SchemaError("unknown record id '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

std::vector<FeatureRecord> held_out_records(std::span<const FeatureRecord> records, const ShotSplit& split) {
    std::unordered_set<std::string_view> used;
    for (const auto& id : split.train_ids) used.insert(id);
    for (const auto& id : split.validation_ids) used.insert(id);
    std::vector<FeatureRecord> out;
    for (const auto& r : records) {
        if (!used.contains(r.id)) out.push_back(r);
    }
    return out;
}

void write_model_file(std::ostream& out, const ModelFile& file) {
    const auto& m = file.model;
    const auto& c = file.config;
    json head{{"format", "dect-model"},
              {"version", 1},
              {"decoder", to_string(m.kind)},
              {"score_space", to_string(m.score_space)},
              {"k", m.num_classes()},
              {"input_dim", m.input_dim()},
              {"dim", m.proj_dim()},
              {"lambda", m.lambda},
              {"config",
               {{"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"dim", c.dim},
                {"seed", c.seed},
                {"lambda_policy", c.lambda_policy.kind == LambdaPolicy::Kind::fixed ? "fixed" : "auto"},
                {"lambda_value", c.lambda_policy.value},
                {"train_centers", c.train_centers},
                {"ablate_radius", c.ablate_radius},
                {"ablate_scores", c.ablate_scores},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"decoder", to_string(c.decoder_kind)},
                {"score_space", to_string(c.score_space)}}},
              {"loss_history", file.loss_history}};
    out << head.dump() << '\n';
    out << matrix_line("projection", m.projection).dump() << '\n';
    out << matrix_line("centers", m.centers).dump() << '\n';
    out << matrix_line("radii", m.radii).dump() << '\n';
    if (m.mlp) {
        out << matrix_line("w1", m.mlp->w1).dump() << '\n';
        out << matrix_line("b1", m.mlp->b1).dump() << '\n';
        out << matrix_line("w2", m.mlp->w2).dump() << '\n';
        out << matrix_line("b2", m.mlp->b2).dump() << '\n';
    }
}

void save_model_file(const std::filesystem::path& path, const ModelFile& file) {
    auto out = open_out(path);
    write_model_file(out, file);
}

ModelFile read_model_file(std::istream& in) {
    ModelFile file;
    std::unordered_map<std::string, Matrix> tensors;
    std::string line;
    std::size_t line_no = 0;
    bool have_head = false;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (is_blank(line)) continue;
            const json j = parse_line(line, line_no);
            if (!have_head) {
                if (j.value("format", std::string{}) != "dect-model") throw ParseError(line_no, "not a model file");
                auto& m = file.model;
                m.kind = parse_decoder_kind(require_field(j, "decoder", line_no).get<std::string>());
                m.score_space = parse_score_space(require_field(j, "score_space", line_no).get<std::string>());
                m.lambda = require_field(j, "lambda", line_no).get<double>();
                const json& c = require_field(j, "config", line_no);
                auto& cfg = file.config;
                cfg.epochs = c.at("epochs").get<int>();
                cfg.learning_rate = c.at("learning_rate").get<double>();
                cfg.dim = c.at("dim").get<int>();
                cfg.seed = c.at("seed").get<std::uint64_t>();
                cfg.lambda_policy.kind = c.at("lambda_policy").get<std::string>() == "fixed"
                                             ? LambdaPolicy::Kind::fixed
                                             : LambdaPolicy::Kind::auto_inverse_n;
                cfg.lambda_policy.value = c.at("lambda_value").get<double>();
                cfg.train_centers = c.at("train_centers").get<bool>();
                cfg.ablate_radius = c.at("ablate_radius").get<bool>();
                cfg.ablate_scores = c.at("ablate_scores").get<bool>();
                cfg.adam_beta1 = c.at("adam_beta1").get<double>();
                cfg.adam_beta2 = c.at("adam_beta2").get<double>();
                cfg.adam_eps = c.at("adam_eps").get<double>();
                cfg.decoder_kind = parse_decoder_kind(c.at("decoder").get<std::string>());
                cfg.score_space = parse_score_space(c.at("score_space").get<std::string>());
                file.loss_history = j.value("loss_history", std::vector<double>{});
                have_head = true;
                continue;
            }
            tensors[require_field(j, "name", line_no).get<std::string>()] = matrix_from_line(j, line_no);
        }
    } catch (const json::exception& e) {
        throw ParseError(line_no, e.what());
    }
    if (!have_head) throw ParseError(line_no, "missing model header");

    auto take = [&](const char* name) -> Matrix {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw SchemaError(std::string("model file lacks tensor '") + name + "'");
        return std::move(it->second);
    };
    auto take_vector = [&](const char* name) -> Vector {
        Matrix m = take(name);
        if (m.cols() != 1) throw SchemaError(std::string("tensor '") + name + "' must be a column");
        return m.col(0);
    };
    auto& m = file.model;
    m.projection = take("projection");
    m.centers = take("centers");
    m.radii = take_vector("radii");
    if (m.kind == DecoderKind::mlp) {
        m.mlp = MlpParams{take("w1"), take_vector("b1"), take("w2"), take_vector("b2")};
    }
    m.validate();
    return file;
}

ModelFile load_model_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_model_file(in);
}

} // namespace dect
