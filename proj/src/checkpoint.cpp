#include "icl/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace icl {
namespace {

using json = nlohmann::json;

json matrix_json(const Matrix& m) {
    return json{{"rows", m.rows()},
                {"cols", m.cols()},
                {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix json_matrix(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("corrupt_checkpoint", "matrix data length mismatch");
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(data.data(), static_cast<Eigen::Index>(data.size()));
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& c) {
    json j;
    j["version"] = c.version;
    j["stage"] = c.stage;
    j["config"] = c.config_text;
    j["task_fingerprint"] = c.task_fingerprint;
    j["task_seed"] = c.task_seed;
    j["train_seed"] = c.train_seed;
    j["head"] = {{"weights", matrix_json(c.head.weights())}, {"reference", matrix_json(c.head.reference())}};
    if (c.reward_head) {
        const auto& r = *c.reward_head;
        j["reward_head"] = {{"w1", matrix_json(r.mlp.w1)}, {"b1", vec_json(r.mlp.b1)}, {"w2", vec_json(r.mlp.w2)},
                            {"b2", r.mlp.b2},              {"mean", r.mean},           {"var", r.var}};
    } else {
        j["reward_head"] = nullptr;
    }
    return j.dump();
}

Checkpoint checkpoint_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error("corrupt_checkpoint", e.what());
    }
    const auto version = j.value("version", std::string{});
    if (version != kCheckpointVersion)
        throw Error("version_mismatch", "checkpoint version '" + version + "' is not " + kCheckpointVersion);
    try {
        Checkpoint c;
        c.version = version;
        c.stage = j.at("stage").get<std::string>();
        c.config_text = j.at("config").get<std::string>();
        c.task_fingerprint = j.at("task_fingerprint").get<std::uint64_t>();
        c.task_seed = j.at("task_seed").get<std::uint64_t>();
        c.train_seed = j.at("train_seed").get<std::uint64_t>();
        c.head = RetrievalHead(json_matrix(j.at("head").at("weights")), json_matrix(j.at("head").at("reference")));
        const auto& r = j.at("reward_head");
        if (!r.is_null()) {
            RewardHeadModel rh;
            rh.mlp.w1 = json_matrix(r.at("w1"));
            rh.mlp.b1 = json_vec(r.at("b1"));
            rh.mlp.w2 = json_vec(r.at("w2"));
            rh.mlp.b2 = r.at("b2").get<double>();
            rh.mean = r.at("mean").get<double>();
            rh.var = r.at("var").get<double>();
            if (rh.mlp.b1.size() != rh.mlp.w1.cols() || rh.mlp.w2.size() != rh.mlp.w1.cols())
                throw Error("corrupt_checkpoint", "reward head shapes disagree");
            c.reward_head = std::move(rh);
        }
        return c;
    } catch (const json::exception& e) {
        throw Error("corrupt_checkpoint", e.what());
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path);
    out << checkpoint_to_string(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open checkpoint " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str());
}

}  // namespace icl
