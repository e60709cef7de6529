#include "icl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "icl/format.hpp"

namespace icl {
namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& want) {
    throw Error("bad_config_value", "config key '" + key + "': cannot parse '" + value + "' as " + want);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, const char* want) {
    const std::string v = trim(text);
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, text, want);
    return out;
}

std::string join_ints(const std::vector<int>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
    return out;
}

template <typename Get>
ConfigKey make_int(std::string name, std::string help, Get ref) {
    ConfigKey k;
    k.name = name;
    k.help = std::move(help);
    k.get = [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); };
    k.set = [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_number<int>(name, v, "integer"); };
    return k;
}

template <typename Get>
ConfigKey make_u64(std::string name, std::string help, Get ref) {
    ConfigKey k;
    k.name = name;
    k.help = std::move(help);
    k.get = [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); };
    k.set = [ref, name](RunConfig& c, const std::string& v) {
        ref(c) = parse_number<std::uint64_t>(name, v, "unsigned integer");
    };
    return k;
}

template <typename Get>
ConfigKey make_real(std::string name, std::string help, Get ref) {
    ConfigKey k;
    k.name = name;
    k.help = std::move(help);
    k.get = [ref](const RunConfig& c) { return fmt_num(ref(const_cast<RunConfig&>(c))); };
    k.set = [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_number<double>(name, v, "number"); };
    return k;
}

template <typename Get>
ConfigKey make_text(std::string name, std::string help, Get ref) {
    ConfigKey k;
    k.name = name;
    k.help = std::move(help);
    k.get = [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); };
    k.set = [ref](RunConfig& c, const std::string& v) { ref(c) = trim(v); };
    return k;
}

std::vector<ConfigKey> build_keys() {
    std::vector<ConfigKey> keys;
    keys.push_back(make_int("dim", "feature dimension of the synthetic task", [](RunConfig& c) -> int& { return c.task.dim; }));
    keys.push_back(make_int("num_classes", "class count", [](RunConfig& c) -> int& { return c.task.num_classes; }));
    keys.push_back(make_int("corpus_size", "demonstration corpus size N", [](RunConfig& c) -> int& { return c.task.corpus_size; }));
    keys.push_back(make_int("n_train", "training queries", [](RunConfig& c) -> int& { return c.task.n_train; }));
    keys.push_back(make_int("n_test", "test queries", [](RunConfig& c) -> int& { return c.task.n_test; }));
    keys.push_back(make_real("noise", "prototype noise sigma", [](RunConfig& c) -> double& { return c.task.noise; }));
    keys.push_back(make_u64("task_seed", "seed of the task generator", [](RunConfig& c) -> std::uint64_t& { return c.task.seed; }));
    keys.push_back(make_real("decay", "toy backend recency decay", [](RunConfig& c) -> double& { return c.backend.decay; }));
    keys.push_back(make_real("temperature", "toy backend logit scale", [](RunConfig& c) -> double& { return c.backend.temperature; }));
    keys.push_back(make_int("k", "demonstrations per context", [](RunConfig& c) -> int& { return c.k; }));
    {
        ConfigKey w;
        w.name = "widths";
        w.help = "candidate-tree width per step, comma separated";
        w.get = [](const RunConfig& c) { return join_ints(c.widths); };
        w.set = [](RunConfig& c, const std::string& v) { c.widths = parse_int_list(v); };
        keys.push_back(std::move(w));
    }
    keys.push_back(make_int("reward_hidden", "reward head hidden units", [](RunConfig& c) -> int& { return c.reward_hidden; }));
    keys.push_back(make_int("max_pairs", "preference pairs per query cap", [](RunConfig& c) -> int& { return c.max_pairs; }));
    keys.push_back(make_real("tie_tolerance", "minimum score gap for a preference pair", [](RunConfig& c) -> double& { return c.tie_tolerance; }));
    keys.push_back(make_real("holdout_fraction", "fraction of training queries held out for reward accuracy", [](RunConfig& c) -> double& { return c.holdout_fraction; }));
    keys.push_back(make_int("reward_epochs", "reward training epochs", [](RunConfig& c) -> int& { return c.reward.epochs; }));
    keys.push_back(make_int("reward_batch", "reward training batch size", [](RunConfig& c) -> int& { return c.reward.batch; }));
    keys.push_back(make_real("reward_lr", "reward training Adam learning rate", [](RunConfig& c) -> double& { return c.reward.lr; }));
    keys.push_back(make_real("beta", "KL coefficient towards the initial head", [](RunConfig& c) -> double& { return c.ppo.beta; }));
    keys.push_back(make_real("clip", "PPO clip epsilon", [](RunConfig& c) -> double& { return c.ppo.clip; }));
    keys.push_back(make_int("ppo_epochs", "PPO passes per batch", [](RunConfig& c) -> int& { return c.ppo.epochs_per_batch; }));
    keys.push_back(make_int("ppo_batch", "episodes per PPO update", [](RunConfig& c) -> int& { return c.ppo.batch; }));
    keys.push_back(make_int("ppo_steps", "PPO updates", [](RunConfig& c) -> int& { return c.ppo.total_steps; }));
    keys.push_back(make_real("ppo_lr", "PPO Adam learning rate", [](RunConfig& c) -> double& { return c.ppo.lr; }));
    keys.push_back(make_real("entropy_coef", "entropy bonus", [](RunConfig& c) -> double& { return c.ppo.entropy_coef; }));
    {
        ConfigKey s;
        s.name = "reward_source";
        s.help = "reward_head or raw_logprob";
        s.get = [](const RunConfig& c) {
            return std::string(c.ppo.source == RewardSource::reward_head ? "reward_head" : "raw_logprob");
        };
        s.set = [](RunConfig& c, const std::string& v) {
            const auto t = trim(v);
            if (t == "reward_head") c.ppo.source = RewardSource::reward_head;
            else if (t == "raw_logprob") c.ppo.source = RewardSource::raw_logprob;
            else bad_value("reward_source", v, "reward_head|raw_logprob");
        };
        keys.push_back(std::move(s));
    }
    keys.push_back(make_int("eval_every", "dev accuracy cadence in PPO updates", [](RunConfig& c) -> int& { return c.ppo.eval_every; }));
    keys.push_back(make_int("dev_size", "training queries used as the dev slice", [](RunConfig& c) -> int& { return c.dev_size; }));
    keys.push_back(make_u64("train_seed", "seed of both training stages", [](RunConfig& c) -> std::uint64_t& { return c.train_seed; }));
    keys.push_back(make_u64("eval_seed", "seed of stochastic baselines", [](RunConfig& c) -> std::uint64_t& { return c.eval_seed; }));
    keys.push_back(make_text("methods", "eval methods, comma separated", [](RunConfig& c) -> std::string& { return c.methods; }));
    keys.push_back(make_text("k_list", "k values for sweep-k", [](RunConfig& c) -> std::string& { return c.k_list; }));
    keys.push_back(make_text("out_dir", "output directory", [](RunConfig& c) -> std::string& { return c.out_dir; }));
    keys.push_back(make_text("corpus_path", "corpus JSONL", [](RunConfig& c) -> std::string& { return c.corpus_path; }));
    keys.push_back(make_text("train_path", "training queries JSONL", [](RunConfig& c) -> std::string& { return c.train_path; }));
    keys.push_back(make_text("test_path", "test queries JSONL", [](RunConfig& c) -> std::string& { return c.test_path; }));
    keys.push_back(make_text("checkpoint_path", "checkpoint file", [](RunConfig& c) -> std::string& { return c.checkpoint_path; }));
    std::sort(keys.begin(), keys.end(), [](const ConfigKey& a, const ConfigKey& b) { return a.name < b.name; });
    return keys;
}

bool is_path_key(const std::string& name) {
    return name == "out_dir" || name.ends_with("_path");
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_number<int>("list", item, "integer"));
    }
    return out;
}

std::string RunConfig::out_file(const std::string& name) const {
    if (out_dir.empty()) return name;
    return out_dir.back() == '/' ? out_dir + name : out_dir + "/" + name;
}
std::string RunConfig::corpus_file() const { return corpus_path.empty() ? out_file("corpus.jsonl") : corpus_path; }
std::string RunConfig::train_file() const { return train_path.empty() ? out_file("train.jsonl") : train_path; }
std::string RunConfig::test_file() const { return test_path.empty() ? out_file("test.jsonl") : test_path; }
std::string RunConfig::checkpoint_file() const {
    return checkpoint_path.empty() ? out_file("checkpoint.json") : checkpoint_path;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error("invalid_config", what); };
    if (k < 1) fail("k must be >= 1");
    if (static_cast<int>(widths.size()) != k) fail("widths must list exactly k entries");
    for (int w : widths)
        if (w < 1) fail("widths must be >= 1");
    if (k > task.corpus_size) fail("k exceeds corpus_size");
    if (reward_hidden < 1) fail("reward_hidden must be >= 1");
    if (max_pairs < 1) fail("max_pairs must be >= 1");
    if (tie_tolerance < 0) fail("tie_tolerance must be >= 0");
    if (holdout_fraction < 0 || holdout_fraction >= 1) fail("holdout_fraction must lie in [0,1)");
    if (reward.epochs < 0 || reward.batch < 1 || !(reward.lr > 0)) fail("reward training settings out of range");
    if (ppo.beta < 0) fail("beta must be >= 0");
    if (!(ppo.clip > 0 && ppo.clip < 1)) fail("clip must lie in (0,1)");
    if (ppo.epochs_per_batch < 1 || ppo.batch < 1 || ppo.total_steps < 0 || !(ppo.lr > 0))
        fail("PPO settings out of range");
    if (dev_size < 0) fail("dev_size must be >= 0");
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

void apply_preset(RunConfig& cfg, const std::string& name) {
    if (name == "full") {
        RunConfig fresh;
        fresh.out_dir = cfg.out_dir;
        fresh.corpus_path = cfg.corpus_path;
        fresh.train_path = cfg.train_path;
        fresh.test_path = cfg.test_path;
        fresh.checkpoint_path = cfg.checkpoint_path;
        cfg = fresh;
    } else if (name == "toy") {
        apply_preset(cfg, "full");
        cfg.preset = "toy";
        cfg.task = TaskSpec{.dim = 8, .num_classes = 3, .corpus_size = 50, .n_train = 200, .n_test = 100, .noise = 0.1, .seed = 1};
        cfg.reward_hidden = 64;
        cfg.reward.lr = 1e-2;
        cfg.ppo.total_steps = 2000;
        cfg.ppo.lr = 1e-2;
    } else {
        throw Error("bad_config_value", "unknown preset '" + name + "' (expected full or toy)");
    }
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "preset") {
        apply_preset(cfg, trim(value));
        return;
    }
    for (const auto& k : config_keys()) {
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw Error("unknown_config_key", "unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("bad_config_line", "config line " + std::to_string(line_no) + ": expected key = value");
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first == "preset"; });
    for (const auto& [key, value] : entries) set_key(base, key, value);
    return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), std::move(base));
}

std::string to_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "preset = " << cfg.preset << '\n';
    for (const auto& k : config_keys()) os << k.name << " = " << k.get(cfg) << '\n';
    return os.str();
}

std::string config_hash(const RunConfig& cfg) {
    std::string canonical;
    for (const auto& k : config_keys())
        if (!is_path_key(k.name)) canonical += k.name + "=" + k.get(cfg) + "\n";
    return hex64(fnv1a(canonical));
}

}  // namespace icl
