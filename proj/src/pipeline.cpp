#include "icl/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_set>

#include "icl/baselines.hpp"
#include "icl/format.hpp"
#include "icl/plot.hpp"

namespace icl {
namespace {

void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

void check_fingerprint(const Checkpoint& ckpt, const Corpus& corpus) {
    if (ckpt.task_fingerprint != fingerprint(corpus))
        throw Error("task_mismatch", "checkpoint was created for a different corpus");
}

std::vector<Vec> leaf_states(const PreferenceData& data, const Backend& backend, StateCache& cache,
                             const std::vector<Query>& queries) {
    std::unordered_map<int, const Query*> by_id;
    for (const auto& q : queries) by_id.emplace(q.id, &q);
    std::vector<Vec> out;
    for (const auto& cs : data.sets)
        for (const auto& c : cs.candidates) out.push_back(cached_pool(cache, backend, *by_id.at(cs.query_id), c.ids));
    return out;
}

}  // namespace

void write_text(const std::string& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path);
    out << text;
}

Workspace load_workspace(const RunConfig& cfg) {
    Workspace ws;
    ws.corpus = load_corpus(cfg.corpus_file());
    ws.train = load_queries(cfg.train_file());
    ws.test = load_queries(cfg.test_file());
    std::unordered_set<int> demo_ids;
    for (const auto& d : ws.corpus.items) demo_ids.insert(d.id);
    for (const auto* qs : {&ws.train, &ws.test})
        for (const auto& q : *qs) {
            if (demo_ids.contains(q.id))
                throw Error("id_collision", "query id " + std::to_string(q.id) + " collides with a demonstration id");
            if (q.features.size() != ws.corpus.dim) throw Error("schema", "query feature dimension differs from corpus");
            if (q.gold_label >= ws.corpus.num_classes) ws.corpus.num_classes = q.gold_label + 1;
        }
    return ws;
}

Rng stage1_rng(const RunConfig& cfg) { return Rng(cfg.train_seed * 2 + 1); }
Rng stage2_rng(const RunConfig& cfg) { return Rng(cfg.train_seed * 2 + 2); }

Stage1Result run_stage1(const RetrievalHead& head, const Backend& backend, StateCache& cache,
                        const std::vector<Query>& train, const RunConfig& cfg, Rng& rng) {
    Stage1Result out;
    const auto t0 = std::chrono::steady_clock::now();
    out.data = collect_preferences(head, backend, cache, train, cfg.widths, static_cast<std::size_t>(cfg.max_pairs),
                                   cfg.tie_tolerance, rng);
    out.collect_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& cs : out.data.sets) out.leaves_scored += cs.candidates.size();

    const auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(train.size())));
    std::unordered_set<int> holdout_ids;
    for (std::size_t i = train.size() - n_hold; i < train.size(); ++i) holdout_ids.insert(train[i].id);
    std::vector<PreferencePair> fit_pairs, hold_pairs;
    for (const auto& p : out.data.pairs) (holdout_ids.contains(p.query_id) ? hold_pairs : fit_pairs).push_back(p);

    out.reward_head = RewardHeadModel(backend.dim(), cfg.reward_hidden);
    out.reward_head.mlp.init_random(rng);
    const auto fit = to_examples(fit_pairs, backend, cache, train);
    const auto hold = to_examples(hold_pairs, backend, cache, train);
    out.history = train_reward(out.reward_head, fit, hold, cfg.reward, rng);
    fit_normalization(out.reward_head, leaf_states(out.data, backend, cache, train));
    return out;
}

std::vector<PpoRecord> run_stage2(RetrievalHead& head, const RewardHeadModel* reward_head, const Backend& backend,
                                  StateCache& cache, const std::vector<Query>& train, const RunConfig& cfg, Rng& rng) {
    PpoConfig pc = cfg.ppo;
    pc.k = cfg.k;
    const std::size_t dev_n = std::min(train.size(), static_cast<std::size_t>(cfg.dev_size));
    const std::vector<Query> dev(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(dev_n));
    return train_ppo(head, reward_head, backend, cache, train, dev, pc, rng);
}

TrainedModels train_pipeline(const Workspace& ws, const Backend& backend, const RunConfig& cfg, bool use_reward_model) {
    cfg.validate();
    TrainedModels out;
    out.head = init_head(backend);
    StateCache cache;
    RunConfig stage_cfg = cfg;
    if (use_reward_model) {
        Rng rng1 = stage1_rng(cfg);
        auto s1 = run_stage1(out.head, backend, cache, ws.train, cfg, rng1);
        out.reward_head = std::move(s1.reward_head);
        out.reward_history = std::move(s1.history);
        stage_cfg.ppo.source = RewardSource::reward_head;
    } else {
        stage_cfg.ppo.source = RewardSource::raw_logprob;
    }
    Rng rng2 = stage2_rng(cfg);
    out.curves = run_stage2(out.head, out.reward_head ? &*out.reward_head : nullptr, backend, cache, ws.train,
                            stage_cfg, rng2);
    return out;
}

std::vector<std::string> split_names(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        const auto b = item.find_last_not_of(" \t");
        out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

std::vector<Method> make_methods(const std::vector<std::string>& names, const RunConfig& cfg, const Backend& backend,
                                 const RetrievalHead& head, StateCache* cache) {
    const int k = cfg.k;
    const int n = static_cast<int>(backend.corpus().size());
    std::vector<Method> out;
    for (const auto& name : names) {
        if (name == "random") {
            auto rng = std::make_shared<Rng>(cfg.eval_seed);
            out.push_back({name, [rng, n, k](const Query&) { return random_retrieve(n, k, *rng); }});
        } else if (name == "bm25") {
            auto index = std::make_shared<Bm25Index>(backend.corpus());
            auto rng = std::make_shared<Rng>(cfg.eval_seed + 1);
            out.push_back({name, [index, rng, k](const Query& q) { return bm25_retrieve(*index, q.text, k, *rng); }});
        } else if (name == "initial") {
            out.push_back({name, [&head, &backend, cache, k](const Query& q) {
                               return greedy_decode(head.reference(), backend, q, k, cache);
                           }});
        } else if (name == "trained") {
            out.push_back({name, [&head, &backend, cache, k](const Query& q) {
                               return greedy_decode(head.weights(), backend, q, k, cache);
                           }});
        } else if (name == "oracle") {
            out.push_back({name, [&backend, k](const Query& q) { return oracle(backend, q, k).ids; }});
        } else {
            throw Error("unknown_method", "unknown method '" + name + "' (expected random, bm25, initial, trained, oracle)");
        }
    }
    return out;
}

std::string reward_history_csv(const std::vector<RewardEpoch>& history, const std::string& config_hash) {
    std::ostringstream os;
    os << "# config_hash=" << config_hash << '\n' << "epoch,loss,holdout_acc\n";
    for (const auto& h : history) os << h.epoch << ',' << fmt_num(h.loss) << ',' << fmt_num(h.holdout_acc) << '\n';
    return os.str();
}

std::string ppo_curves_csv(const std::vector<PpoRecord>& curves, const std::string& config_hash) {
    std::ostringstream os;
    os << "# config_hash=" << config_hash << '\n' << "step,mean_reward,mean_kl,entropy,clip_frac,dev_accuracy,reward_var\n";
    for (const auto& r : curves)
        os << r.step << ',' << fmt_num(r.mean_reward) << ',' << fmt_num(r.mean_kl) << ',' << fmt_num(r.entropy) << ','
           << fmt_num(r.clip_fraction) << ',' << fmt_num(r.dev_accuracy) << ',' << fmt_num(r.reward_var) << '\n';
    return os.str();
}

Task cmd_gen_task(const RunConfig& cfg) {
    Task task = generate_task(cfg.task);
    ensure_parent(cfg.corpus_file());
    ensure_parent(cfg.train_file());
    ensure_parent(cfg.test_file());
    save_corpus(cfg.corpus_file(), task.corpus);
    save_queries(cfg.train_file(), task.train);
    save_queries(cfg.test_file(), task.test);
    return task;
}

Checkpoint cmd_init(const RunConfig& cfg) {
    cfg.validate();
    const Workspace ws = load_workspace(cfg);
    const ToyLm backend(ws.corpus, cfg.backend);
    Checkpoint ckpt;
    ckpt.stage = "init";
    ckpt.head = init_head(backend);
    ckpt.config_text = to_text(cfg);
    ckpt.task_fingerprint = fingerprint(ws.corpus);
    ckpt.task_seed = cfg.task.seed;
    ckpt.train_seed = cfg.train_seed;
    ensure_parent(cfg.checkpoint_file());
    save_checkpoint(cfg.checkpoint_file(), ckpt);
    return ckpt;
}

Checkpoint cmd_train_reward(const RunConfig& cfg) {
    cfg.validate();
    const Workspace ws = load_workspace(cfg);
    const ToyLm backend(ws.corpus, cfg.backend);
    Checkpoint ckpt = load_checkpoint(cfg.checkpoint_file());
    check_fingerprint(ckpt, ws.corpus);
    StateCache cache;
    Rng rng = stage1_rng(cfg);
    auto s1 = run_stage1(ckpt.head, backend, cache, ws.train, cfg, rng);
    write_text(cfg.out_file("reward_history.csv"), reward_history_csv(s1.history, config_hash(cfg)));

    Series loss{"bt loss", {}, {}}, acc{"holdout acc", {}, {}};
    for (const auto& h : s1.history) {
        loss.x.push_back(h.epoch);
        loss.y.push_back(h.loss);
        acc.x.push_back(h.epoch);
        acc.y.push_back(h.holdout_acc);
    }
    write_text(cfg.out_file("reward_history.svg"), svg_line_plot("reward head training", "epoch", {loss, acc}));

    ckpt.reward_head = std::move(s1.reward_head);
    ckpt.stage = "reward";
    ckpt.config_text = to_text(cfg);
    ckpt.train_seed = cfg.train_seed;
    save_checkpoint(cfg.checkpoint_file(), ckpt);
    return ckpt;
}

Checkpoint cmd_train_ppo(const RunConfig& cfg, bool no_reward_model) {
    cfg.validate();
    const Workspace ws = load_workspace(cfg);
    const ToyLm backend(ws.corpus, cfg.backend);
    Checkpoint ckpt = load_checkpoint(cfg.checkpoint_file());
    check_fingerprint(ckpt, ws.corpus);
    RunConfig run = cfg;
    run.ppo.source = no_reward_model ? RewardSource::raw_logprob : RewardSource::reward_head;
    if (!no_reward_model && !ckpt.reward_head)
        throw Error("missing_reward_head", "checkpoint has no reward head; run train-reward first or pass --no-reward-model");
    StateCache cache;
    Rng rng = stage2_rng(cfg);
    const auto curves = run_stage2(ckpt.head, no_reward_model ? nullptr : &*ckpt.reward_head, backend, cache, ws.train,
                                   run, rng);
    write_text(cfg.out_file("ppo_curves.csv"), ppo_curves_csv(curves, config_hash(run)));

    Series reward{"mean reward", {}, {}}, kl{"mean kl", {}, {}}, dev{"dev accuracy", {}, {}};
    for (const auto& r : curves) {
        reward.x.push_back(r.step);
        reward.y.push_back(r.mean_reward);
        kl.x.push_back(r.step);
        kl.y.push_back(r.mean_kl);
        dev.x.push_back(r.step);
        dev.y.push_back(r.dev_accuracy);
    }
    write_text(cfg.out_file("ppo_reward.svg"), svg_line_plot("PPO mean reward", "step", {reward}));
    write_text(cfg.out_file("ppo_kl.svg"), svg_line_plot("PPO mean KL to reference", "step", {kl}));
    write_text(cfg.out_file("ppo_dev_accuracy.svg"), svg_line_plot("greedy dev accuracy", "step", {dev}));

    ckpt.stage = "ppo";
    ckpt.config_text = to_text(run);
    ckpt.train_seed = cfg.train_seed;
    save_checkpoint(cfg.checkpoint_file(), ckpt);
    return ckpt;
}

std::vector<EvalReport> cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    const Workspace ws = load_workspace(cfg);
    const ToyLm backend(ws.corpus, cfg.backend);
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_file());
    check_fingerprint(ckpt, ws.corpus);
    StateCache cache;
    const auto methods = make_methods(split_names(cfg.methods), cfg, backend, ckpt.head, &cache);
    auto reports = compare(methods, backend, ws.test, &cache);
    const auto hash = config_hash(cfg);
    write_text(cfg.out_file("eval.csv"), report_csv(reports, hash));
    write_text(cfg.out_file("eval_detail.csv"), detail_csv(reports, hash));
    return reports;
}

std::vector<OracleResult> cmd_oracle(const RunConfig& cfg) {
    cfg.validate();
    const Workspace ws = load_workspace(cfg);
    const ToyLm backend(ws.corpus, cfg.backend);
    std::vector<OracleResult> out;
    std::ostringstream os;
    os << "# config_hash=" << config_hash(cfg) << '\n' << "query_id,ids,gold_logprob\n";
    for (const auto& q : ws.test) {
        out.push_back(oracle(backend, q, cfg.k));
        os << q.id << ',';
        for (std::size_t i = 0; i < out.back().ids.size(); ++i) os << (i ? " " : "") << out.back().ids[i];
        os << ',' << fmt_num(out.back().score) << '\n';
    }
    write_text(cfg.out_file("oracle.csv"), os.str());
    return out;
}

std::vector<int> widths_for(const RunConfig& cfg, int k) {
    if (k < 1) throw Error("invalid_argument", "k must be >= 1");
    std::vector<int> w;
    for (int t = 0; t < k; ++t)
        w.push_back(t < static_cast<int>(cfg.widths.size()) ? cfg.widths[t] : (cfg.widths.empty() ? 2 : cfg.widths.back()));
    return w;
}

std::vector<SweepRow> cmd_sweep_k(const RunConfig& cfg, const std::vector<int>& k_list) {
    const Workspace ws = load_workspace(cfg);
    const ToyLm backend(ws.corpus, cfg.backend);
    std::vector<SweepRow> rows;
    std::ostringstream os;
    os << "# config_hash=" << config_hash(cfg) << '\n' << "k,m,leaves_scored,stage1_seconds,accuracy\n";
    for (int k : k_list) {
        RunConfig run = cfg;
        run.k = k;
        run.widths = widths_for(cfg, k);
        run.validate();

        SweepRow row;
        row.k = k;
        row.m = candidate_count(run.widths);
        RetrievalHead head = init_head(backend);
        StateCache cache;
        Rng rng1 = stage1_rng(run);
        auto s1 = run_stage1(head, backend, cache, ws.train, run, rng1);
        row.leaves_scored = s1.leaves_scored;
        row.stage1_seconds = s1.collect_seconds;
        Rng rng2 = stage2_rng(run);
        run.ppo.source = RewardSource::reward_head;
        run_stage2(head, &s1.reward_head, backend, cache, ws.train, run, rng2);
        std::vector<IdTuple> picks;
        for (const auto& q : ws.test) picks.push_back(greedy_decode(head, backend, q, k, &cache));
        row.accuracy = accuracy(backend, picks, ws.test, &cache);
        rows.push_back(row);
        os << row.k << ',' << row.m << ',' << row.leaves_scored << ',' << fmt_num(row.stage1_seconds) << ','
           << fmt_num(row.accuracy) << '\n';
    }
    write_text(cfg.out_file("sweep_k.csv"), os.str());
    return rows;
}

}  // namespace icl
