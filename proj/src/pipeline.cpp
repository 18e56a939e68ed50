#include "c2t/pipeline.hpp"

#include "c2t/caption.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace c2t {

std::vector<PoolEntry> collect_pool(const SimConfig& env, int target, CaptionMode mode,
                                    std::uint64_t seed) {
    std::vector<PoolEntry> pool;
    pool.reserve(target);
    Rng act_rng = Rng::split(seed, 0xC0113C7);
    int episode = 0;
    while (static_cast<int>(pool.size()) < target) {
        SimConfig ep_cfg = env;
        ep_cfg.seed = fnv1a_u64(episode, fnv1a_u64(seed));
        Simulator sim(ep_cfg);
        const int n_inter = sim.num_intersections();
        const int horizon = static_cast<int>(env.horizon_s);
        for (int t = 0; t < horizon && static_cast<int>(pool.size()) < target; ++t) {
            auto needs = sim.needs_action();
            auto obs = sim.observe();
            std::vector<PhaseId> actions(n_inter);
            // Round-robin service with occasional random jumps: keeps the pool
            // centred on plausibly controlled traffic (every approach gets
            // served) while still visiting congested and risky states.
            for (int i = 0; i < n_inter; ++i) {
                if (!needs[i]) {
                    actions[i] = obs[i].phase.phase;
                } else if (act_rng.uniform01() < 0.25) {
                    actions[i] = static_cast<PhaseId>(act_rng.uniform_int(4));
                } else {
                    actions[i] =
                        static_cast<PhaseId>((static_cast<int>(obs[i].phase.phase) + 1) % 4);
                }
            }
            sim.step(actions);
            auto post = sim.observe();
            for (int i = 0; i < n_inter && static_cast<int>(pool.size()) < target; ++i) {
                PoolEntry e;
                e.obs = post[i];
                if (mode == CaptionMode::structured) {
                    e.caption = render_caption(post[i]);
                } else {
                    std::uint64_t style = fnv1a_u64(static_cast<std::uint64_t>(pool.size()),
                                                    fnv1a_u64(seed, 0x57E11E));
                    e.caption.text = unstructured_caption(post[i], style);
                    e.caption.template_id = caption_template_id(post[i]);
                }
                pool.push_back(std::move(e));
            }
        }
        ++episode;
        if (episode > 10000) throw std::runtime_error("collect_pool: cannot reach target size");
    }
    return pool;
}

std::shared_ptr<Judge> make_judge(const std::string& judge_spec, const PoolStats& stats,
                                  std::uint64_t seed, const std::string& cache_dir) {
    auto colon = judge_spec.find(':');
    std::string kind = judge_spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : judge_spec.substr(colon + 1);
    if (kind == "synthetic") {
        JudgeProfile prof;
        prof.kind = judge_profile_from_name(arg.empty() ? "balanced" : arg);
        return std::make_shared<SyntheticJudge>(prof, stats);
    }
    if (kind == "noisy") {
        double p_flip = arg.empty() ? 0.1 : std::stod(arg);
        JudgeProfile prof;
        auto inner = std::make_shared<SyntheticJudge>(prof, stats);
        return std::make_shared<NoisyJudge>(inner, p_flip, 0.0, fnv1a_u64(seed, 0x901531));
    }
    if (kind == "http") {
        std::string rest = arg;
        if (rest.rfind("//", 0) == 0) rest = rest.substr(2);
        auto port_sep = rest.rfind(':');
        std::string host = rest.substr(0, port_sep);
        int port = port_sep == std::string::npos ? 80 : std::stoi(rest.substr(port_sep + 1));
        return std::make_shared<HttpJudge>(host, port, "c2t-judge-v1", cache_dir);
    }
    throw ConfigError("unknown judge spec: " + judge_spec);
}

IntrinsicFn make_intrinsic(std::shared_ptr<const Scorer> scorer) {
    return [scorer](const Observation& obs) -> double {
        const EncoderSpec& enc = scorer->parts.front().encoder;
        if (enc.kind == FeatureKind::unstructured) {
            std::uint64_t style = fnv1a_u64(static_cast<std::uint64_t>(obs.time * 16),
                                            fnv1a_u64(obs.intersection_id));
            return scorer->score_obs(obs, unstructured_caption(obs, style));
        }
        return scorer->score_obs(obs, render_caption(obs).text);
    };
}

namespace {

std::uint64_t hash_str(const std::string& s, std::uint64_t h0 = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h0);
}

std::string hex16(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Sub-config hashes so later stages can reuse earlier stage artifacts across
// variants that only differ downstream.
struct StageKeys {
    std::string pool, dataset, model, policy;
};

StageKeys stage_keys(const io::RunConfig& cfg, std::uint64_t seed) {
    std::ostringstream sim;
    sim << cfg.sim.grid_rows << ',' << cfg.sim.grid_cols << ',' << cfg.sim.link_length << ','
        << cfg.sim.lanes_per_movement << ',' << cfg.sim.green_s << ',' << cfg.sim.yellow_s << ','
        << cfg.sim.allred_s << ',' << cfg.sim.arrival_rate_per_entry << ',' << cfg.sim.horizon_s;
    if (cfg.sim.surge)
        sim << ",surge:" << cfg.sim.surge->factor << ':' << cfg.sim.surge->start_s << ':'
            << cfg.sim.surge->ramp_s;
    if (cfg.sim.diurnal) {
        sim << ",diurnal";
        for (auto& [t, m] : cfg.sim.diurnal->points) sim << ':' << t << ':' << m;
    }
    StageKeys k;
    std::uint64_t h = hash_str(sim.str());
    h = fnv1a_u64(seed, h);
    h = hash_str("," + cfg.feature_mode + "," + std::to_string(cfg.pool_size), h);
    k.pool = hex16(h);

    std::ostringstream lbl;
    lbl << cfg.pairing.alpha << ',' << cfg.pairing.beta << ',' << cfg.pairing.gamma_pair << ','
        << cfg.pairing.delta1 << ',' << cfg.pairing.delta2 << ',' << cfg.judge << ','
        << cfg.pair_budget;
    h = hash_str(lbl.str(), h);
    k.dataset = hex16(h);

    std::ostringstream rm;
    rm << cfg.drop_risk << ',' << cfg.drop_congestion << ',' << cfg.rm_hidden << ','
       << cfg.rm_epochs;
    h = hash_str(rm.str(), h);
    k.model = hex16(h);

    std::ostringstream pol;
    pol << cfg.shaping.tau_ttc << ',' << cfg.shaping.a_max_mask << ',' << cfg.shaping.kappa << ','
        << cfg.shaping.lambda_max << ',' << cfg.shaping.warmup_iters << ',' << cfg.shaping.clip_c
        << ',' << cfg.shaping.use_intrinsic << ',' << cfg.shaping.use_mask << ','
        << cfg.shaping.use_norm << ',' << cfg.shaping.use_schedule << ',' << cfg.ppo.lr << ','
        << cfg.ppo.buffer << ',' << cfg.ppo.sample << ',' << cfg.ppo.hidden << ',' << cfg.ppo.clip
        << ',' << cfg.ppo.batch << ',' << cfg.ppo.minibatches << ',' << cfg.ppo.entropy_coef << ','
        << cfg.ppo.gae_lambda << ',' << cfg.ppo.gamma_discount << ',' << cfg.ppo.iterations << ','
        << cfg.ppo.episodes << ',' << cfg.ppo.horizon << ',' << cfg.ppo.lambda_delay;
    h = hash_str(pol.str(), h);
    k.policy = hex16(h);
    return k;
}

// Write-to-temp + rename so concurrent cells building the same stage artifact
// never expose a partial file.
template <typename WriteFn>
void write_atomic(const std::string& path, WriteFn&& fn) {
    std::ostringstream tmp;
    tmp << path << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
    fn(tmp.str());
    fs::rename(tmp.str(), path);
}

} // namespace

PipelineArtifacts run_pipeline(const io::RunConfig& cfg, std::uint64_t seed,
                               const std::string& out_dir) {
    cfg.sim.validate();
    cfg.pairing.validate();
    cfg.shaping.validate();
    cfg.ppo.validate();

    PipelineArtifacts art;
    StageKeys keys = stage_keys(cfg, seed);
    fs::path stages = fs::path(out_dir) / "stages";
    fs::path run_dir = fs::path(out_dir) / ("run-" + io::config_hash(cfg) + "-s" + std::to_string(seed));
    fs::create_directories(stages);
    fs::create_directories(run_dir);
    art.dir = run_dir.string();

    bool external_only = !cfg.shaping.use_intrinsic && !cfg.shaping.use_mask;
    FeatureKind fkind = feature_kind_from_name(cfg.feature_mode);
    CaptionMode cmode = fkind == FeatureKind::unstructured ? CaptionMode::unstructured
                                                           : CaptionMode::structured;

    std::shared_ptr<const Scorer> scorer;
    if (!external_only) {
        // Stage 1: pool
        fs::path pool_path = stages / ("pool-" + keys.pool + ".jsonl");
        std::vector<PoolEntry> pool;
        if (fs::exists(pool_path)) {
            pool = io::load_pool(pool_path.string());
            ++art.cache_hits;
        } else {
            pool = collect_pool(cfg.sim, cfg.pool_size, cmode, seed);
            write_atomic(pool_path.string(), [&](const std::string& p) { io::save_pool(p, pool); });
        }
        art.pool_path = pool_path.string();

        // Stage 2: labeled preference dataset
        fs::path ds_path = stages / ("dataset-" + keys.dataset + ".jsonl");
        PrefDataset ds;
        PoolStats stats = PoolStats::from_pool(pool);
        if (fs::exists(ds_path)) {
            ds = io::load_dataset(ds_path.string());
            ++art.cache_hits;
        } else {
            auto judge = make_judge(cfg.judge, stats, seed, (stages / "http-cache").string());
            Rng rng = Rng::split(seed, 0x1ABE1);
            ds = build_pref_dataset(pool, cfg.pairing, stats, *judge, cfg.pair_budget, rng);
            write_atomic(ds_path.string(), [&](const std::string& p) { io::save_dataset(p, ds); });
        }
        art.dataset_path = ds_path.string();
        if (ds.pairs.empty())
            throw TrainingError("pipeline: preference dataset is empty; judge abstained on every pair");

        // Stage 3: reward model
        fs::path model_path = stages / ("model-" + keys.model + ".json");
        RewardModelParams model;
        if (fs::exists(model_path)) {
            model = io::load_reward_model(model_path.string());
            ++art.cache_hits;
            EncoderSpec spec = model.encoder;
            auto enc = encode_dataset(ds, spec);
            Rng hrng = Rng::split(seed, 0x7EA17EA1);
            hrng.shuffle(enc); // same split as training
            std::size_t n_held = std::max<std::size_t>(1, static_cast<std::size_t>(enc.size() * 0.2));
            std::vector<EncodedPair> held(enc.end() - n_held, enc.end());
            art.heldout_accuracy = evaluate_offline(model, held).pairwise_accuracy;
        } else {
            EncoderSpec spec = EncoderSpec::fit(fkind, pool);
            spec.drop_risk = cfg.drop_risk;
            spec.drop_congestion = cfg.drop_congestion;
            TrainOptions topt;
            topt.hidden = cfg.rm_hidden;
            topt.epochs = cfg.rm_epochs;
            topt.seed = seed;
            auto tr = train_reward_model(ds, spec, ScorerHyper{}, topt);
            model = tr.params;
            art.heldout_accuracy = evaluate_offline(model, tr.heldout).pairwise_accuracy;
            write_atomic(model_path.string(),
                         [&](const std::string& p) { io::save_reward_model(p, model); });
        }
        art.model_path = model_path.string();
        scorer = std::make_shared<Scorer>(Scorer::single(model));
    }

    // Stage 4: policy training
    fs::path policy_path = stages / ("policy-" + keys.policy + ".json");
    fs::path curve_path = run_dir / "curve.csv";
    PolicyParams policy;
    ValueParams value;
    if (fs::exists(policy_path) && fs::exists(curve_path)) {
        io::load_policy(policy_path.string(), policy, value);
        ++art.cache_hits;
    } else {
        IntrinsicFn rphi;
        if (scorer && cfg.shaping.use_intrinsic) rphi = make_intrinsic(scorer);
        auto result = train_policy(cfg.sim, rphi, cfg.shaping, cfg.ppo, seed);
        policy = result.policy;
        value = result.value;
        write_atomic(policy_path.string(),
                     [&](const std::string& p) { io::save_policy(p, policy, value); });
        io::write_training_curve_csv(curve_path.string(), result.curve);
    }
    art.policy_path = policy_path.string();
    art.curve_path = curve_path.string();

    // Stage 5: evaluation with the trained (stochastic) policy, averaged over
    // a few arrival seeds to damp single-episode demand noise
    std::vector<EpisodeMetrics> evals;
    for (std::uint64_t k = 0; k < 9; ++k)
        evals.push_back(evaluate_policy_stochastic(cfg.sim, policy, cfg.ppo.horizon,
                                                   fnv1a_u64(seed, 0xE7A1 + k)));
    art.eval = average_metrics(evals);
    fs::path eval_path = run_dir / "eval.csv";
    io::write_metrics_csv(eval_path.string(), {{"policy", art.eval}});
    art.eval_path = eval_path.string();
    return art;
}

std::vector<std::pair<std::string, io::RunConfig>> ablation_variants(const std::string& matrix,
                                                                     const io::RunConfig& base) {
    std::vector<std::pair<std::string, io::RunConfig>> out;
    auto add = [&](const std::string& name, auto&& mutate) {
        io::RunConfig c = base;
        mutate(c);
        out.emplace_back(name, std::move(c));
    };
    if (matrix == "A1") {
        // The external-only baseline is plain pressure-reward PPO with the
        // whole shaping apparatus off; no_intrinsic keeps normalization on,
        // so the pair isolates the intrinsic stream from the stream plumbing.
        add("external_only", [](io::RunConfig& c) {
            c.shaping.use_intrinsic = false;
            c.shaping.use_mask = false;
            c.shaping.use_norm = false;
            c.shaping.use_schedule = false;
        });
        add("no_intrinsic", [](io::RunConfig& c) { c.shaping.use_intrinsic = false; });
        add("no_mask", [](io::RunConfig& c) { c.shaping.use_mask = false; });
        add("full", [](io::RunConfig&) {});
    } else if (matrix == "A2") {
        add("structured_fusion", [](io::RunConfig& c) { c.feature_mode = "structured_fusion"; });
        add("numeric_only", [](io::RunConfig& c) { c.feature_mode = "numeric_only"; });
        add("unstructured", [](io::RunConfig& c) { c.feature_mode = "unstructured"; });
    } else if (matrix == "A3") {
        add("full", [](io::RunConfig&) {});
        add("no_norm", [](io::RunConfig& c) { c.shaping.use_norm = false; });
        add("no_schedule", [](io::RunConfig& c) { c.shaping.use_schedule = false; });
    } else if (matrix == "B1") {
        for (const char* prof : {"balanced", "safety_focused", "efficiency_focused"})
            add(prof, [prof](io::RunConfig& c) { c.judge = std::string("synthetic:") + prof; });
    } else if (matrix == "B2") {
        add("noise_0.00", [](io::RunConfig& c) { c.judge = "synthetic:balanced"; });
        add("noise_0.05", [](io::RunConfig& c) { c.judge = "noisy:0.05"; });
        add("noise_0.15", [](io::RunConfig& c) { c.judge = "noisy:0.15"; });
    } else if (matrix == "C2") {
        add("all_fields", [](io::RunConfig&) {});
        add("drop_risk", [](io::RunConfig& c) { c.drop_risk = true; });
        add("drop_congestion", [](io::RunConfig& c) { c.drop_congestion = true; });
    } else if (matrix == "D1") {
        for (int m : {100, 250, 500, 1000, 2000, 4000})
            add("M_" + std::to_string(m), [m](io::RunConfig& c) { c.pair_budget = m; });
    } else if (matrix == "D2") {
        for (double lm : {0.3, 0.5, 0.7})
            for (double tt : {1.3, 1.5, 1.8}) {
                char name[48];
                std::snprintf(name, sizeof(name), "lmax_%.1f_tttc_%.1f", lm, tt);
                add(name, [lm, tt](io::RunConfig& c) {
                    c.shaping.lambda_max = lm;
                    c.shaping.tau_ttc = tt;
                });
            }
    } else {
        throw ConfigError("unknown ablation matrix: " + matrix);
    }
    return out;
}

AblationTable run_ablation(const std::string& matrix, const io::RunConfig& base,
                           const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                           int workers) {
    auto variants = ablation_variants(matrix, base);
    AblationTable table;
    table.matrix = matrix;
    struct Cell {
        std::string variant;
        io::RunConfig cfg;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& [name, cfg] : variants)
        for (auto s : seeds) cells.push_back({name, cfg, s});
    table.rows.resize(cells.size());

    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            AblationRow row;
            row.variant = cells[i].variant;
            row.seed = cells[i].seed;
            try {
                auto art = run_pipeline(cells[i].cfg, cells[i].seed, out_dir);
                row.metrics = art.eval;
                row.heldout_accuracy = art.heldout_accuracy;
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
            table.rows[i] = std::move(row);
        }
    };
    int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return table;
}

void write_ablation_report(const AblationTable& table, const std::string& out_dir) {
    fs::create_directories(out_dir);
    fs::path csv = fs::path(out_dir) / ("ablation-" + table.matrix + ".csv");
    fs::path rows_csv = fs::path(out_dir) / ("ablation-" + table.matrix + "-rows.csv");

    {
        std::string body = "variant,seed,att,throughput,ttc_p10,brakes_per_km,heldout_accuracy,status\n";
        for (const auto& r : table.rows) {
            body += r.variant + "," + std::to_string(r.seed) + ",";
            body += (r.metrics.att ? io::fixed(*r.metrics.att) : "") + ",";
            body += io::fixed(r.metrics.throughput) + "," + io::fixed(r.metrics.ttc_p10) + ",";
            body += io::fixed(r.metrics.brakes_per_km) + "," + io::fixed(r.heldout_accuracy) + ",";
            body += r.failed ? "FAILED:" + r.error : "ok";
            body += "\n";
        }
        io::write_text(rows_csv.string(), body);
    }

    struct Agg {
        std::vector<double> att, thru, ttc, brakes, acc;
    };
    std::vector<std::pair<std::string, Agg>> aggs;
    for (const auto& r : table.rows) {
        auto it = std::find_if(aggs.begin(), aggs.end(),
                               [&](const auto& a) { return a.first == r.variant; });
        if (it == aggs.end()) {
            aggs.emplace_back(r.variant, Agg{});
            it = aggs.end() - 1;
        }
        if (r.failed) continue;
        if (r.metrics.att) it->second.att.push_back(*r.metrics.att);
        it->second.thru.push_back(r.metrics.throughput);
        it->second.ttc.push_back(r.metrics.ttc_p10);
        it->second.brakes.push_back(r.metrics.brakes_per_km);
        it->second.acc.push_back(r.heldout_accuracy);
    }
    auto mean = [](const std::vector<double>& v) {
        return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    };
    auto stdev = [&](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        double m = mean(v), s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / (v.size() - 1));
    };
    std::sort(aggs.begin(), aggs.end(),
              [&](const auto& a, const auto& b) { return mean(a.second.att) < mean(b.second.att); });

    std::string body =
        "variant,att_mean,att_std,throughput_mean,throughput_std,ttc_p10_mean,ttc_p10_std,"
        "brakes_per_km_mean,brakes_per_km_std,heldout_accuracy_mean\n";
    std::string summary = "Ablation " + table.matrix + " (variants sorted by mean ATT):\n";
    for (const auto& [name, a] : aggs) {
        body += name + "," + io::fixed(mean(a.att)) + "," + io::fixed(stdev(a.att)) + "," +
                io::fixed(mean(a.thru)) + "," + io::fixed(stdev(a.thru)) + "," +
                io::fixed(mean(a.ttc)) + "," + io::fixed(stdev(a.ttc)) + "," +
                io::fixed(mean(a.brakes)) + "," + io::fixed(stdev(a.brakes)) + "," +
                io::fixed(mean(a.acc)) + "\n";
        summary += "  " + name + ": ATT " + io::fixed(mean(a.att), 2) + " +/- " +
                   io::fixed(stdev(a.att), 2) + " s, throughput " + io::fixed(mean(a.thru), 1) +
                   " veh/h, TTC p10 " + io::fixed(mean(a.ttc), 2) + " s, brakes/km " +
                   io::fixed(mean(a.brakes), 3) + "\n";
    }
    io::write_text(csv.string(), body);
    io::write_text((fs::path(out_dir) / ("summary-" + table.matrix + ".txt")).string(), summary);

    if (table.matrix == "B1") {
        std::string pareto = "profile,seed,att,ttc_p10\n";
        for (const auto& r : table.rows) {
            if (r.failed || !r.metrics.att) continue;
            pareto += r.variant + "," + std::to_string(r.seed) + "," + io::fixed(*r.metrics.att) +
                      "," + io::fixed(r.metrics.ttc_p10) + "\n";
        }
        io::write_text((fs::path(out_dir) / "pareto-B1.csv").string(), pareto);
    }
}

double sign_test_p(int successes, int n) {
    if (n <= 0) return 1.0;
    double p = 0.0;
    for (int k = successes; k <= n; ++k) {
        // log C(n,k) via lgamma for numerical safety
        double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(logc - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

} // namespace c2t
