#include "c2t/caption.hpp"
#include "c2t/io.hpp"
#include "c2t/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace c2t;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!tok.empty()) out.push_back(std::stoull(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) out.push_back(1);
    return out;
}

io::RunConfig load_cfg(const std::string& config_path) {
    if (config_path.empty()) return io::RunConfig{};
    return io::load_run_config(config_path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"c2t: caption-based preference rewards for traffic-signal control"};
    app.require_subcommand(1);

    std::string config_path, seed_arg = "1", out_dir = "artifacts", judge_spec;
    int workers = 1;
    app.add_option("--config", config_path, "JSON run configuration file");
    app.add_option("--seed", seed_arg, "seed or comma-separated seed list");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--workers", workers, "worker threads for ablation cells");
    app.add_option("--judge", judge_spec, "judge backend: synthetic:<profile>|noisy:<p>|http:<host>:<port>");

    auto* c_sim = app.add_subcommand("simulate", "run one fixed-policy episode and print metrics");
    auto* c_collect = app.add_subcommand("collect", "build the observation pool (Stage 1)");
    auto* c_label = app.add_subcommand("label", "sample pairs and label them (Stage 2)");
    auto* c_rm = app.add_subcommand("train-reward", "train the preference reward model (Stage 3)");
    auto* c_pol = app.add_subcommand("train-policy", "train the signal policy (Stage 4)");
    auto* c_eval = app.add_subcommand("evaluate", "evaluate a trained policy");
    auto* c_ablate = app.add_subcommand("ablate", "run an ablation matrix");
    auto* c_report = app.add_subcommand("report", "aggregate ablation artifacts into a report");

    std::string matrix;
    c_ablate->add_option("matrix", matrix, "matrix id: A1|A2|A3|B1|B2|C2|D1|D2")->required();
    std::vector<std::string> report_inputs;
    c_report->add_option("dirs", report_inputs, "ablation row CSVs to aggregate");

    CLI11_PARSE(app, argc, argv);

    try {
        io::RunConfig cfg = load_cfg(config_path);
        if (!judge_spec.empty()) cfg.judge = judge_spec;
        auto seeds = parse_seeds(seed_arg);
        fs::create_directories(out_dir);

        if (c_sim->parsed()) {
            SimConfig sc = cfg.sim;
            sc.seed = seeds[0];
            Simulator sim(sc);
            EpisodeRecorder rec;
            int horizon = static_cast<int>(sc.horizon_s);
            for (int t = 0; t < horizon; ++t) {
                auto obs = sim.observe();
                std::vector<PhaseId> actions;
                for (int i = 0; i < sim.num_intersections(); ++i)
                    actions.push_back(obs[i].phase.phase); // fixed-time: always extend -> cyclic? keep
                // fixed-time baseline: cycle phases in order at every decision
                auto needs = sim.needs_action();
                for (int i = 0; i < sim.num_intersections(); ++i)
                    if (needs[i])
                        actions[i] = static_cast<PhaseId>((static_cast<int>(obs[i].phase.phase) + 1) % 4);
                StepEvents ev;
                sim.step(actions, &ev);
                rec.record_step(sim, ev);
            }
            auto m = rec.metrics(sim, sc.horizon_s);
            io::write_metrics_csv((fs::path(out_dir) / "simulate.csv").string(), {{"fixed_time", m}});
            std::printf("simulate: att=%s aql=%.3f throughput=%.1f ttc_p10=%.2f oscillation=%.3f\n",
                        m.att ? io::fixed(*m.att, 2).c_str() : "n/a", m.aql, m.throughput, m.ttc_p10,
                        m.oscillation);
            std::printf("wrote %s\n", (fs::path(out_dir) / "simulate.csv").string().c_str());
            return 0;
        }

        if (c_collect->parsed()) {
            CaptionMode mode = cfg.feature_mode == "unstructured" ? CaptionMode::unstructured
                                                                  : CaptionMode::structured;
            auto pool = collect_pool(cfg.sim, cfg.pool_size, mode, seeds[0]);
            std::string path = (fs::path(out_dir) / "pool.jsonl").string();
            io::save_pool(path, pool);
            std::printf("collect: %zu entries -> %s\n", pool.size(), path.c_str());
            return 0;
        }

        if (c_label->parsed()) {
            std::string pool_path = (fs::path(out_dir) / "pool.jsonl").string();
            auto pool = io::load_pool(pool_path);
            auto stats = PoolStats::from_pool(pool);
            auto judge = make_judge(cfg.judge, stats, seeds[0],
                                    (fs::path(out_dir) / "http-cache").string());
            Rng rng = Rng::split(seeds[0], 0x1ABE1);
            auto ds = build_pref_dataset(pool, cfg.pairing, stats, *judge, cfg.pair_budget, rng);
            std::string path = (fs::path(out_dir) / "dataset.jsonl").string();
            io::save_dataset(path, ds);
            std::printf("label: %zu decisive pairs (sampled %ld, abstained %ld, parse errors %ld)%s -> %s\n",
                        ds.pairs.size(), ds.sampled, ds.abstained, ds.parse_errors,
                        ds.low_yield_warning ? " [low-yield warning]" : "", path.c_str());
            return ds.pairs.empty() ? 1 : 0;
        }

        if (c_rm->parsed()) {
            auto pool = io::load_pool((fs::path(out_dir) / "pool.jsonl").string());
            auto ds = io::load_dataset((fs::path(out_dir) / "dataset.jsonl").string());
            auto spec = EncoderSpec::fit(feature_kind_from_name(cfg.feature_mode), pool);
            spec.drop_risk = cfg.drop_risk;
            spec.drop_congestion = cfg.drop_congestion;
            TrainOptions topt;
            topt.hidden = cfg.rm_hidden;
            topt.epochs = cfg.rm_epochs;
            topt.seed = seeds[0];
            auto tr = train_reward_model(ds, spec, ScorerHyper{}, topt);
            auto ev = evaluate_offline(tr.params, tr.heldout);
            std::string path = (fs::path(out_dir) / "reward_model.json").string();
            io::save_reward_model(path, tr.params);
            std::string curve = "epoch,train_loss,heldout_accuracy\n";
            for (const auto& p : tr.curve)
                curve += std::to_string(p.epoch) + "," + io::fixed(p.train_loss) + "," +
                         io::fixed(p.heldout_accuracy) + "\n";
            io::write_text((fs::path(out_dir) / "reward_curve.csv").string(), curve);
            std::printf("train-reward: heldout accuracy %.4f, auc %.4f -> %s\n",
                        ev.pairwise_accuracy, ev.auc, path.c_str());
            return 0;
        }

        if (c_pol->parsed()) {
            IntrinsicFn rphi;
            std::string model_path = (fs::path(out_dir) / "reward_model.json").string();
            if (cfg.shaping.use_intrinsic) {
                if (!fs::exists(model_path))
                    throw io::IoError("train-policy: missing " + model_path +
                                      "; run train-reward first or disable the intrinsic stream");
                auto model = io::load_reward_model(model_path);
                rphi = make_intrinsic(std::make_shared<Scorer>(Scorer::single(model)));
            }
            auto result = train_policy(cfg.sim, rphi, cfg.shaping, cfg.ppo, seeds[0]);
            std::string path = (fs::path(out_dir) / "policy.json").string();
            io::save_policy(path, result.policy, result.value);
            io::write_training_curve_csv((fs::path(out_dir) / "curve.csv").string(), result.curve);
            const auto& last = result.curve.empty() ? IterationStats{} : result.curve.back();
            std::printf("train-policy: %d iterations, final att=%s ttc_p10=%.2f -> %s\n",
                        static_cast<int>(result.curve.size()),
                        last.metrics.att ? io::fixed(*last.metrics.att, 2).c_str() : "n/a",
                        last.metrics.ttc_p10, path.c_str());
            return 0;
        }

        if (c_eval->parsed()) {
            PolicyParams policy;
            ValueParams value;
            io::load_policy((fs::path(out_dir) / "policy.json").string(), policy, value);
            auto m = evaluate_policy_stochastic(cfg.sim, policy, cfg.ppo.horizon, seeds[0]);
            io::write_metrics_csv((fs::path(out_dir) / "eval.csv").string(), {{"policy", m}});
            std::printf("evaluate: att=%s throughput=%.1f ttc_p10=%.2f brakes/km=%.3f\n",
                        m.att ? io::fixed(*m.att, 2).c_str() : "n/a", m.throughput, m.ttc_p10,
                        m.brakes_per_km);
            return 0;
        }

        if (c_ablate->parsed()) {
            auto table = run_ablation(matrix, cfg, seeds, out_dir, workers);
            write_ablation_report(table, out_dir);
            for (const auto& r : table.rows)
                if (r.failed)
                    std::fprintf(stderr, "cell %s seed %llu FAILED: %s\n", r.variant.c_str(),
                                 static_cast<unsigned long long>(r.seed), r.error.c_str());
            std::printf("ablate %s: %zu cells, report in %s\n", matrix.c_str(), table.rows.size(),
                        out_dir.c_str());
            return table.any_failed() ? 1 : 0;
        }

        if (c_report->parsed()) {
            if (report_inputs.empty()) {
                std::fprintf(stderr, "report: no inputs given, nothing to aggregate\n");
                io::write_text((fs::path(out_dir) / "report.txt").string(), "no inputs\n");
                return 0;
            }
            std::string combined;
            bool first = true;
            for (const auto& in : report_inputs) {
                std::string text = io::read_text(in);
                if (!first) {
                    auto nl = text.find('\n');
                    if (nl != std::string::npos) text = text.substr(nl + 1);
                }
                combined += text;
                first = false;
            }
            std::string path = (fs::path(out_dir) / "report.csv").string();
            io::write_text(path, combined);
            std::printf("report: %zu inputs -> %s\n", report_inputs.size(), path.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
