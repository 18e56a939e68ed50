#pragma once

#include "c2t/io.hpp"
#include "c2t/judge.hpp"
#include "c2t/pairing.hpp"
#include "c2t/ppo.hpp"
#include "c2t/reward_model.hpp"
#include "c2t/sim.hpp"

#include <memory>
#include <string>
#include <vector>

namespace c2t {

enum class CaptionMode { structured, unstructured };

// Stage 1: roll out uniform-random phase decisions and caption every
// post-step observation until `target` entries are pooled.
std::vector<PoolEntry> collect_pool(const SimConfig& env, int target, CaptionMode mode,
                                    std::uint64_t seed);

// "synthetic:<balanced|safety_focused|efficiency_focused>" | "noisy:<p_flip>"
// | "http:<host>:<port>"; noisy wraps the balanced synthetic judge.
std::shared_ptr<Judge> make_judge(const std::string& judge_spec, const PoolStats& stats,
                                  std::uint64_t seed, const std::string& cache_dir);

// Intrinsic scorer over observations: captions the observation in the
// encoder's own mode and scores it.
IntrinsicFn make_intrinsic(std::shared_ptr<const Scorer> scorer);

struct PipelineArtifacts {
    std::string dir;               // per-(config,seed) artifact directory
    std::string pool_path;         // pool.jsonl
    std::string dataset_path;      // dataset.jsonl
    std::string model_path;        // reward_model.json ("" when external-only)
    std::string policy_path;       // policy.json
    std::string curve_path;        // curve.csv
    std::string eval_path;         // eval.csv
    double heldout_accuracy = 0.0; // reward-model held-out accuracy (0 when skipped)
    EpisodeMetrics eval;           // greedy-policy evaluation episode
    int cache_hits = 0;
};

// Runs collect -> label -> train-reward -> train-policy -> evaluate, skipping
// Stages 1-2 for external-only configs. Stage outputs are cached inside
// out_dir keyed by config hash + seed; re-runs reuse existing artifacts.
PipelineArtifacts run_pipeline(const io::RunConfig& cfg, std::uint64_t seed,
                               const std::string& out_dir);

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    EpisodeMetrics metrics;
    double heldout_accuracy = 0.0;
    bool failed = false;
    std::string error;
};

struct AblationTable {
    std::string matrix;
    std::vector<AblationRow> rows;
    bool any_failed() const {
        for (const auto& r : rows)
            if (r.failed) return true;
        return false;
    }
};

// Expands a matrix id in {A1, A2, A3, B1, B2, C2, D1, D2} against the base
// config, runs every (variant, seed) cell and collects the comparison rows.
// Cells run on up to `workers` threads.
std::vector<std::pair<std::string, io::RunConfig>> ablation_variants(const std::string& matrix,
                                                                     const io::RunConfig& base);

AblationTable run_ablation(const std::string& matrix, const io::RunConfig& base,
                           const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                           int workers);

// Aggregate CSV (variant x metric mean/std, sorted by mean ATT) plus a
// human-readable summary; B1 tables additionally get a Pareto scatter CSV.
void write_ablation_report(const AblationTable& table, const std::string& out_dir);

// One-sided sign test P(X >= k | n, 1/2): used when a directional comparison
// needs a second pass at a larger seed count.
double sign_test_p(int successes, int n);

} // namespace c2t
