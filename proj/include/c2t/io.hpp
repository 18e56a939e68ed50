#pragma once

#include "c2t/judge.hpp"
#include "c2t/pairing.hpp"
#include "c2t/ppo.hpp"
#include "c2t/reward_model.hpp"
#include "c2t/shaping.hpp"
#include "c2t/types.hpp"

#include <string>
#include <vector>

namespace c2t::io {

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Fixed-precision decimal rendering (snprintf "%.*f") so CSV/JSON artifacts
// are byte-stable across runs and platforms.
std::string fixed(double v, int precision = 6);

// --- observation pool (JSONL, one entry per line) ---------------------------
void save_pool(const std::string& path, const std::vector<PoolEntry>& pool);
std::vector<PoolEntry> load_pool(const std::string& path);

// --- preference dataset (JSONL; first line holds dataset metadata) ----------
void save_dataset(const std::string& path, const PrefDataset& ds);
PrefDataset load_dataset(const std::string& path);

// --- model / policy files (JSON) ---------------------------------------------
void save_reward_model(const std::string& path, const RewardModelParams& params);
RewardModelParams load_reward_model(const std::string& path);

void save_policy(const std::string& path, const PolicyParams& policy, const ValueParams& value);
void load_policy(const std::string& path, PolicyParams& policy, ValueParams& value);

// --- run configuration --------------------------------------------------------
struct RunConfig {
    SimConfig sim;
    PairingConfig pairing;
    ShapingConfig shaping;
    PPOConfig ppo;
    std::string feature_mode = "structured_fusion"; // numeric_only | unstructured | structured_fusion
    bool drop_risk = false;
    bool drop_congestion = false;
    std::string judge = "synthetic:balanced"; // synthetic:<profile> | noisy:<p> | http:<url>
    int pool_size = 4000;
    int pair_budget = 1000; // M
    int rm_hidden = 32;
    int rm_epochs = 50;
};

RunConfig load_run_config(const std::string& path); // JSON file; missing keys keep defaults
std::string run_config_json(const RunConfig& cfg);  // canonical (sorted-key) dump
std::string config_hash(const RunConfig& cfg);      // 16-hex-digit content hash

// --- metrics CSV --------------------------------------------------------------
// Header: iter,att,aql,awt,throughput,ttc_p10,ttc_p25,brakes_per_km,
//         oscillation,mask_rate,mean_r1,mean_r2,mean_r3
void write_training_curve_csv(const std::string& path, const std::vector<IterationStats>& curve);

// Header: name,att,aql,awt,throughput,ttc_p10,ttc_p25,brakes_per_km,oscillation
void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, EpisodeMetrics>>& rows);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

} // namespace c2t::io
