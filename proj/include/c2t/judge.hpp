#pragma once

#include "c2t/caption.hpp"
#include "c2t/pairing.hpp"
#include "c2t/rng.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace c2t {

enum class Verdict : int { abstain = 0, first = 1, second = 2 };

enum class JudgeProfileKind { balanced, safety_focused, efficiency_focused };

struct JudgeProfile {
    JudgeProfileKind kind = JudgeProfileKind::balanced;
    double eps_ttc = 0.2;  // s
    double eps_cong = 0.3; // z-units
};

JudgeProfileKind judge_profile_from_name(const std::string& name);
const char* judge_profile_name(JudgeProfileKind k);

// Returns nullopt when a caption cannot be parsed (labeling error).
class Judge {
public:
    virtual ~Judge() = default;
    virtual std::optional<Verdict> judge(const std::string& c1, const std::string& c2) = 0;
    virtual std::string id() const = 0;
};

// Deterministic rule-based judge. Rule tables (normative):
//   balanced:           red_risk, ttc_p10 (eps_ttc), congestion (eps_cong, on
//                       z_queue + z_delay), harsh brakes, abstain
//   safety_focused:     ttc_p10 (eps_ttc / 2), red_risk, harsh brakes,
//                       congestion (eps_cong), abstain
//   efficiency_focused: congestion (eps_cong), red_risk, ttc_p10 (2 * eps_ttc),
//                       harsh brakes, abstain
// ttc prefers the higher side, congestion and brakes the lower, red_risk the
// side with flag 0 when exactly one side is flagged.
class SyntheticJudge : public Judge {
public:
    SyntheticJudge(JudgeProfile profile, PoolStats stats) : profile_(profile), stats_(stats) {}
    std::optional<Verdict> judge(const std::string& c1, const std::string& c2) override;
    std::string id() const override;

private:
    JudgeProfile profile_;
    PoolStats stats_;
};

// Label-noise wrapper modelling weaker teachers: flips decisive verdicts with
// p_flip and abstains with p_abstain.
class NoisyJudge : public Judge {
public:
    NoisyJudge(std::shared_ptr<Judge> inner, double p_flip, double p_abstain, std::uint64_t seed);
    std::optional<Verdict> judge(const std::string& c1, const std::string& c2) override;
    std::string id() const override;

private:
    std::shared_ptr<Judge> inner_;
    double p_flip_, p_abstain_;
    Rng rng_;
};

struct LabeledPair {
    Caption c1, c2;
    Observation o1, o2;
    int y = 1;          // 1 or 2; abstentions never enter the dataset
    double w = 1.0;
    std::uint64_t template_key = 0; // unordered pair of template ids
    std::string judge_meta;
};

struct PrefDataset {
    std::vector<LabeledPair> pairs;
    std::string schema_version = kCaptionSchemaVersion;
    long sampled = 0;
    long abstained = 0;
    long parse_errors = 0;
    bool low_yield_warning = false; // decisive yield < 10% of the budget
    bool pool_exhausted = false;
    double abstention_rate() const {
        return sampled > 0 ? static_cast<double>(abstained) / sampled : 0.0;
    }
};

std::uint64_t pair_template_key(std::uint64_t t1, std::uint64_t t2);

// w = 1/nu(template_key), rescaled afterwards so the dataset mean weight is 1.
void apply_frequency_weights(std::vector<LabeledPair>& pairs);

PrefDataset build_pref_dataset(const std::vector<PoolEntry>& pool, const PairingConfig& cfg,
                               const PoolStats& stats, Judge& judge, int m, Rng& rng);

// Optional external judge over HTTP with an on-disk, content-hash-keyed cache.
// POST <url>/judge with {"prompt_template_id": ..., "c1": ..., "c2": ...};
// expects {"verdict": "1"|"2"|"abstain"}.
class HttpJudge : public Judge {
public:
    HttpJudge(std::string host, int port, std::string prompt_template_id, std::string cache_dir);
    ~HttpJudge() override;
    std::optional<Verdict> judge(const std::string& c1, const std::string& c2) override;
    std::string id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace c2t
