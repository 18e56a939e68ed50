#pragma once

#include "c2t/caption.hpp"
#include "c2t/rng.hpp"
#include "c2t/types.hpp"

#include <vector>

namespace c2t {

struct PoolEntry {
    Observation obs;
    Caption caption;
};

// z-score statistics over the observation pool, computed once before sampling.
struct PoolStats {
    double mean_q_mu = 0.0, mean_q_sd = 1.0;
    double delay_mu = 0.0, delay_sd = 1.0;
    double ttc10_mu = 0.0, ttc10_sd = 1.0;
    double ttc50_mu = 0.0, ttc50_sd = 1.0;
    double brake_mu = 0.0, brake_sd = 1.0;

    static PoolStats from_pool(const std::vector<PoolEntry>& pool);
};

struct PairingConfig {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma_pair = 1.0;
    double delta1 = 10.0;  // s
    double delta2 = 120.0; // s
    void validate() const;
};

struct CandidatePair {
    int a = 0, b = 0; // pool indices, a != b
    double weight = 0.0;
};

double mean_queue(const Observation& o);

// |z(mean q)_a - z(mean q)_b| + |z(delay)_a - z(delay)_b|
double congestion_contrast(const Observation& a, const Observation& b, const PoolStats& s);

// same over {ttc_p10, ttc_p50, h_brake}
double safety_contrast(const Observation& a, const Observation& b, const PoolStats& s);

// alpha*Dcong + beta*Dsafety + gamma*1{same intersection, |dt| in [delta1, delta2]}
double pair_weight_unnorm(const Observation& a, const Observation& b, const PairingConfig& cfg,
                          const PoolStats& s);

struct PairSample {
    std::vector<CandidatePair> pairs;
    bool exhausted = false; // fewer positive-weight combinations than requested
};

// Draws M distinct unordered pairs with probability proportional to
// pair_weight_unnorm, by rejection against an upper weight bound.
PairSample sample_pairs(const std::vector<PoolEntry>& pool, int m, const PairingConfig& cfg,
                        const PoolStats& stats, Rng& rng);

} // namespace c2t
