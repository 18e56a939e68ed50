#pragma once

#include "c2t/types.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace c2t {

struct ShapingConfig {
    double tau_ttc = 1.5;      // seconds; minimum acceptable ttc_p10
    double a_max_mask = 3.0;   // m/s^2; |a_near| bound for the mask
    double kappa = 1.0;        // safety penalty weight
    double lambda_max = 0.5;   // terminal intrinsic mixing coefficient
    int warmup_iters = 20;     // linear warm-up length for lambda
    double clip_c = 5.0;       // normalized stream clamp, +/- clip_c
    double eps = 1e-8;

    bool use_intrinsic = true;
    bool use_mask = true;
    bool use_norm = true;
    bool use_schedule = true;

    void validate() const {
        if (tau_ttc <= 0) throw ConfigError("shaping.tau_ttc must be > 0");
        if (a_max_mask <= 0) throw ConfigError("shaping.a_max_mask must be > 0");
        if (kappa < 0) throw ConfigError("shaping.kappa must be >= 0");
        if (lambda_max < 0 || lambda_max > 1) throw ConfigError("shaping.lambda_max must be in [0,1]");
        if (warmup_iters < 1) throw ConfigError("shaping.warmup_iters must be >= 1");
        if (clip_c <= 0) throw ConfigError("shaping.clip_c must be > 0");
    }
};

// 1 when the local state is safe enough for intrinsic credit:
// ttc_p10 >= tau_ttc, |a_near| <= a_max_mask and no red-running risk.
inline double safety_mask(const Observation& obs, const ShapingConfig& cfg) {
    bool ok = obs.ttc_p10 >= cfg.tau_ttc && std::abs(obs.a_near) <= cfg.a_max_mask && !obs.rho_red;
    return ok ? 1.0 : 0.0;
}

// Linear warm-up from 0 to lambda_max over warmup_iters iterations;
// constant lambda_max when the schedule is disabled.
inline double lambda_schedule(int iter, const ShapingConfig& cfg) {
    if (!cfg.use_schedule) return cfg.lambda_max;
    double frac = static_cast<double>(iter) / cfg.warmup_iters;
    return cfg.lambda_max * std::min(1.0, std::max(0.0, frac));
}

// The three raw reward streams: external, masked intrinsic, safety penalty.
struct RewardStreams {
    double external = 0.0;
    double intrinsic = 0.0;
    double penalty = 0.0;
};

// r1 = r_ext; r2 = lambda * m * r_phi (unmasked when the mask is disabled);
// r3 = -kappa * (1 - m) (zero when the mask is disabled).
inline RewardStreams mixed_streams(double r_ext, double r_phi, double mask, int iter,
                                   const ShapingConfig& cfg) {
    RewardStreams s;
    s.external = r_ext;
    double lambda = lambda_schedule(iter, cfg);
    if (cfg.use_intrinsic) s.intrinsic = lambda * (cfg.use_mask ? mask : 1.0) * r_phi;
    if (cfg.use_mask) s.penalty = -cfg.kappa * (1.0 - mask);
    return s;
}

// Online per-stream standardization: Welford moments are updated with the new
// value first, then the value is normalized with the updated statistics
// (population sigma) and clamped to +/- clip_c.
class StreamNormalizer {
public:
    explicit StreamNormalizer(double clip_c = 5.0, double eps = 1e-8)
        : clip_(clip_c), eps_(eps) {}

    double normalize(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / n_;
        m2_ += d * (x - mean_);
        double sigma = std::sqrt(m2_ / n_);
        double z = (x - mean_) / (sigma + eps_);
        return std::min(clip_, std::max(-clip_, z));
    }

    long long count() const { return n_; }
    double mean() const { return mean_; }
    double stddev() const { return n_ > 0 ? std::sqrt(m2_ / n_) : 0.0; }

private:
    long long n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double clip_;
    double eps_;
};

// Persistent normalizer state for the three streams of one training run.
class RewardMixer {
public:
    explicit RewardMixer(const ShapingConfig& cfg)
        : cfg_(cfg),
          norm_{StreamNormalizer(cfg.clip_c, cfg.eps), StreamNormalizer(cfg.clip_c, cfg.eps),
                StreamNormalizer(cfg.clip_c, cfg.eps)} {}

    // Total shaped reward for one transition.
    double mix(double r_ext, double r_phi, double mask, int iter) {
        RewardStreams s = mixed_streams(r_ext, r_phi, mask, iter, cfg_);
        if (!cfg_.use_norm) return s.external + s.intrinsic + s.penalty;
        return norm_[0].normalize(s.external) + norm_[1].normalize(s.intrinsic) +
               norm_[2].normalize(s.penalty);
    }

    const ShapingConfig& config() const { return cfg_; }
    const StreamNormalizer& normalizer(int i) const { return norm_[i]; }

private:
    ShapingConfig cfg_;
    std::array<StreamNormalizer, 3> norm_;
};

} // namespace c2t
