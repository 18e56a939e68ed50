#include "c2t/pairing.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace c2t {

namespace {
constexpr double kEps = 1e-8;

struct MeanStd {
    double mu = 0.0, sd = 1.0;
};

template <typename F>
MeanStd moments(const std::vector<PoolEntry>& pool, F&& f) {
    MeanStd m;
    if (pool.empty()) return m;
    double sum = 0.0;
    for (const auto& e : pool) sum += f(e.obs);
    m.mu = sum / pool.size();
    double var = 0.0;
    for (const auto& e : pool) {
        double d = f(e.obs) - m.mu;
        var += d * d;
    }
    m.sd = std::sqrt(var / pool.size());
    return m;
}
} // namespace

double mean_queue(const Observation& o) { return (o.q[0] + o.q[1] + o.q[2] + o.q[3]) / 4.0; }

PoolStats PoolStats::from_pool(const std::vector<PoolEntry>& pool) {
    PoolStats s;
    auto mq = moments(pool, mean_queue);
    s.mean_q_mu = mq.mu; s.mean_q_sd = mq.sd;
    auto dl = moments(pool, [](const Observation& o) { return o.mean_delay; });
    s.delay_mu = dl.mu; s.delay_sd = dl.sd;
    auto t1 = moments(pool, [](const Observation& o) { return o.ttc_p10; });
    s.ttc10_mu = t1.mu; s.ttc10_sd = t1.sd;
    auto t5 = moments(pool, [](const Observation& o) { return o.ttc_p50; });
    s.ttc50_mu = t5.mu; s.ttc50_sd = t5.sd;
    auto hb = moments(pool, [](const Observation& o) { return o.h_brake; });
    s.brake_mu = hb.mu; s.brake_sd = hb.sd;
    return s;
}

void PairingConfig::validate() const {
    if (!(delta1 < delta2)) throw std::invalid_argument("pairing: delta1 must be < delta2");
    if (alpha < 0 || beta < 0 || gamma_pair < 0) throw std::invalid_argument("pairing: weights must be >= 0");
    if (alpha == 0 && beta == 0 && gamma_pair == 0)
        throw std::invalid_argument("pairing: at least one weight must be positive");
}

double congestion_contrast(const Observation& a, const Observation& b, const PoolStats& s) {
    double zq = (mean_queue(a) - mean_queue(b)) / (s.mean_q_sd + kEps);
    double zd = (a.mean_delay - b.mean_delay) / (s.delay_sd + kEps);
    return std::fabs(zq) + std::fabs(zd);
}

double safety_contrast(const Observation& a, const Observation& b, const PoolStats& s) {
    double z1 = (a.ttc_p10 - b.ttc_p10) / (s.ttc10_sd + kEps);
    double z5 = (a.ttc_p50 - b.ttc_p50) / (s.ttc50_sd + kEps);
    double zb = (a.h_brake - b.h_brake) / (s.brake_sd + kEps);
    return std::fabs(z1) + std::fabs(z5) + std::fabs(zb);
}

double pair_weight_unnorm(const Observation& a, const Observation& b, const PairingConfig& cfg,
                          const PoolStats& s) {
    double w = cfg.alpha * congestion_contrast(a, b, s) + cfg.beta * safety_contrast(a, b, s);
    if (a.intersection_id == b.intersection_id) {
        double dt = std::fabs(a.time - b.time);
        if (dt >= cfg.delta1 && dt <= cfg.delta2) w += cfg.gamma_pair;
    }
    return w;
}

PairSample sample_pairs(const std::vector<PoolEntry>& pool, int m, const PairingConfig& cfg,
                        const PoolStats& stats, Rng& rng) {
    cfg.validate();
    if (pool.size() < 2) throw std::invalid_argument("pairing: pool must hold at least 2 observations");
    if (m < 1) throw std::invalid_argument("pairing: pair budget must be >= 1");

    // upper bound on any pair weight, from per-field pool ranges
    auto range_z = [&](auto&& f, double sd) {
        double lo = f(pool.front().obs), hi = lo;
        for (const auto& e : pool) {
            double v = f(e.obs);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return (hi - lo) / (sd + kEps);
    };
    double cong_max = range_z(mean_queue, stats.mean_q_sd) +
                      range_z([](const Observation& o) { return o.mean_delay; }, stats.delay_sd);
    double safe_max = range_z([](const Observation& o) { return o.ttc_p10; }, stats.ttc10_sd) +
                      range_z([](const Observation& o) { return o.ttc_p50; }, stats.ttc50_sd) +
                      range_z([](const Observation& o) { return o.h_brake; }, stats.brake_sd);
    double w_max = cfg.alpha * cong_max + cfg.beta * safe_max + cfg.gamma_pair;

    PairSample out;
    if (w_max <= 0.0) {
        out.exhausted = true;
        return out;
    }

    std::unordered_set<std::uint64_t> used;
    const std::uint64_t n = pool.size();
    long rejections = 0;
    const long reject_cap = 200000 + 400L * m;
    while (static_cast<int>(out.pairs.size()) < m && rejections < reject_cap) {
        std::uint64_t i = rng.uniform_int(n);
        std::uint64_t j = rng.uniform_int(n - 1);
        if (j >= i) ++j;
        std::uint64_t a = std::min(i, j), b = std::max(i, j);
        std::uint64_t key = a * n + b;
        if (used.count(key)) {
            ++rejections;
            continue;
        }
        double w = pair_weight_unnorm(pool[a].obs, pool[b].obs, cfg, stats);
        if (w <= 0.0 || rng.uniform01() >= w / w_max) {
            ++rejections;
            continue;
        }
        used.insert(key);
        out.pairs.push_back(CandidatePair{static_cast<int>(a), static_cast<int>(b), w});
        rejections = 0;
    }
    out.exhausted = static_cast<int>(out.pairs.size()) < m;
    return out;
}

} // namespace c2t
