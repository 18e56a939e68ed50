#include "c2t/judge.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace c2t {

JudgeProfileKind judge_profile_from_name(const std::string& name) {
    if (name == "balanced") return JudgeProfileKind::balanced;
    if (name == "safety_focused" || name == "safety") return JudgeProfileKind::safety_focused;
    if (name == "efficiency_focused" || name == "efficiency") return JudgeProfileKind::efficiency_focused;
    throw std::invalid_argument("unknown judge profile: " + name);
}

const char* judge_profile_name(JudgeProfileKind k) {
    switch (k) {
        case JudgeProfileKind::balanced: return "balanced";
        case JudgeProfileKind::safety_focused: return "safety_focused";
        case JudgeProfileKind::efficiency_focused: return "efficiency_focused";
    }
    return "?";
}

namespace {

constexpr double kEps = 1e-8;

enum class Rule { red, ttc, cong, brake };

struct RuleStep {
    Rule rule;
    double margin;
};

// 0 = no decision, 1/2 = preferred side
int apply_rule(const RuleStep& step, const JudgeView& a, const JudgeView& b, const PoolStats& st) {
    switch (step.rule) {
        case Rule::red:
            if (a.rho_red != b.rho_red) return a.rho_red == 0 ? 1 : 2;
            return 0;
        case Rule::ttc: {
            double d = a.ttc_p10 - b.ttc_p10;
            if (std::fabs(d) > step.margin) return d > 0 ? 1 : 2;
            return 0;
        }
        case Rule::cong: {
            double ga = a.mean_q / (st.mean_q_sd + kEps) + a.delay / (st.delay_sd + kEps);
            double gb = b.mean_q / (st.mean_q_sd + kEps) + b.delay / (st.delay_sd + kEps);
            double d = ga - gb;
            if (std::fabs(d) > step.margin) return d < 0 ? 1 : 2;
            return 0;
        }
        case Rule::brake: {
            double d = a.h_brake - b.h_brake;
            if (d != 0.0) return d < 0 ? 1 : 2;
            return 0;
        }
    }
    return 0;
}

std::vector<RuleStep> rule_table(const JudgeProfile& p) {
    switch (p.kind) {
        case JudgeProfileKind::balanced:
            return {{Rule::red, 0}, {Rule::ttc, p.eps_ttc}, {Rule::cong, p.eps_cong}, {Rule::brake, 0}};
        case JudgeProfileKind::safety_focused:
            return {{Rule::ttc, p.eps_ttc / 2.0}, {Rule::red, 0}, {Rule::brake, 0}, {Rule::cong, p.eps_cong}};
        case JudgeProfileKind::efficiency_focused:
            return {{Rule::cong, p.eps_cong}, {Rule::red, 0}, {Rule::ttc, 2.0 * p.eps_ttc}, {Rule::brake, 0}};
    }
    return {};
}

} // namespace

std::optional<Verdict> SyntheticJudge::judge(const std::string& c1, const std::string& c2) {
    auto v1 = judge_view(c1);
    auto v2 = judge_view(c2);
    if (!v1 || !v2) return std::nullopt;
    for (const auto& step : rule_table(profile_)) {
        int r = apply_rule(step, *v1, *v2, stats_);
        if (r == 1) return Verdict::first;
        if (r == 2) return Verdict::second;
    }
    return Verdict::abstain;
}

std::string SyntheticJudge::id() const {
    return std::string("synthetic:") + judge_profile_name(profile_.kind);
}

NoisyJudge::NoisyJudge(std::shared_ptr<Judge> inner, double p_flip, double p_abstain, std::uint64_t seed)
    : inner_(std::move(inner)), p_flip_(p_flip), p_abstain_(p_abstain), rng_(Rng::split(seed, 0xBADDCAFE)) {
    if (p_flip < 0 || p_abstain < 0 || p_flip + p_abstain > 1.0)
        throw std::invalid_argument("noisy judge: need p_flip, p_abstain >= 0 and p_flip + p_abstain <= 1");
}

std::optional<Verdict> NoisyJudge::judge(const std::string& c1, const std::string& c2) {
    auto v = inner_->judge(c1, c2);
    if (!v || *v == Verdict::abstain) return v;
    double u = rng_.uniform01();
    if (u < p_abstain_) return Verdict::abstain;
    if (u < p_abstain_ + p_flip_) return *v == Verdict::first ? Verdict::second : Verdict::first;
    return v;
}

std::string NoisyJudge::id() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "noisy(flip=%.3f,abstain=%.3f):%s", p_flip_, p_abstain_,
                  inner_->id().c_str());
    return buf;
}

std::uint64_t pair_template_key(std::uint64_t t1, std::uint64_t t2) {
    std::uint64_t lo = std::min(t1, t2), hi = std::max(t1, t2);
    return fnv1a_u64(hi, fnv1a_u64(lo));
}

void apply_frequency_weights(std::vector<LabeledPair>& pairs) {
    if (pairs.empty()) return;
    std::map<std::uint64_t, long> nu;
    for (const auto& p : pairs) nu[p.template_key]++;
    double sum = 0.0;
    for (auto& p : pairs) {
        p.w = 1.0 / static_cast<double>(nu[p.template_key]);
        sum += p.w;
    }
    double scale = static_cast<double>(pairs.size()) / sum;
    for (auto& p : pairs) p.w *= scale;
}

PrefDataset build_pref_dataset(const std::vector<PoolEntry>& pool, const PairingConfig& cfg,
                               const PoolStats& stats, Judge& judge, int m, Rng& rng) {
    if (m < 1) throw std::invalid_argument("build_pref_dataset: pair budget must be >= 1");
    PrefDataset ds;
    auto sample = sample_pairs(pool, m, cfg, stats, rng);
    ds.pool_exhausted = sample.exhausted;
    for (const auto& cp : sample.pairs) {
        ds.sampled++;
        const auto& e1 = pool[cp.a];
        const auto& e2 = pool[cp.b];
        auto v = judge.judge(e1.caption.text, e2.caption.text);
        if (!v) {
            ds.parse_errors++;
            continue;
        }
        if (*v == Verdict::abstain) {
            ds.abstained++;
            continue;
        }
        LabeledPair lp;
        lp.c1 = e1.caption;
        lp.c2 = e2.caption;
        lp.o1 = e1.obs;
        lp.o2 = e2.obs;
        lp.y = static_cast<int>(*v);
        lp.template_key = pair_template_key(e1.caption.template_id, e2.caption.template_id);
        lp.judge_meta = judge.id();
        ds.pairs.push_back(std::move(lp));
    }
    apply_frequency_weights(ds.pairs);
    ds.low_yield_warning = static_cast<long>(ds.pairs.size()) * 10 < m;
    return ds;
}

} // namespace c2t
