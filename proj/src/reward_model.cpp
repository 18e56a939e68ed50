#include "c2t/reward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace c2t {

const char* feature_kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::numeric_only: return "numeric_only";
        case FeatureKind::unstructured: return "unstructured";
        case FeatureKind::structured_fusion: return "structured_fusion";
    }
    return "?";
}

FeatureKind feature_kind_from_name(const std::string& name) {
    if (name == "numeric_only") return FeatureKind::numeric_only;
    if (name == "unstructured") return FeatureKind::unstructured;
    if (name == "structured_fusion") return FeatureKind::structured_fusion;
    throw std::invalid_argument("unknown feature mode: " + name);
}

int EncoderSpec::dim() const {
    switch (kind) {
        case FeatureKind::numeric_only: return kNumericDim;
        case FeatureKind::unstructured: return kNumericDim + kTrigramBuckets;
        case FeatureKind::structured_fusion: return kNumericDim + kStructuredTokens;
    }
    return 0;
}

bool EncoderSpec::compatible(const EncoderSpec& other) const {
    return kind == other.kind && drop_risk == other.drop_risk &&
           drop_congestion == other.drop_congestion;
}

EncoderSpec EncoderSpec::fit(FeatureKind kind, const std::vector<PoolEntry>& pool) {
    EncoderSpec spec;
    spec.kind = kind;
    if (pool.empty()) return spec;
    auto raw = [](const Observation& o, int i) -> double {
        switch (i) {
            case 0: case 1: case 2: case 3: return o.p[i];
            case 4: return o.mean_delay;
            case 5: return o.ttc_p10;
            case 6: return o.ttc_p50;
            default: return o.h_brake;
        }
    };
    for (int i = 0; i < kNumericDim; ++i) {
        double sum = 0.0;
        for (const auto& e : pool) sum += raw(e.obs, i);
        spec.mu[i] = sum / pool.size();
        double var = 0.0;
        for (const auto& e : pool) {
            double d = raw(e.obs, i) - spec.mu[i];
            var += d * d;
        }
        spec.sd[i] = std::max(1e-8, std::sqrt(var / pool.size()));
    }
    return spec;
}

std::vector<double> encode(const Observation& obs, const std::string& caption_text,
                           const EncoderSpec& spec) {
    std::vector<double> f(spec.dim(), 0.0);
    // numeric base
    auto raw = [&](int i) -> double {
        switch (i) {
            case 0: case 1: case 2: case 3: return obs.p[i];
            case 4: return obs.mean_delay;
            case 5: return obs.ttc_p10;
            case 6: return obs.ttc_p50;
            default: return obs.h_brake;
        }
    };
    for (int i = 0; i < EncoderSpec::kNumericDim; ++i) f[i] = (raw(i) - spec.mu[i]) / spec.sd[i];
    if (spec.drop_congestion)
        for (int i = 0; i <= 4; ++i) f[i] = 0.0; // pressures + delay
    if (spec.drop_risk)
        for (int i = 5; i <= 7; ++i) f[i] = 0.0; // ttc percentiles + brakes

    if (spec.kind == FeatureKind::structured_fusion) {
        auto parsed = parse_caption(caption_text);
        if (!parsed) throw EncodingError("structured_fusion: caption does not match the structured grammar");
        int base = EncoderSpec::kNumericDim;
        int phase_off = base;
        int queue_off = phase_off + 4;
        int delay_off = queue_off + 16;
        int ttc_off = delay_off + 7;
        int red_off = ttc_off + 3;
        int brake_off = red_off + 1;
        f[phase_off + static_cast<int>(parsed->phase.phase)] = 1.0;
        if (!spec.drop_congestion) {
            for (int a = 0; a < 4; ++a) f[queue_off + 4 * a + queue_bin(parsed->q[a])] = 1.0;
            f[delay_off + delay_bin(parsed->mean_delay)] = 1.0;
        }
        if (!spec.drop_risk) {
            f[ttc_off + ttc_bin(parsed->ttc_p10)] = 1.0;
            f[red_off] = parsed->rho_red ? 1.0 : 0.0;
            f[brake_off + brake_bin(parsed->h_brake)] = 1.0;
        }
    } else if (spec.kind == FeatureKind::unstructured) {
        int base = EncoderSpec::kNumericDim;
        std::string lower = caption_text;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        for (std::size_t i = 0; i + 2 < lower.size(); ++i) {
            std::uint64_t h = fnv1a(lower.data() + i, 3);
            f[base + h % EncoderSpec::kTrigramBuckets] += 0.1;
        }
    }
    return f;
}

std::size_t RewardModelParams::n_params() const {
    return W1.size() + b1.size() + w2.size() + 1;
}

std::vector<double> RewardModelParams::flatten() const {
    std::vector<double> out;
    out.reserve(n_params());
    out.insert(out.end(), W1.begin(), W1.end());
    out.insert(out.end(), b1.begin(), b1.end());
    out.insert(out.end(), w2.begin(), w2.end());
    out.push_back(b2);
    return out;
}

void RewardModelParams::unflatten(std::span<const double> flat) {
    std::size_t k = 0;
    for (auto& v : W1) v = flat[k++];
    for (auto& v : b1) v = flat[k++];
    for (auto& v : w2) v = flat[k++];
    b2 = flat[k++];
}

RewardModelParams RewardModelParams::init(const EncoderSpec& spec, int hidden, ScorerHyper hyper,
                                          std::uint64_t seed) {
    RewardModelParams p;
    p.encoder = spec;
    p.hidden = hidden;
    p.hyper = hyper;
    int d = spec.dim();
    Rng rng = Rng::split(seed, 0x5EEDF00D);
    if (hidden > 0) {
        double s1 = 1.0 / std::sqrt(static_cast<double>(d));
        double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        p.W1.resize(static_cast<std::size_t>(hidden) * d);
        p.b1.assign(hidden, 0.0);
        p.w2.resize(hidden);
        for (auto& v : p.W1) v = rng.uniform(-s1, s1);
        for (auto& v : p.w2) v = rng.uniform(-s2, s2);
    } else {
        p.w2.assign(d, 0.0);
        double s = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& v : p.w2) v = rng.uniform(-s, s);
    }
    p.b2 = 0.0;
    return p;
}

double score(const RewardModelParams& p, std::span<const double> f) {
    const int d = p.encoder.dim();
    if (static_cast<int>(f.size()) != d) throw EncodingError("score: feature dimension mismatch");
    if (p.hidden == 0) {
        double r = p.b2;
        for (int j = 0; j < d; ++j) r += p.w2[j] * f[j];
        return r;
    }
    double r = p.b2;
    for (int i = 0; i < p.hidden; ++i) {
        double z = p.b1[i];
        const double* row = &p.W1[static_cast<std::size_t>(i) * d];
        for (int j = 0; j < d; ++j) z += row[j] * f[j];
        r += p.w2[i] * std::tanh(z);
    }
    return r;
}

double bt_probability(double r1, double r2, double tau) {
    if (tau <= 0) throw std::invalid_argument("bt_probability: tau must be > 0");
    double z = (r1 - r2) / tau;
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// forward pass + accumulate scale * dr/dphi into grad (flattened layout)
double score_backprop(const RewardModelParams& p, std::span<const double> f, double scale,
                      std::vector<double>& grad) {
    const int d = p.encoder.dim();
    if (p.hidden == 0) {
        double r = p.b2;
        for (int j = 0; j < d; ++j) {
            r += p.w2[j] * f[j];
            grad[j] += scale * f[j];
        }
        grad[d] += scale;
        return r;
    }
    const int h = p.hidden;
    const std::size_t w1n = static_cast<std::size_t>(h) * d;
    double r = p.b2;
    for (int i = 0; i < h; ++i) {
        double z = p.b1[i];
        const double* row = &p.W1[static_cast<std::size_t>(i) * d];
        for (int j = 0; j < d; ++j) z += row[j] * f[j];
        double t = std::tanh(z);
        r += p.w2[i] * t;
        double dz = scale * p.w2[i] * (1.0 - t * t);
        double* grow = &grad[static_cast<std::size_t>(i) * d];
        for (int j = 0; j < d; ++j) grow[j] += dz * f[j];
        grad[w1n + i] += dz;          // b1
        grad[w1n + h + i] += scale * t; // w2
    }
    grad[w1n + 2 * static_cast<std::size_t>(h)] += scale; // b2
    return r;
}

} // namespace

LossBreakdown loss_and_gradient(const RewardModelParams& p, const std::vector<EncodedPair>& batch,
                                const std::vector<std::vector<double>>& centering_ref) {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradient: batch must be nonempty");
    LossBreakdown out;
    out.grad.assign(p.n_params(), 0.0);
    const double tau = p.hyper.tau_bt;

    for (const auto& pr : batch) {
        double r1 = score(p, pr.f1);
        double r2 = score(p, pr.f2);
        double sign = pr.y == 1 ? 1.0 : -1.0;
        double pc = bt_probability(r1, r2, tau);
        double p_correct = pr.y == 1 ? pc : 1.0 - pc;
        p_correct = std::max(p_correct, 1e-300);
        out.nll += -pr.w * std::log(p_correct);
        // dL/dr1 = -w * sign * (1 - p_correct) / tau; dL/dr2 is the negative
        double g = -pr.w * sign * (1.0 - p_correct) / tau;
        score_backprop(p, pr.f1, g, out.grad);
        score_backprop(p, pr.f2, -g, out.grad);
    }

    auto flat = p.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        out.l2 += p.hyper.eta * flat[i] * flat[i];
        out.grad[i] += 2.0 * p.hyper.eta * flat[i];
    }

    if (!centering_ref.empty() && p.hyper.zeta != 0.0) {
        double mean = 0.0;
        for (const auto& f : centering_ref) mean += score(p, f);
        mean /= static_cast<double>(centering_ref.size());
        out.center = p.hyper.zeta * mean * mean;
        double scale = 2.0 * p.hyper.zeta * mean / static_cast<double>(centering_ref.size());
        for (const auto& f : centering_ref) score_backprop(p, f, scale, out.grad);
    }

    out.total = out.nll + out.l2 + out.center;
    if (!std::isfinite(out.total))
        throw TrainingError("loss_and_gradient: non-finite loss (batch size " +
                            std::to_string(batch.size()) + ")");
    return out;
}

std::vector<EncodedPair> encode_dataset(const PrefDataset& ds, const EncoderSpec& spec) {
    std::vector<EncodedPair> out;
    out.reserve(ds.pairs.size());
    for (const auto& lp : ds.pairs) {
        EncodedPair e;
        e.f1 = encode(lp.o1, lp.c1.text, spec);
        e.f2 = encode(lp.o2, lp.c2.text, spec);
        e.y = lp.y;
        e.w = lp.w;
        out.push_back(std::move(e));
    }
    return out;
}

TrainResult train_reward_model_encoded(std::vector<EncodedPair> pairs, const EncoderSpec& spec,
                                       ScorerHyper hyper, const TrainOptions& opt) {
    if (pairs.empty()) throw TrainingError("train_reward_model: dataset is empty");
    if (!(opt.heldout_frac > 0.0 && opt.heldout_frac < 1.0))
        throw std::invalid_argument("train_reward_model: heldout_frac must be in (0,1)");

    Rng rng = Rng::split(opt.seed, 0x7EA17EA1);
    rng.shuffle(pairs);
    std::size_t n_held = std::max<std::size_t>(1, static_cast<std::size_t>(pairs.size() * opt.heldout_frac));
    if (n_held >= pairs.size()) n_held = pairs.size() - 1;

    TrainResult res;
    res.heldout.assign(pairs.end() - n_held, pairs.end());
    pairs.resize(pairs.size() - n_held);

    // fixed reference sample for the centering expectation
    std::vector<std::vector<double>> ref;
    for (const auto& pr : pairs) {
        if (static_cast<int>(ref.size()) >= opt.centering_ref_size) break;
        ref.push_back(pr.f1);
        if (static_cast<int>(ref.size()) < opt.centering_ref_size) ref.push_back(pr.f2);
    }

    res.params = RewardModelParams::init(spec, opt.hidden, hyper, opt.seed);
    std::vector<double> vel(res.params.n_params(), 0.0);
    std::vector<double> flat = res.params.flatten();
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        int n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch) {
            std::size_t end = std::min(order.size(), start + opt.batch);
            std::vector<EncodedPair> mb;
            mb.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) mb.push_back(pairs[order[k]]);
            auto lg = loss_and_gradient(res.params, mb, ref);
            if (lg.total > opt.divergence_limit)
                throw TrainingError("train_reward_model: loss diverged");
            loss_sum += lg.total;
            n_batches++;
            for (std::size_t i = 0; i < flat.size(); ++i) {
                vel[i] = opt.momentum * vel[i] - opt.lr * lg.grad[i];
                flat[i] += vel[i];
            }
            res.params.unflatten(flat);
        }
        auto eval = evaluate_offline(res.params, res.heldout);
        res.curve.push_back({epoch, n_batches ? loss_sum / n_batches : 0.0, eval.pairwise_accuracy});
    }
    return res;
}

TrainResult train_reward_model(const PrefDataset& ds, const EncoderSpec& spec, ScorerHyper hyper,
                               const TrainOptions& opt) {
    return train_reward_model_encoded(encode_dataset(ds, spec), spec, hyper, opt);
}

OfflineEval evaluate_offline(const RewardModelParams& params, const std::vector<EncodedPair>& heldout,
                             const std::vector<std::pair<std::vector<double>, double>>* true_utility) {
    if (heldout.empty()) throw std::invalid_argument("evaluate_offline: held-out set is empty");
    OfflineEval ev;
    double correct = 0.0;
    std::vector<double> pos, neg; // dr scores grouped by label
    for (const auto& pr : heldout) {
        double dr = score(params, pr.f1) - score(params, pr.f2);
        double want = pr.y == 1 ? 1.0 : -1.0;
        if (dr == 0.0) correct += 0.5;
        else if (dr * want > 0) correct += 1.0;
        (pr.y == 1 ? pos : neg).push_back(dr);
    }
    ev.pairwise_accuracy = correct / heldout.size();

    if (pos.empty() || neg.empty()) {
        ev.auc = 0.5;
    } else {
        double wins = 0.0;
        for (double a : pos)
            for (double b : neg) {
                if (a > b) wins += 1.0;
                else if (a == b) wins += 0.5;
            }
        ev.auc = wins / (static_cast<double>(pos.size()) * neg.size());
    }

    if (true_utility && !true_utility->empty()) {
        std::vector<double> r, u;
        for (const auto& [f, util] : *true_utility) {
            r.push_back(score(params, f));
            u.push_back(util);
        }
        ev.spearman = spearman_rank(r, u);
    }
    return ev;
}

double spearman_rank(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> rk(v.size());
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            double mean_rank = (static_cast<double>(i) + j) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) rk[idx[k]] = mean_rank;
            i = j + 1;
        }
        return rk;
    };
    auto ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= ra.size();
    mb /= rb.size();
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da <= 0 || db <= 0) return 0.0;
    return num / std::sqrt(da * db);
}

double Scorer::score_features(std::span<const double> features) const {
    double r = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) r += weights[i] * score(parts[i], features);
    return r;
}

double Scorer::score_obs(const Observation& obs, const std::string& caption_text) const {
    double r = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        auto f = encode(obs, caption_text, parts[i].encoder);
        r += weights[i] * score(parts[i], f);
    }
    return r;
}

Scorer Scorer::single(RewardModelParams params) {
    Scorer s;
    s.parts.push_back(std::move(params));
    s.weights.push_back(1.0);
    return s;
}

Scorer fuse_scorers(const RewardModelParams& source, const RewardModelParams& target, double lambda_fuse) {
    if (lambda_fuse < 0.0 || lambda_fuse > 1.0)
        throw std::invalid_argument("fuse_scorers: lambda must be in [0,1]");
    if (!source.encoder.compatible(target.encoder))
        throw EncodingError("fuse_scorers: incompatible encoders");
    Scorer s;
    s.parts = {source, target};
    s.weights = {lambda_fuse, 1.0 - lambda_fuse};
    return s;
}

} // namespace c2t
