#include "c2t/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace c2t {

void PPOConfig::validate() const {
    if (lr < 0) throw ConfigError("ppo.lr must be >= 0");
    if (buffer < 1) throw ConfigError("ppo.buffer must be >= 1");
    if (sample < 1) throw ConfigError("ppo.sample must be >= 1");
    if (hidden < 1) throw ConfigError("ppo.hidden must be >= 1");
    if (clip <= 0 || clip >= 1) throw ConfigError("ppo.clip must be in (0,1)");
    if (batch < 1) throw ConfigError("ppo.batch must be >= 1");
    if (minibatches < 1) throw ConfigError("ppo.minibatches must be >= 1");
    if (entropy_coef < 0) throw ConfigError("ppo.entropy_coef must be >= 0");
    if (gae_lambda < 0 || gae_lambda > 1) throw ConfigError("ppo.gae_lambda must be in [0,1]");
    if (gamma_discount <= 0 || gamma_discount > 1) throw ConfigError("ppo.gamma_discount must be in (0,1]");
    if (iterations < 0) throw ConfigError("ppo.iterations must be >= 0");
    if (episodes < 1) throw ConfigError("ppo.episodes must be >= 1");
    if (horizon < 1) throw ConfigError("ppo.horizon must be >= 1");
    if (lambda_delay < 0) throw ConfigError("ppo.lambda_delay must be >= 0");
}

std::vector<double> policy_features(const Observation& obs) {
    std::vector<double> f(kPolicyFeatureDim, 0.0);
    for (int a = 0; a < 4; ++a) f[a] = obs.p[a] / 10.0;
    f[4] = obs.mean_delay / 60.0;
    f[5] = obs.ttc_p10 / 10.0;
    f[6] = obs.ttc_p50 / 10.0;
    f[7] = obs.h_brake / 5.0;
    f[8 + static_cast<int>(obs.phase.phase)] = 1.0;
    f[12] = obs.phase.elapsed / 30.0;
    return f;
}

Mlp Mlp::init(int in, int hidden, int out, std::uint64_t seed) {
    Mlp m;
    m.in = in;
    m.hidden = hidden;
    m.out = out;
    m.W1.resize(static_cast<std::size_t>(hidden) * in);
    m.b1.assign(hidden, 0.0);
    m.W2.resize(static_cast<std::size_t>(out) * hidden);
    m.b2.assign(out, 0.0);
    Rng rng = Rng::split(seed, 0x4D4C5000 + static_cast<std::uint64_t>(out));
    double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& v : m.W1) v = rng.uniform(-s1, s1);
    for (auto& v : m.W2) v = rng.uniform(-s2, s2);
    return m;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != in) throw std::invalid_argument("Mlp: input dimension mismatch");
    std::vector<double> h(hidden);
    for (int i = 0; i < hidden; ++i) {
        double z = b1[i];
        const double* row = &W1[static_cast<std::size_t>(i) * in];
        for (int j = 0; j < in; ++j) z += row[j] * x[j];
        h[i] = std::tanh(z);
    }
    std::vector<double> y(out);
    for (int o = 0; o < out; ++o) {
        double z = b2[o];
        const double* row = &W2[static_cast<std::size_t>(o) * hidden];
        for (int i = 0; i < hidden; ++i) z += row[i] * h[i];
        y[o] = z;
    }
    return y;
}

std::vector<double> Mlp::backward(std::span<const double> x, std::span<const double> dout,
                                  std::vector<double>& grad) const {
    std::vector<double> h(hidden);
    for (int i = 0; i < hidden; ++i) {
        double z = b1[i];
        const double* row = &W1[static_cast<std::size_t>(i) * in];
        for (int j = 0; j < in; ++j) z += row[j] * x[j];
        h[i] = std::tanh(z);
    }
    std::vector<double> y(out);
    const std::size_t w1n = W1.size();
    const std::size_t b1o = w1n;
    const std::size_t w2o = b1o + b1.size();
    const std::size_t b2o = w2o + W2.size();
    std::vector<double> dh(hidden, 0.0);
    for (int o = 0; o < out; ++o) {
        double z = b2[o];
        const double* row = &W2[static_cast<std::size_t>(o) * hidden];
        for (int i = 0; i < hidden; ++i) z += row[i] * h[i];
        y[o] = z;
        double g = dout[o];
        if (g == 0.0) continue;
        double* gw2 = &grad[w2o + static_cast<std::size_t>(o) * hidden];
        for (int i = 0; i < hidden; ++i) {
            gw2[i] += g * h[i];
            dh[i] += g * row[i];
        }
        grad[b2o + o] += g;
    }
    for (int i = 0; i < hidden; ++i) {
        double dz = dh[i] * (1.0 - h[i] * h[i]);
        if (dz == 0.0) continue;
        double* gw1 = &grad[static_cast<std::size_t>(i) * in];
        for (int j = 0; j < in; ++j) gw1[j] += dz * x[j];
        grad[b1o + i] += dz;
    }
    return y;
}

std::size_t Mlp::n_params() const { return W1.size() + b1.size() + W2.size() + b2.size(); }

std::vector<double> Mlp::flatten() const {
    std::vector<double> f;
    f.reserve(n_params());
    f.insert(f.end(), W1.begin(), W1.end());
    f.insert(f.end(), b1.begin(), b1.end());
    f.insert(f.end(), W2.begin(), W2.end());
    f.insert(f.end(), b2.begin(), b2.end());
    return f;
}

void Mlp::unflatten(std::span<const double> flat) {
    std::size_t k = 0;
    for (auto& v : W1) v = flat[k++];
    for (auto& v : b1) v = flat[k++];
    for (auto& v : W2) v = flat[k++];
    for (auto& v : b2) v = flat[k++];
}

std::vector<double> softmax(std::span<const double> logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0) h -= p * std::log(p);
    return h;
}

std::vector<double> policy_forward(const PolicyParams& theta, std::span<const double> features) {
    return softmax(theta.forward(features));
}

double value_forward(const ValueParams& psi, std::span<const double> features) {
    return psi.forward(features)[0];
}

GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<bool>& dones, double bootstrap_value, double gamma, double lam) {
    if (rewards.size() != values.size() || rewards.size() != dones.size())
        throw std::invalid_argument("gae: length mismatch");
    const int n = static_cast<int>(rewards.size());
    GaeResult out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double running = 0.0;
    for (int t = n - 1; t >= 0; --t) {
        double v_next = dones[t] ? 0.0 : (t + 1 < n ? values[t + 1] : bootstrap_value);
        double delta = rewards[t] + gamma * v_next - values[t];
        running = dones[t] ? delta : delta + gamma * lam * running;
        out.advantages[t] = running;
        out.returns[t] = running + values[t];
    }
    return out;
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(data_[rng.uniform_int(data_.size())]);
    return out;
}

PpoStats ppo_update(PolicyParams& theta, ValueParams& psi, std::vector<Transition> batch,
                    const PPOConfig& cfg, Rng& rng) {
    PpoStats stats;
    if (batch.empty()) return stats;

    double mean = 0.0;
    for (const auto& t : batch) mean += t.advantage;
    mean /= batch.size();
    double var = 0.0;
    for (const auto& t : batch) var += (t.advantage - mean) * (t.advantage - mean);
    double sd = std::sqrt(var / batch.size()) + 1e-8;
    for (auto& t : batch) t.advantage = (t.advantage - mean) / sd;

    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<double> gpol(theta.n_params());
    std::vector<double> gval(psi.n_params());
    std::vector<double> fpol, fval;
    long clip_hits = 0, n_seen = 0;
    double kl_sum = 0.0;

    for (int mb = 0; mb < cfg.minibatches; ++mb) {
        std::size_t start = static_cast<std::size_t>(mb) * cfg.batch;
        if (start >= order.size()) break;
        std::size_t end = std::min(order.size(), start + cfg.batch);
        std::fill(gpol.begin(), gpol.end(), 0.0);
        std::fill(gval.begin(), gval.end(), 0.0);
        double inv = 1.0 / static_cast<double>(end - start);

        for (std::size_t k = start; k < end; ++k) {
            const Transition& t = batch[order[k]];
            auto logits = theta.forward(t.features);
            auto probs = softmax(logits);
            double logp = std::log(std::max(probs[t.action], 1e-300));
            double ratio = std::exp(logp - t.log_prob);
            double h = entropy(probs);
            double rc = std::min(1.0 + cfg.clip, std::max(1.0 - cfg.clip, ratio));
            bool clipped = ratio < 1.0 - cfg.clip || ratio > 1.0 + cfg.clip;
            if (clipped) ++clip_hits;
            ++n_seen;
            kl_sum += t.log_prob - logp;

            double surr1 = ratio * t.advantage;
            double surr2 = rc * t.advantage;
            stats.policy_loss += -std::min(surr1, surr2);
            stats.entropy += h;

            std::vector<double> dlogits(4, 0.0);
            // unclipped branch active when it attains the min
            if (surr1 <= surr2) {
                double c = -t.advantage * ratio * inv;
                for (int j = 0; j < 4; ++j) dlogits[j] += c * ((j == t.action ? 1.0 : 0.0) - probs[j]);
            }
            for (int j = 0; j < 4; ++j)
                dlogits[j] += cfg.entropy_coef * probs[j] * (std::log(std::max(probs[j], 1e-300)) + h) * inv;
            theta.backward(t.features, dlogits, gpol);

            auto vout = psi.forward(t.features);
            double verr = vout[0] - t.ret;
            stats.value_loss += 0.5 * verr * verr;
            std::vector<double> dv{verr * inv};
            psi.backward(t.features, dv, gval);
        }

        fpol = theta.flatten();
        for (std::size_t i = 0; i < fpol.size(); ++i) fpol[i] -= cfg.lr * gpol[i];
        theta.unflatten(fpol);
        fval = psi.flatten();
        for (std::size_t i = 0; i < fval.size(); ++i) fval[i] -= cfg.lr * gval[i];
        psi.unflatten(fval);
    }

    if (n_seen > 0) {
        stats.policy_loss /= n_seen;
        stats.value_loss /= n_seen;
        stats.entropy /= n_seen;
        stats.clip_fraction = static_cast<double>(clip_hits) / n_seen;
        stats.approx_kl = kl_sum / n_seen;
    }
    if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
        throw TrainingError("ppo_update: non-finite loss");
    return stats;
}

namespace {

struct PendingDecision {
    bool open = false;
    std::vector<double> features;
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
};

struct EpisodeAccumulator {
    // per-intersection in-progress trajectories
    std::vector<std::vector<Transition>> traj;
};

void finalize_transition(std::vector<Transition>& traj, PendingDecision& pd,
                         const Observation& next_obs, bool done, int iter,
                         const IntrinsicFn& r_phi, const ShapingConfig& shaping,
                         RewardMixer& mixer, EpisodeRecorder& rec, double lambda_delay,
                         double& sum_r1, double& sum_r2, double& sum_r3, long& n_streams) {
    double r_ext = external_reward_tl(next_obs, lambda_delay);
    double rp = (shaping.use_intrinsic && r_phi) ? r_phi(next_obs) : 0.0;
    double m = safety_mask(next_obs, shaping);
    Transition t;
    t.features = std::move(pd.features);
    t.action = pd.action;
    t.log_prob = pd.log_prob;
    t.value = pd.value;
    t.done = done;
    t.mask = m;
    t.streams = mixed_streams(r_ext, rp, m, iter, mixer.config());
    t.reward = mixer.mix(r_ext, rp, m, iter);
    sum_r1 += t.streams.external;
    sum_r2 += t.streams.intrinsic;
    sum_r3 += t.streams.penalty;
    ++n_streams;
    rec.record_mask(m > 0.5);
    traj.push_back(std::move(t));
    pd.open = false;
}

} // namespace

EpisodeMetrics average_metrics(const std::vector<EpisodeMetrics>& ms) {
    EpisodeMetrics avg;
    if (ms.empty()) return avg;
    double att = 0, awt = 0;
    int n_att = 0, n_awt = 0;
    for (const auto& m : ms) {
        avg.aql += m.aql;
        avg.throughput += m.throughput;
        avg.ttc_p10 += m.ttc_p10;
        avg.ttc_p25 += m.ttc_p25;
        avg.brakes_per_km += m.brakes_per_km;
        avg.oscillation += m.oscillation;
        avg.mask_activation_rate += m.mask_activation_rate;
        if (m.att) {
            att += *m.att;
            ++n_att;
        }
        if (m.awt) {
            awt += *m.awt;
            ++n_awt;
        }
    }
    double n = static_cast<double>(ms.size());
    avg.aql /= n;
    avg.throughput /= n;
    avg.ttc_p10 /= n;
    avg.ttc_p25 /= n;
    avg.brakes_per_km /= n;
    avg.oscillation /= n;
    avg.mask_activation_rate /= n;
    if (n_att) avg.att = att / n_att;
    if (n_awt) avg.awt = awt / n_awt;
    return avg;
}

PolicyTrainResult train_policy(const SimConfig& env, const IntrinsicFn& r_phi,
                               const ShapingConfig& shaping, const PPOConfig& cfg,
                               std::uint64_t seed) {
    cfg.validate();
    shaping.validate();

    PolicyTrainResult res;
    res.policy = Mlp::init(kPolicyFeatureDim, cfg.hidden, 4, fnv1a_u64(1, fnv1a_u64(seed)));
    res.value = Mlp::init(kPolicyFeatureDim, cfg.hidden, 1, fnv1a_u64(2, fnv1a_u64(seed)));

    Rng act_rng = Rng::split(seed, 0xAC710);
    Rng upd_rng = Rng::split(seed, 0x0BDA7E);
    ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer));
    RewardMixer mixer(shaping);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<EpisodeMetrics> ep_metrics;
        double sum_r1 = 0, sum_r2 = 0, sum_r3 = 0;
        long n_streams = 0;

        for (int ep = 0; ep < cfg.episodes; ++ep) {
            SimConfig ep_cfg = env;
            ep_cfg.horizon_s = cfg.horizon;
            ep_cfg.seed = fnv1a_u64(static_cast<std::uint64_t>(iter) * 8191 + ep,
                                    fnv1a_u64(seed));
            Simulator sim(ep_cfg);
            EpisodeRecorder rec;
            const int n_inter = sim.num_intersections();
            std::vector<PendingDecision> pending(n_inter);
            std::vector<std::vector<Transition>> traj(n_inter);

            for (int t = 0; t < cfg.horizon; ++t) {
                auto needs = sim.needs_action();
                auto obs = sim.observe();
                std::vector<PhaseId> actions(n_inter);
                for (int i = 0; i < n_inter; ++i) {
                    actions[i] = obs[i].phase.phase;
                    if (!needs[i]) continue;
                    if (pending[i].open)
                        finalize_transition(traj[i], pending[i], obs[i], false, iter, r_phi,
                                            shaping, mixer, rec, cfg.lambda_delay, sum_r1,
                                            sum_r2, sum_r3, n_streams);
                    PendingDecision pd;
                    pd.open = true;
                    pd.features = policy_features(obs[i]);
                    auto probs = policy_forward(res.policy, pd.features);
                    double u = act_rng.uniform01();
                    int a = 0;
                    double cum = 0.0;
                    for (int j = 0; j < 4; ++j) {
                        cum += probs[j];
                        if (u < cum) {
                            a = j;
                            break;
                        }
                        a = j;
                    }
                    pd.action = a;
                    pd.log_prob = std::log(std::max(probs[a], 1e-300));
                    pd.value = value_forward(res.value, pd.features);
                    pending[i] = std::move(pd);
                    actions[i] = static_cast<PhaseId>(a);
                }
                StepEvents ev;
                sim.step(actions, &ev);
                rec.record_step(sim, ev);
            }

            auto final_obs = sim.observe();
            for (int i = 0; i < n_inter; ++i)
                if (pending[i].open)
                    finalize_transition(traj[i], pending[i], final_obs[i], true, iter, r_phi,
                                        shaping, mixer, rec, cfg.lambda_delay, sum_r1, sum_r2,
                                        sum_r3, n_streams);

            for (auto& tr : traj) {
                if (tr.empty()) continue;
                std::vector<double> rewards, values;
                std::vector<bool> dones;
                for (const auto& t : tr) {
                    rewards.push_back(t.reward);
                    values.push_back(t.value);
                    dones.push_back(t.done);
                }
                auto g = gae(rewards, values, dones, 0.0, cfg.gamma_discount, cfg.gae_lambda);
                for (std::size_t k = 0; k < tr.size(); ++k) {
                    tr[k].advantage = g.advantages[k];
                    tr[k].ret = g.returns[k];
                    buffer.push(std::move(tr[k]));
                }
            }
            ep_metrics.push_back(rec.metrics(sim, cfg.horizon));
        }

        IterationStats it;
        it.iter = iter;
        it.metrics = average_metrics(ep_metrics);
        if (n_streams) {
            it.mean_r1 = sum_r1 / n_streams;
            it.mean_r2 = sum_r2 / n_streams;
            it.mean_r3 = sum_r3 / n_streams;
        }
        it.mask_rate = it.metrics.mask_activation_rate;
        if (buffer.size() > 0) {
            auto batch = buffer.sample(static_cast<std::size_t>(cfg.sample), upd_rng);
            it.ppo = ppo_update(res.policy, res.value, std::move(batch), cfg, upd_rng);
        }
        res.curve.push_back(std::move(it));
    }
    return res;
}

EpisodeMetrics evaluate_policy(const SimConfig& env, const PolicyParams& policy, int horizon,
                               std::uint64_t seed) {
    SimConfig cfg = env;
    cfg.horizon_s = horizon;
    cfg.seed = seed;
    Simulator sim(cfg);
    EpisodeRecorder rec;
    const int n_inter = sim.num_intersections();
    for (int t = 0; t < horizon; ++t) {
        auto needs = sim.needs_action();
        auto obs = sim.observe();
        std::vector<PhaseId> actions(n_inter);
        for (int i = 0; i < n_inter; ++i) {
            actions[i] = obs[i].phase.phase;
            if (!needs[i]) continue;
            auto probs = policy_forward(policy, policy_features(obs[i]));
            int a = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
            actions[i] = static_cast<PhaseId>(a);
        }
        StepEvents ev;
        sim.step(actions, &ev);
        rec.record_step(sim, ev);
    }
    return rec.metrics(sim, horizon);
}

EpisodeMetrics evaluate_policy_stochastic(const SimConfig& env, const PolicyParams& policy,
                                          int horizon, std::uint64_t seed) {
    SimConfig cfg = env;
    cfg.horizon_s = horizon;
    cfg.seed = seed;
    Simulator sim(cfg);
    EpisodeRecorder rec;
    Rng rng = Rng::split(seed, 0x57C4A571C);
    const int n_inter = sim.num_intersections();
    for (int t = 0; t < horizon; ++t) {
        auto needs = sim.needs_action();
        auto obs = sim.observe();
        std::vector<PhaseId> actions(n_inter);
        for (int i = 0; i < n_inter; ++i) {
            actions[i] = obs[i].phase.phase;
            if (!needs[i]) continue;
            auto probs = policy_forward(policy, policy_features(obs[i]));
            double u = rng.uniform01();
            double c = 0.0;
            int a = static_cast<int>(probs.size()) - 1;
            for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
                c += probs[k];
                if (u < c) {
                    a = k;
                    break;
                }
            }
            actions[i] = static_cast<PhaseId>(a);
        }
        StepEvents ev;
        sim.step(actions, &ev);
        rec.record_step(sim, ev);
    }
    return rec.metrics(sim, horizon);
}

} // namespace c2t
