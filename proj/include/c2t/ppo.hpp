#pragma once

#include "c2t/reward_model.hpp"
#include "c2t/rng.hpp"
#include "c2t/shaping.hpp"
#include "c2t/sim.hpp"
#include "c2t/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace c2t {

struct PPOConfig {
    double lr = 1e-3;
    int buffer = 12000;        // FIFO transition capacity
    int sample = 3000;         // transitions per update
    int hidden = 20;
    double clip = 0.2;
    int batch = 128;           // minibatch size
    int minibatches = 16;
    double entropy_coef = 1e-3;
    double gae_lambda = 0.95;
    double gamma_discount = 0.99;
    int iterations = 40;
    int episodes = 2;          // episodes collected per iteration
    int horizon = 600;         // s
    double lambda_delay = 0.1; // delay weight in the external reward

    void validate() const;
};

// Policy/value input: p/10 (4), delay/60, ttc_p10/10, ttc_p50/10, brakes/5,
// phase one-hot (4), elapsed/30.
constexpr int kPolicyFeatureDim = 13;
std::vector<double> policy_features(const Observation& obs);

// Single-hidden-layer tanh MLP used for both the policy head (out = 4 logits)
// and the value head (out = 1).
struct Mlp {
    int in = 0, hidden = 0, out = 0;
    std::vector<double> W1; // hidden x in
    std::vector<double> b1; // hidden
    std::vector<double> W2; // out x hidden
    std::vector<double> b2; // out

    static Mlp init(int in, int hidden, int out, std::uint64_t seed);

    std::vector<double> forward(std::span<const double> x) const;
    // Accumulates scale * dL/dparams into grad (flatten layout) given
    // dL/doutput; returns the forward outputs.
    std::vector<double> backward(std::span<const double> x, std::span<const double> dout,
                                 std::vector<double>& grad) const;

    std::size_t n_params() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);
};

using PolicyParams = Mlp;
using ValueParams = Mlp;

std::vector<double> softmax(std::span<const double> logits);
double entropy(std::span<const double> probs);

// Action distribution over the 4 phases.
std::vector<double> policy_forward(const PolicyParams& theta, std::span<const double> features);
double value_forward(const ValueParams& psi, std::span<const double> features);

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;
};

// delta_t = r_t + gamma * V_{t+1} - V_t (V_{t+1} = bootstrap past the end,
// 0 across done boundaries); A_t = sum_l (gamma*lam)^l delta_{t+l} truncated
// at done flags; returns = A + V.
GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<bool>& dones, double bootstrap_value, double gamma, double lam);

struct Transition {
    std::vector<double> features;
    int action = 0;
    double log_prob = 0.0;
    double reward = 0.0; // shaped total
    double value = 0.0;
    bool done = false;
    RewardStreams streams; // raw streams, kept for ablation reporting
    double mask = 1.0;
    // filled by GAE before buffer insertion
    double advantage = 0.0;
    double ret = 0.0;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
    void push(Transition t);
    std::vector<Transition> sample(std::size_t n, Rng& rng) const; // with replacement if short
    std::size_t size() const { return data_.size(); }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

struct PpoStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
};

// Clipped-surrogate update: advantages normalized over the batch, then
// cfg.minibatches minibatches of cfg.batch at lr cfg.lr (plain SGD).
PpoStats ppo_update(PolicyParams& theta, ValueParams& psi, std::vector<Transition> batch,
                    const PPOConfig& cfg, Rng& rng);

// Optional intrinsic score of a post-decision observation.
using IntrinsicFn = std::function<double(const Observation&)>;

struct IterationStats {
    int iter = 0;
    EpisodeMetrics metrics; // averaged over the iteration's episodes
    double mean_r1 = 0.0, mean_r2 = 0.0, mean_r3 = 0.0;
    double mask_rate = 1.0;
    PpoStats ppo;
};

struct PolicyTrainResult {
    PolicyParams policy;
    ValueParams value;
    std::vector<IterationStats> curve;
};

// Shared-policy training over all intersections; r_phi == nullptr together
// with shaping.use_intrinsic=false gives the external-only baseline.
PolicyTrainResult train_policy(const SimConfig& env, const IntrinsicFn& r_phi,
                               const ShapingConfig& shaping, const PPOConfig& cfg,
                               std::uint64_t seed);

// Roll out a fixed policy greedily (argmax) and report episode metrics.
EpisodeMetrics evaluate_policy(const SimConfig& env, const PolicyParams& policy, int horizon,
                               std::uint64_t seed);

// Roll out a fixed policy with sampled actions (the trained behavior). Greedy
// argmax can collapse onto a single phase and starve approaches, which makes
// completed-vehicle metrics incomparable across runs; sampling keeps served
// demand comparable.
EpisodeMetrics evaluate_policy_stochastic(const SimConfig& env, const PolicyParams& policy,
                                          int horizon, std::uint64_t seed);

// Arithmetic mean of per-episode metrics; optional fields are averaged over
// the episodes where they are present.
EpisodeMetrics average_metrics(const std::vector<EpisodeMetrics>& ms);

} // namespace c2t
