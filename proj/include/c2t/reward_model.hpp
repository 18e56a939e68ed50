#pragma once

#include "c2t/caption.hpp"
#include "c2t/judge.hpp"
#include "c2t/rng.hpp"
#include "c2t/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace c2t {

class EncodingError : public std::runtime_error {
public:
    explicit EncodingError(const std::string& what) : std::runtime_error(what) {}
};

class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

enum class FeatureKind : int { numeric_only = 0, unstructured = 1, structured_fusion = 2 };

const char* feature_kind_name(FeatureKind k);
FeatureKind feature_kind_from_name(const std::string& name);

// Feature layout.
//   numeric base (8): p[N,E,S,W], mean_delay, ttc_p10, ttc_p50, h_brake,
//     each standardized with the encoder's pool statistics.
//   structured tokens (35): phase one-hot (4), queue bins 4 approaches x 4,
//     delay bins (7), ttc_p10 bins (3), red_risk (1), brake bins (4),
//     derived from the parsed caption.
//   unstructured tokens (256): hashed lowercase character-trigram counts of
//     the prose, scaled by 0.1.
// field_mask groups: risk = {ttc_p10, ttc_p50, h_brake, rho_red},
// congestion = {q, p, delay, thru}; masked slots are zeroed in both the
// numeric and token parts (trigram buckets are not slot-separable and are
// left untouched).
struct EncoderSpec {
    FeatureKind kind = FeatureKind::structured_fusion;
    bool drop_risk = false;
    bool drop_congestion = false;
    std::array<double, 8> mu{};
    std::array<double, 8> sd{1, 1, 1, 1, 1, 1, 1, 1};

    static constexpr int kNumericDim = 8;
    static constexpr int kStructuredTokens = 4 + 16 + 7 + 3 + 1 + 4;
    static constexpr int kTrigramBuckets = 256;

    int dim() const;
    bool compatible(const EncoderSpec& other) const;

    // Standardization statistics from an observation pool.
    static EncoderSpec fit(FeatureKind kind, const std::vector<PoolEntry>& pool);
};

// Throws EncodingError when the caption does not match the mode's grammar.
std::vector<double> encode(const Observation& obs, const std::string& caption_text,
                           const EncoderSpec& spec);

struct ScorerHyper {
    double tau_bt = 1.0;
    double eta = 1e-4;
    double zeta = 1e-2;
};

// 1-hidden-layer tanh scorer with a scalar head; hidden == 0 selects the
// linear bypass used by oracle tests (score = w2 . f + b2).
struct RewardModelParams {
    EncoderSpec encoder;
    int hidden = 32;
    std::vector<double> W1; // hidden x dim, row major
    std::vector<double> b1; // hidden
    std::vector<double> w2; // hidden (or dim when linear)
    double b2 = 0.0;
    ScorerHyper hyper;

    std::size_t n_params() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);

    static RewardModelParams init(const EncoderSpec& spec, int hidden, ScorerHyper hyper,
                                  std::uint64_t seed);
};

double score(const RewardModelParams& params, std::span<const double> features);

// sigma((r1 - r2) / tau)
double bt_probability(double r1, double r2, double tau);

struct EncodedPair {
    std::vector<double> f1, f2;
    int y = 1;
    double w = 1.0;
};

struct LossBreakdown {
    double total = 0.0;
    double nll = 0.0;
    double l2 = 0.0;
    double center = 0.0;
    std::vector<double> grad; // flattened, same order as RewardModelParams::flatten
};

// Weighted BT negative log-likelihood + eta*||phi||^2 + zeta*(mean_ref r)^2,
// with exact gradients. `centering_ref` is the fixed reference feature sample
// the centering mean is taken over (may be empty).
LossBreakdown loss_and_gradient(const RewardModelParams& params, const std::vector<EncodedPair>& batch,
                                const std::vector<std::vector<double>>& centering_ref);

struct TrainOptions {
    double lr = 1e-2;
    double momentum = 0.9;
    int batch = 64;
    int epochs = 50;
    double heldout_frac = 0.2;
    std::uint64_t seed = 0;
    int hidden = 32;
    int centering_ref_size = 1024;
    double divergence_limit = 1e6;
};

struct TrainCurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double heldout_accuracy = 0.0;
};

struct TrainResult {
    RewardModelParams params;
    std::vector<TrainCurvePoint> curve;
    std::vector<EncodedPair> heldout;
};

std::vector<EncodedPair> encode_dataset(const PrefDataset& ds, const EncoderSpec& spec);

TrainResult train_reward_model(const PrefDataset& ds, const EncoderSpec& spec, ScorerHyper hyper,
                               const TrainOptions& opt);

// Variant over pre-encoded pairs (used by oracle tests and ablations).
TrainResult train_reward_model_encoded(std::vector<EncodedPair> pairs, const EncoderSpec& spec,
                                       ScorerHyper hyper, const TrainOptions& opt);

struct OfflineEval {
    double pairwise_accuracy = 0.0;
    double auc = 0.0;
    std::optional<double> spearman;
};

// accuracy: sign(dr) vs y with ties counting 0.5; AUC over dr as the score
// for y=1; Spearman of scores vs true utility when provided.
OfflineEval evaluate_offline(const RewardModelParams& params, const std::vector<EncodedPair>& heldout,
                             const std::vector<std::pair<std::vector<double>, double>>* true_utility = nullptr);

// Convex combination of two scorers, each applied through its own encoder.
struct Scorer {
    std::vector<RewardModelParams> parts;
    std::vector<double> weights;

    double score_features(std::span<const double> features) const;
    double score_obs(const Observation& obs, const std::string& caption_text) const;

    static Scorer single(RewardModelParams params);
};

Scorer fuse_scorers(const RewardModelParams& source, const RewardModelParams& target, double lambda_fuse);

double spearman_rank(const std::vector<double>& a, const std::vector<double>& b);

} // namespace c2t
