#pragma once

#include <memory>
#include <string>
#include <vector>

#include "offrec/data.hpp"
#include "offrec/graph.hpp"
#include "offrec/layers.hpp"
#include "offrec/rng.hpp"

namespace offrec::models {

using data::StateBatch;
using nn::Graph;
using nn::ParamStore;
using nn::Ref;
using nn::Tensor;

enum class Backbone { GRU, MeanPool, CausalCNN, Tabular };

Backbone backbone_from_string(const std::string& s);
std::string backbone_to_string(Backbone b);

struct EncoderConfig {
    Backbone backbone = Backbone::GRU;
    int embedding_dim = 64;
    int hidden_dim = 64;
    int window = 10;

    void validate() const {
        if (embedding_dim < 1 || hidden_dim < 1 || window < 1)
            throw ConfigError("encoder: dims and window must be >= 1");
    }
};

// Shared state encoder. The representation depends only on the non-PAD
// suffix of the window: PAD positions are masked out of every backbone.
//
// Tabular is the oracle-verification feature map: a one-hot over
// (last item, prefix length) pairs, which identifies the MDP state and the
// timestep exactly on the bundled fixtures. It has no parameters.
class Encoder {
 public:
    Encoder(EncoderConfig cfg, int catalog, ParamStore& store, const std::string& prefix,
            Rng& rng);

    Ref forward(Graph& g, ParamStore& store, const StateBatch& states) const;
    int output_dim() const { return output_dim_; }
    const EncoderConfig& config() const { return cfg_; }
    int catalog() const { return catalog_; }

 private:
    Ref forward_gru(Graph& g, ParamStore& store, const StateBatch& states) const;
    Ref forward_meanpool(Graph& g, ParamStore& store, const StateBatch& states) const;
    Ref forward_causal_cnn(Graph& g, ParamStore& store, const StateBatch& states) const;
    Ref forward_tabular(Graph& g, const StateBatch& states) const;

    EncoderConfig cfg_;
    int catalog_ = 0;
    std::string prefix_;
    int output_dim_ = 0;
};

// Actor: encoder plus a linear head over real items (PAD has no logit slot,
// so its probability is identically zero).
class PolicyModel {
 public:
    PolicyModel(EncoderConfig cfg, int catalog, Rng& rng, const std::string& prefix = "pi");

    Ref logits(Graph& g, const StateBatch& states);
    Ref logits(Graph& g, ParamStore& store, const StateBatch& states) const;

    // log pi(.|s) for every state in the batch, [batch, catalog]
    Tensor log_probs(const StateBatch& states) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const Encoder& encoder() const { return encoder_; }
    int catalog() const { return catalog_; }

 private:
    int catalog_;
    ParamStore params_;
    Encoder encoder_;
    std::string head_prefix_;
};

// Critic with a value/advantage split: Q(s, a) = V(s) + A(s, a). Heads are
// zero-initialized, so an untrained action column reports exactly the state
// value. Keeps a hard-copied target parameter set.
class CriticModel {
 public:
    enum class SyncMode { Hard, Polyak };

    CriticModel(EncoderConfig cfg, int catalog, Rng& rng, const std::string& prefix = "q");

    Ref q_values_graph(Graph& g, const StateBatch& states, bool use_target);
    Tensor q_values(const StateBatch& states, bool use_target) const;

    // Hard mode copies every `period` calls; Polyak blends every call.
    void configure_sync(SyncMode mode, int period, double tau);
    void sync_target();

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    ParamStore& target_params() { return target_; }
    const ParamStore& target_params() const { return target_; }
    int catalog() const { return catalog_; }
    int sync_count() const { return sync_calls_; }

 private:
    Ref forward(Graph& g, ParamStore& store, const StateBatch& states) const;

    int catalog_;
    ParamStore params_;
    ParamStore target_;
    Encoder encoder_;
    std::string head_prefix_;
    SyncMode mode_ = SyncMode::Hard;
    int period_ = 500;
    double tau_ = 0.005;
    int sync_calls_ = 0;
};

// Estimated logging policy pi_b_hat: a PolicyModel that can be frozen after
// supervised training.
class BehaviorModel {
 public:
    BehaviorModel(EncoderConfig cfg, int catalog, Rng& rng)
        : policy_(cfg, catalog, rng, "bh") {}

    PolicyModel& policy() {
        if (frozen_) throw UsageError("behavior model is frozen");
        return policy_;
    }
    const PolicyModel& policy() const { return policy_; }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    // log pi_b_hat(.|s), [batch, catalog]
    Tensor log_probs(const StateBatch& states) const { return policy_.log_probs(states); }

 private:
    PolicyModel policy_;
    bool frozen_ = false;
};

struct GumbelSample {
    Tensor noise;       // [batch, catalog] i.i.d. Gumbel(0,1)
    double temperature; // gamma_g
    Ref relaxed;        // y on the simplex, differentiable w.r.t. log_probs
};

// y = softmax((log_probs + g) / gamma_g), built on the graph so gradients
// flow into log_probs for fixed noise.
GumbelSample gumbel_softmax_sample(Graph& g, Ref log_probs, double gamma_g, Rng& rng);

// Non-graph variant for distribution tests: returns the relaxed vector for
// a single log-prob row.
std::vector<double> gumbel_softmax_vector(const std::vector<double>& log_probs, double gamma_g,
                                          Rng& rng);

// Top-k item ids by descending score, ties broken by ascending id.
std::vector<int> top_k_from_scores(const std::vector<double>& scores, int k);

std::vector<int> top_k(const PolicyModel& model, const StateBatch& single_state, int k);

}  // namespace offrec::models
