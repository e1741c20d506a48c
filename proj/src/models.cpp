#include "offrec/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace offrec::models {

Backbone backbone_from_string(const std::string& s) {
    if (s == "gru") return Backbone::GRU;
    if (s == "meanpool") return Backbone::MeanPool;
    if (s == "cnn" || s == "causalcnn") return Backbone::CausalCNN;
    if (s == "tabular") return Backbone::Tabular;
    throw ConfigError("unknown backbone: " + s);
}

std::string backbone_to_string(Backbone b) {
    switch (b) {
        case Backbone::GRU: return "gru";
        case Backbone::MeanPool: return "meanpool";
        case Backbone::CausalCNN: return "cnn";
        case Backbone::Tabular: return "tabular";
    }
    return "gru";
}

Encoder::Encoder(EncoderConfig cfg, int catalog, ParamStore& store, const std::string& prefix,
                 Rng& rng)
    : cfg_(cfg), catalog_(catalog), prefix_(prefix) {
    cfg_.validate();
    if (catalog_ < 1) throw ConfigError("encoder: catalog must be >= 1");
    int vocab = catalog_ + 1;  // + PAD row
    double emb_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.embedding_dim));
    switch (cfg_.backbone) {
        case Backbone::GRU: {
            store.create_uniform(prefix_ + ".emb", static_cast<std::size_t>(vocab),
                                 static_cast<std::size_t>(cfg_.embedding_dim), emb_scale, rng);
            double s = 1.0 / std::sqrt(static_cast<double>(cfg_.embedding_dim + cfg_.hidden_dim));
            nn::gru_init(store, prefix_ + ".gru", static_cast<std::size_t>(cfg_.embedding_dim),
                         static_cast<std::size_t>(cfg_.hidden_dim), s, rng);
            output_dim_ = cfg_.hidden_dim;
            break;
        }
        case Backbone::MeanPool: {
            store.create_uniform(prefix_ + ".emb", static_cast<std::size_t>(vocab),
                                 static_cast<std::size_t>(cfg_.embedding_dim), emb_scale, rng);
            output_dim_ = cfg_.embedding_dim;
            break;
        }
        case Backbone::CausalCNN: {
            store.create_uniform(prefix_ + ".emb", static_cast<std::size_t>(vocab),
                                 static_cast<std::size_t>(cfg_.embedding_dim), emb_scale, rng);
            double s1 = 1.0 / std::sqrt(static_cast<double>(2 * cfg_.embedding_dim));
            // two taps per layer; layer 1 dilation 1, layer 2 dilation 2
            store.create_uniform(prefix_ + ".c1.W0", static_cast<std::size_t>(cfg_.embedding_dim),
                                 static_cast<std::size_t>(cfg_.hidden_dim), s1, rng);
            store.create_uniform(prefix_ + ".c1.W1", static_cast<std::size_t>(cfg_.embedding_dim),
                                 static_cast<std::size_t>(cfg_.hidden_dim), s1, rng);
            store.create(prefix_ + ".c1.b", 1, static_cast<std::size_t>(cfg_.hidden_dim));
            double s2 = 1.0 / std::sqrt(static_cast<double>(2 * cfg_.hidden_dim));
            store.create_uniform(prefix_ + ".c2.W0", static_cast<std::size_t>(cfg_.hidden_dim),
                                 static_cast<std::size_t>(cfg_.hidden_dim), s2, rng);
            store.create_uniform(prefix_ + ".c2.W1", static_cast<std::size_t>(cfg_.hidden_dim),
                                 static_cast<std::size_t>(cfg_.hidden_dim), s2, rng);
            store.create(prefix_ + ".c2.b", 1, static_cast<std::size_t>(cfg_.hidden_dim));
            output_dim_ = cfg_.hidden_dim;
            break;
        }
        case Backbone::Tabular: {
            // one-hot over (last item or none) x prefix length bin; no params
            output_dim_ = 1 + cfg_.window * catalog_;
            break;
        }
    }
}

Ref Encoder::forward(Graph& g, ParamStore& store, const StateBatch& states) const {
    if (states.window != cfg_.window && cfg_.backbone != Backbone::Tabular)
        throw DimensionError("encoder: state window " + std::to_string(states.window) +
                             " does not match config window " + std::to_string(cfg_.window));
    switch (cfg_.backbone) {
        case Backbone::GRU: return forward_gru(g, store, states);
        case Backbone::MeanPool: return forward_meanpool(g, store, states);
        case Backbone::CausalCNN: return forward_causal_cnn(g, store, states);
        case Backbone::Tabular: return forward_tabular(g, states);
    }
    throw ConfigError("encoder: bad backbone");
}

Ref Encoder::forward_gru(Graph& g, ParamStore& store, const StateBatch& states) const {
    std::size_t batch = states.size();
    Ref h = g.input(Tensor(batch, static_cast<std::size_t>(cfg_.hidden_dim)));
    for (int t = 0; t < states.window; ++t) {
        std::vector<int> ids(batch);
        Tensor mask(batch, 1);
        for (std::size_t r = 0; r < batch; ++r) {
            int item = states.item(r, t);
            ids[r] = item;
            mask(r, 0) = (item == states.pad_id) ? 0.0 : 1.0;
        }
        Ref x = g.embedding(store, prefix_ + ".emb", ids);
        Ref h_new = nn::gru_cell(g, x, h, store, prefix_ + ".gru");
        // keep the previous hidden state at PAD positions
        Ref m = g.input(mask);
        Ref keep = g.input([&] {
            Tensor inv = mask;
            for (double& v : inv.values) v = 1.0 - v;
            return inv;
        }());
        h = g.add(g.mul_colwise(h_new, m), g.mul_colwise(h, keep));
    }
    return h;
}

Ref Encoder::forward_meanpool(Graph& g, ParamStore& store, const StateBatch& states) const {
    std::size_t batch = states.size();
    Ref sum = g.input(Tensor(batch, static_cast<std::size_t>(cfg_.embedding_dim)));
    for (int t = 0; t < states.window; ++t) {
        std::vector<int> ids(batch);
        Tensor mask(batch, 1);
        for (std::size_t r = 0; r < batch; ++r) {
            int item = states.item(r, t);
            ids[r] = item;
            mask(r, 0) = (item == states.pad_id) ? 0.0 : 1.0;
        }
        Ref x = g.embedding(store, prefix_ + ".emb", ids);
        sum = g.add(sum, g.mul_colwise(x, g.input(mask)));
    }
    Tensor inv_len(batch, 1);
    for (std::size_t r = 0; r < batch; ++r) {
        int effective = std::min(states.lengths[r], states.window);
        inv_len(r, 0) = effective > 0 ? 1.0 / static_cast<double>(effective) : 0.0;
    }
    return g.mul_colwise(sum, g.input(inv_len));
}

Ref Encoder::forward_causal_cnn(Graph& g, ParamStore& store, const StateBatch& states) const {
    std::size_t batch = states.size();
    int W = states.window;
    // masked embeddings per position
    std::vector<Ref> emb(static_cast<std::size_t>(W));
    for (int t = 0; t < W; ++t) {
        std::vector<int> ids(batch);
        Tensor mask(batch, 1);
        for (std::size_t r = 0; r < batch; ++r) {
            int item = states.item(r, t);
            ids[r] = item;
            mask(r, 0) = (item == states.pad_id) ? 0.0 : 1.0;
        }
        emb[static_cast<std::size_t>(t)] =
            g.mul_colwise(g.embedding(store, prefix_ + ".emb", ids), g.input(mask));
    }
    // layer 1 (dilation 1): needed at final position and final-2
    auto conv1 = [&](int t) -> Ref {
        Ref acc = g.matmul(emb[static_cast<std::size_t>(t)], g.param(store, prefix_ + ".c1.W1"));
        if (t - 1 >= 0)
            acc = g.add(acc, g.matmul(emb[static_cast<std::size_t>(t - 1)],
                                      g.param(store, prefix_ + ".c1.W0")));
        return g.tanh_fn(g.add_rowwise(acc, g.param(store, prefix_ + ".c1.b")));
    };
    int last = W - 1;
    Ref h_last = conv1(last);
    Ref acc = g.matmul(h_last, g.param(store, prefix_ + ".c2.W1"));
    if (last - 2 >= 0) {
        Ref h_prev = conv1(last - 2);
        acc = g.add(acc, g.matmul(h_prev, g.param(store, prefix_ + ".c2.W0")));
    }
    return g.tanh_fn(g.add_rowwise(acc, g.param(store, prefix_ + ".c2.b")));
}

Ref Encoder::forward_tabular(Graph& g, const StateBatch& states) const {
    std::size_t batch = states.size();
    Tensor feat(batch, static_cast<std::size_t>(output_dim_));
    for (std::size_t r = 0; r < batch; ++r) {
        int len = std::min(states.lengths[r], cfg_.window);
        int idx = 0;
        if (len > 0) {
            int last = states.item(r, states.window - 1);
            if (last == states.pad_id)
                throw DataError("tabular encoder: non-empty prefix ends in PAD");
            idx = 1 + (len - 1) * catalog_ + last;
        }
        feat(r, static_cast<std::size_t>(idx)) = 1.0;
    }
    return g.input(std::move(feat));
}

PolicyModel::PolicyModel(EncoderConfig cfg, int catalog, Rng& rng, const std::string& prefix)
    : catalog_(catalog), encoder_(cfg, catalog, params_, prefix + ".enc", rng) {
    // zero-init head: the untrained policy is exactly uniform
    params_.create(prefix + ".head.W", static_cast<std::size_t>(encoder_.output_dim()),
                   static_cast<std::size_t>(catalog_));
    params_.create(prefix + ".head.b", 1, static_cast<std::size_t>(catalog_));
    head_prefix_ = prefix + ".head";
}

Ref PolicyModel::logits(Graph& g, const StateBatch& states) {
    return logits(g, params_, states);
}

Ref PolicyModel::logits(Graph& g, ParamStore& store, const StateBatch& states) const {
    Ref repr = encoder_.forward(g, store, states);
    return nn::dense_forward(g, repr, store, head_prefix_);
}

Tensor PolicyModel::log_probs(const StateBatch& states) const {
    Graph g;
    // forward pass only; const_cast is safe because no gradients are taken
    Ref lp = g.log_softmax_rows(logits(g, const_cast<ParamStore&>(params_), states));
    return g.value(lp);
}

CriticModel::CriticModel(EncoderConfig cfg, int catalog, Rng& rng, const std::string& prefix)
    : catalog_(catalog), encoder_(cfg, catalog, params_, prefix + ".enc", rng) {
    // zero-init value and advantage heads: untrained Q is exactly zero and an
    // action column that never receives gradient stays at the state value
    params_.create(prefix + ".v.W", static_cast<std::size_t>(encoder_.output_dim()), 1);
    params_.create(prefix + ".v.b", 1, 1);
    params_.create(prefix + ".adv.W", static_cast<std::size_t>(encoder_.output_dim()),
                   static_cast<std::size_t>(catalog_));
    params_.create(prefix + ".adv.b", 1, static_cast<std::size_t>(catalog_));
    head_prefix_ = prefix;
    target_ = params_.clone_values();
}

Ref CriticModel::forward(Graph& g, ParamStore& store, const StateBatch& states) const {
    Ref repr = encoder_.forward(g, store, states);
    Ref v = nn::dense_forward(g, repr, store, head_prefix_ + ".v");
    Ref adv = nn::dense_forward(g, repr, store, head_prefix_ + ".adv");
    return g.add_colwise(adv, v);
}

Ref CriticModel::q_values_graph(Graph& g, const StateBatch& states, bool use_target) {
    return forward(g, use_target ? target_ : params_, states);
}

Tensor CriticModel::q_values(const StateBatch& states, bool use_target) const {
    Graph g;
    Ref q = forward(g, const_cast<ParamStore&>(use_target ? target_ : params_), states);
    return g.value(q);
}

void CriticModel::configure_sync(SyncMode mode, int period, double tau) {
    if (mode == SyncMode::Hard && period < 1)
        throw ConfigError("target sync: hard period must be >= 1");
    if (mode == SyncMode::Polyak && (tau <= 0.0 || tau > 1.0))
        throw ConfigError("target sync: polyak tau must be in (0, 1]");
    mode_ = mode;
    period_ = period;
    tau_ = tau;
}

void CriticModel::sync_target() {
    ++sync_calls_;
    if (mode_ == SyncMode::Hard) {
        if (sync_calls_ % period_ == 0) target_.copy_values_from(params_);
    } else {
        target_.polyak_from(params_, tau_);
    }
}

GumbelSample gumbel_softmax_sample(Graph& g, Ref log_probs, double gamma_g, Rng& rng) {
    if (gamma_g <= 0.0) throw ConfigError("gumbel_softmax: temperature must be > 0");
    const Tensor& lp = g.value(log_probs);
    Tensor noise(lp.rows(), lp.cols());
    for (double& v : noise.values) v = rng.gumbel();
    GumbelSample sample;
    sample.noise = noise;
    sample.temperature = gamma_g;
    Ref perturbed = g.scale(g.add(log_probs, g.input(std::move(noise))), 1.0 / gamma_g);
    sample.relaxed = g.softmax_rows(perturbed);
    return sample;
}

std::vector<double> gumbel_softmax_vector(const std::vector<double>& log_probs, double gamma_g,
                                          Rng& rng) {
    Graph g;
    Ref lp = g.input(Tensor::row(log_probs));
    GumbelSample s = gumbel_softmax_sample(g, lp, gamma_g, rng);
    return g.value(s.relaxed).values;
}

std::vector<int> top_k_from_scores(const std::vector<double>& scores, int k) {
    if (k < 1 || k > static_cast<int>(scores.size()))
        throw UsageError("top_k: k out of range: " + std::to_string(k));
    std::vector<int> ids(scores.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    ids.resize(static_cast<std::size_t>(k));
    return ids;
}

std::vector<int> top_k(const PolicyModel& model, const StateBatch& single_state, int k) {
    Tensor lp = model.log_probs(single_state);
    std::vector<double> scores(lp.values.begin(), lp.values.begin() + static_cast<std::ptrdiff_t>(lp.cols()));
    return top_k_from_scores(scores, k);
}

}  // namespace offrec::models
