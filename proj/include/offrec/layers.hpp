#pragma once

#include "offrec/graph.hpp"

namespace offrec::nn {

// output = input . weights + bias
inline Ref dense_forward(Graph& g, Ref input, Ref weights, Ref bias) {
    return g.add_rowwise(g.matmul(input, weights), bias);
}

inline Ref dense_forward(Graph& g, Ref input, ParamStore& store, const std::string& prefix) {
    return dense_forward(g, input, g.param(store, prefix + ".W"), g.param(store, prefix + ".b"));
}

// Registers GRU cell parameters under `prefix`. Gate weights are fused as
// [d_in + d_h, 2*d_h] (update, reset) plus a separate candidate block.
inline void gru_init(ParamStore& store, const std::string& prefix, std::size_t d_in,
                     std::size_t d_h, double scale, Rng& rng) {
    store.create_uniform(prefix + ".Wzr", d_in + d_h, 2 * d_h, scale, rng);
    store.create(prefix + ".bzr", 1, 2 * d_h);
    store.create_uniform(prefix + ".Wn", d_in + d_h, d_h, scale, rng);
    store.create(prefix + ".bn", 1, d_h);
}

// Gated recurrent unit update:
//   z = sigmoid([x, h] Wz + bz)        update gate
//   r = sigmoid([x, h] Wr + br)        reset gate
//   n = tanh([x, r*h] Wn + bn)         candidate
//   h' = z*n + (1-z)*h                 z -> 1 selects the candidate
inline Ref gru_cell(Graph& g, Ref x, Ref h, ParamStore& store, const std::string& prefix) {
    std::size_t d_h = g.value(h).cols();
    if (g.value(x).rows() != g.value(h).rows())
        throw DimensionError("gru_cell: batch sizes differ");
    Ref xh = g.concat_cols(x, h);
    Ref gates = g.sigmoid(dense_forward(g, xh, g.param(store, prefix + ".Wzr"),
                                        g.param(store, prefix + ".bzr")));
    Ref z = g.slice_cols(gates, 0, d_h);
    Ref r = g.slice_cols(gates, d_h, d_h);
    Ref xrh = g.concat_cols(x, g.mul(r, h));
    Ref n = g.tanh_fn(
        dense_forward(g, xrh, g.param(store, prefix + ".Wn"), g.param(store, prefix + ".bn")));
    // h' = z*n + h - z*h
    return g.add(g.mul(z, n), g.sub(h, g.mul(z, h)));
}

}  // namespace offrec::nn
