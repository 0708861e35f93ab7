#pragma once

#include "nudiff/linalg.hpp"
#include "nudiff/rng.hpp"

namespace nudiff {

// Single-head residual cross-attention whose output projection starts at
// exactly zero, so a fresh block is an identity on query features and the
// conditioning signal is injected gradually as W_out departs zero.
struct ZeroCrossAttentionBlock {
    size_t d_model = 0;
    Mat w_q, w_k, w_v;  // d_model x d_model projections
    Mat w_out;          // d_model x d_model, zero at initialization

    static ZeroCrossAttentionBlock init(size_t d_model, Rng& rng, double scale = 0.2);
};

// A: row-stochastic attention weights. FM: attended features arranged along
// a 1-D spatial axis (one row per query position).
struct AttentionMap {
    Mat weights;   // L_q x L_k
    Mat features;  // L_q x d_model
};

struct AttentionCache {
    Mat query_feats, kv_feats;  // inputs
    Mat q, k, v;                // projections
    AttentionMap map;
};

struct AttentionResult {
    Mat output;  // L_q x d_model, residual form
    AttentionMap map;
    AttentionCache cache;
};

AttentionResult cross_attention_forward(const ZeroCrossAttentionBlock& block,
                                        const Mat& query_feats, const Mat& kv_feats);

struct AttentionGrads {
    Mat w_q, w_k, w_v, w_out;
    Mat query_feats;  // gradient flowing back into the query features
    Mat kv_feats;     // gradient into the K/V source (unused when tokens are data)
};

// Exact reverse-mode gradients through the block. d_features and d_weights
// inject extra loss gradients directly at FM and A (the ATV penalty enters
// here); pass empty matrices when unused.
AttentionGrads cross_attention_backward(const ZeroCrossAttentionBlock& block,
                                        const AttentionCache& cache, const Mat& d_output,
                                        const Mat& d_features = {}, const Mat& d_weights = {});

// L1 norm of forward differences along the spatial axis, summed over
// channels. A single-position input yields 0.
double atv_loss(const Mat& features);

// Subgradient of atv_loss with sign(0) = 0.
Mat atv_grad(const Mat& features);

}  // namespace nudiff
