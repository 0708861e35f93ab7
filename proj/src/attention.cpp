#include "nudiff/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace nudiff {

ZeroCrossAttentionBlock ZeroCrossAttentionBlock::init(size_t d_model, Rng& rng, double scale) {
    ZeroCrossAttentionBlock b;
    b.d_model = d_model;
    b.w_q = Mat(d_model, d_model);
    b.w_k = Mat(d_model, d_model);
    b.w_v = Mat(d_model, d_model);
    b.w_out = Mat(d_model, d_model, 0.0);
    const double s = scale / std::sqrt(static_cast<double>(d_model));
    for (auto& x : b.w_q.data) x = s * rng.normal();
    for (auto& x : b.w_k.data) x = s * rng.normal();
    for (auto& x : b.w_v.data) x = s * rng.normal();
    return b;
}

AttentionResult cross_attention_forward(const ZeroCrossAttentionBlock& block,
                                        const Mat& query_feats, const Mat& kv_feats) {
    const size_t d = block.d_model;
    if (query_feats.cols != d || kv_feats.cols != d)
        throw std::invalid_argument("cross_attention_forward: feature width != d_model");
    const size_t lq = query_feats.rows;
    const size_t lk = kv_feats.rows;
    if (lq == 0 || lk == 0)
        throw std::invalid_argument("cross_attention_forward: empty inputs");

    AttentionResult r;
    r.cache.query_feats = query_feats;
    r.cache.kv_feats = kv_feats;
    r.cache.q = matmul_bt(query_feats, block.w_q);  // per position: W_q x
    r.cache.k = matmul_bt(kv_feats, block.w_k);
    r.cache.v = matmul_bt(kv_feats, block.w_v);

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Mat scores = matmul_bt(r.cache.q, r.cache.k);
    for (auto& x : scores.data)
        x *= inv_sqrt_d;

    // row softmax with max subtraction
    Mat a(lq, lk);
    for (size_t i = 0; i < lq; i++) {
        double mx = scores(i, 0);
        for (size_t j = 1; j < lk; j++)
            mx = std::max(mx, scores(i, j));
        double sum = 0.0;
        for (size_t j = 0; j < lk; j++) {
            a(i, j) = std::exp(scores(i, j) - mx);
            sum += a(i, j);
        }
        for (size_t j = 0; j < lk; j++)
            a(i, j) /= sum;
    }

    r.map.weights = a;
    r.map.features = matmul(a, r.cache.v);  // FM = A V
    r.cache.map = r.map;

    // residual form: zero W_out means the block is an exact identity
    r.output = query_feats;
    Mat proj = matmul_bt(r.map.features, block.w_out);
    for (size_t i = 0; i < r.output.data.size(); i++)
        r.output.data[i] += proj.data[i];
    return r;
}

AttentionGrads cross_attention_backward(const ZeroCrossAttentionBlock& block,
                                        const AttentionCache& cache, const Mat& d_output,
                                        const Mat& d_features, const Mat& d_weights) {
    const size_t d = block.d_model;
    const size_t lq = cache.query_feats.rows;
    const size_t lk = cache.kv_feats.rows;
    if (d_output.rows != lq || d_output.cols != d)
        throw std::invalid_argument("cross_attention_backward: stale cache");

    AttentionGrads g;
    g.query_feats = d_output;  // residual path

    // output = X + FM W_out^T
    g.w_out = matmul_at(d_output, cache.map.features);
    Mat d_fm = matmul(d_output, block.w_out);
    if (d_features.size() > 0) {
        if (d_features.rows != lq || d_features.cols != d)
            throw std::invalid_argument("cross_attention_backward: d_features shape");
        for (size_t i = 0; i < d_fm.data.size(); i++)
            d_fm.data[i] += d_features.data[i];
    }

    // FM = A V
    Mat d_a = matmul_bt(d_fm, cache.v);
    Mat d_v = matmul_at(cache.map.weights, d_fm);
    if (d_weights.size() > 0) {
        if (d_weights.rows != lq || d_weights.cols != lk)
            throw std::invalid_argument("cross_attention_backward: d_weights shape");
        for (size_t i = 0; i < d_a.data.size(); i++)
            d_a.data[i] += d_weights.data[i];
    }

    // softmax backward, row-wise: dS_i = A_i o (dA_i - <dA_i, A_i>)
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Mat d_s(lq, lk);
    for (size_t i = 0; i < lq; i++) {
        double inner = 0.0;
        for (size_t j = 0; j < lk; j++)
            inner += d_a(i, j) * cache.map.weights(i, j);
        for (size_t j = 0; j < lk; j++)
            d_s(i, j) = cache.map.weights(i, j) * (d_a(i, j) - inner) * inv_sqrt_d;
    }

    // S = Q K^T (scale folded into d_s above)
    Mat d_q = matmul(d_s, cache.k);
    Mat d_k = matmul_at(d_s, cache.q);

    // Q = X W_q^T etc.
    g.w_q = matmul_at(d_q, cache.query_feats);
    g.w_k = matmul_at(d_k, cache.kv_feats);
    g.w_v = matmul_at(d_v, cache.kv_feats);

    Mat dx_q = matmul(d_q, block.w_q);
    for (size_t i = 0; i < g.query_feats.data.size(); i++)
        g.query_feats.data[i] += dx_q.data[i];

    g.kv_feats = matmul(d_k, block.w_k);
    Mat dy_v = matmul(d_v, block.w_v);
    for (size_t i = 0; i < g.kv_feats.data.size(); i++)
        g.kv_feats.data[i] += dy_v.data[i];

    return g;
}

double atv_loss(const Mat& features) {
    if (features.rows == 0)
        throw std::invalid_argument("atv_loss: empty feature map");
    double acc = 0.0;
    for (size_t i = 0; i + 1 < features.rows; i++)
        for (size_t c = 0; c < features.cols; c++)
            acc += std::abs(features(i + 1, c) - features(i, c));
    return acc;
}

Mat atv_grad(const Mat& features) {
    Mat g(features.rows, features.cols, 0.0);
    for (size_t i = 0; i + 1 < features.rows; i++) {
        for (size_t c = 0; c < features.cols; c++) {
            const double diff = features(i + 1, c) - features(i, c);
            const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            g(i + 1, c) += s;
            g(i, c) -= s;
        }
    }
    return g;
}

}  // namespace nudiff
