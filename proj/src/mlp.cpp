#include "nudiff/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace nudiff {

Vec embed_time(int t, size_t d_time, int total_steps) {
    if (t < 0 || t >= total_steps)
        throw std::out_of_range("embed_time: timestep out of range");
    if (d_time % 2 != 0)
        throw std::invalid_argument("embed_time: d_time must be even");
    Vec e(d_time);
    for (size_t i = 0; i < d_time / 2; i++) {
        const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / d_time);
        const double angle = t * freq;
        e[2 * i] = std::sin(angle);
        e[2 * i + 1] = std::cos(angle);
    }
    return e;
}

void MlpConfig::validate() const {
    if (data_dim == 0 || hidden == 0 || n_classes == 0)
        throw std::invalid_argument("MlpConfig: zero dimension");
    if (time_dim % 2 != 0)
        throw std::invalid_argument("MlpConfig: time_dim must be even");
    if (hidden % cond_dim != 0)
        throw std::invalid_argument("MlpConfig: hidden must be a multiple of cond_dim");
    if (total_steps < 1)
        throw std::invalid_argument("MlpConfig: total_steps must be >= 1");
}

namespace {

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

Mat rows_from_vec(const Vec& v, size_t rows, size_t cols) {
    Mat m(rows, cols);
    m.data = v;
    return m;
}

void fill_normal(Mat& m, Rng& rng, double scale) {
    for (auto& x : m.data)
        x = scale * rng.normal();
}

}  // namespace

MlpDenoiser MlpDenoiser::init(const MlpConfig& cfg, uint64_t seed) {
    cfg.validate();
    MlpDenoiser m = zeros(cfg);
    Rng rng(seed);
    // He-style scaling for the SiLU trunk
    fill_normal(m.w1, rng, std::sqrt(2.0 / cfg.input_dim()));
    fill_normal(m.w2, rng, std::sqrt(2.0 / cfg.hidden));
    fill_normal(m.w3, rng, std::sqrt(1.0 / cfg.hidden));
    m.attn = ZeroCrossAttentionBlock::init(cfg.cond_dim, rng);
    fill_normal(m.class_emb, rng, 0.5);
    return m;
}

MlpDenoiser MlpDenoiser::zeros(const MlpConfig& cfg) {
    cfg.validate();
    MlpDenoiser m;
    m.cfg = cfg;
    m.w1 = Mat(cfg.hidden, cfg.input_dim());
    m.b1 = Vec(cfg.hidden, 0.0);
    m.attn.d_model = cfg.cond_dim;
    m.attn.w_q = Mat(cfg.cond_dim, cfg.cond_dim);
    m.attn.w_k = Mat(cfg.cond_dim, cfg.cond_dim);
    m.attn.w_v = Mat(cfg.cond_dim, cfg.cond_dim);
    m.attn.w_out = Mat(cfg.cond_dim, cfg.cond_dim);
    m.w2 = Mat(cfg.hidden, cfg.hidden);
    m.b2 = Vec(cfg.hidden, 0.0);
    m.w3 = Mat(cfg.data_dim, cfg.hidden);
    m.b3 = Vec(cfg.data_dim, 0.0);
    m.class_emb = Mat(cfg.n_classes, cfg.cond_dim);
    return m;
}

std::pair<Vec, MlpCache> MlpDenoiser::forward(const Vec& xt, int t,
                                              const ConditionInput& cond) const {
    if (xt.size() != cfg.data_dim)
        throw std::invalid_argument("MlpDenoiser: input dimension mismatch");
    if (cond.class_id < 0 || cond.class_id >= static_cast<int>(cfg.n_classes))
        throw std::out_of_range("MlpDenoiser: class_id outside embedding table");
    if (cond.tokens.size() > 0 && cond.tokens.cols != cfg.cond_dim)
        throw std::invalid_argument("MlpDenoiser: token width != cond_dim");

    MlpCache c;
    c.class_id = cond.class_id;
    c.input.reserve(cfg.input_dim());
    c.input.insert(c.input.end(), xt.begin(), xt.end());
    Vec te = embed_time(t, cfg.time_dim, cfg.total_steps);
    c.input.insert(c.input.end(), te.begin(), te.end());
    const double* emb = class_emb.row(cond.class_id);
    c.input.insert(c.input.end(), emb, emb + cfg.cond_dim);

    c.z1 = matvec(w1, c.input);
    for (size_t i = 0; i < c.z1.size(); i++)
        c.z1[i] += b1[i];
    c.h1.resize(c.z1.size());
    for (size_t i = 0; i < c.z1.size(); i++)
        c.h1[i] = silu(c.z1[i]);

    Mat query = rows_from_vec(c.h1, cfg.attn_positions(), cfg.cond_dim);
    Mat kv = cond.tokens;
    if (kv.size() == 0)
        kv = Mat(1, cfg.cond_dim, 0.0);
    AttentionResult ar = cross_attention_forward(attn, query, kv);
    c.attn = std::move(ar.cache);
    c.map = ar.map;
    c.h1_attended = std::move(ar.output.data);

    c.z2 = matvec(w2, c.h1_attended);
    for (size_t i = 0; i < c.z2.size(); i++)
        c.z2[i] += b2[i];
    c.h2.resize(c.z2.size());
    for (size_t i = 0; i < c.z2.size(); i++)
        c.h2[i] = silu(c.z2[i]);

    Vec eps = matvec(w3, c.h2);
    for (size_t i = 0; i < eps.size(); i++)
        eps[i] += b3[i];
    return {std::move(eps), std::move(c)};
}

MlpGrads MlpDenoiser::backward(const MlpCache& cache, const Vec& grad_output,
                               const Mat& d_features, const Mat& d_weights) const {
    MlpGrads g = zero_grads();
    backward_into(cache, grad_output, d_features, d_weights, g);
    return g;
}

void MlpDenoiser::backward_into(const MlpCache& cache, const Vec& grad_output,
                                const Mat& d_features, const Mat& d_weights,
                                MlpGrads& g) const {
    if (grad_output.size() != cfg.data_dim || cache.h2.size() != cfg.hidden)
        throw std::invalid_argument("MlpDenoiser::backward: stale cache");
    if (g.w1.rows != cfg.hidden || g.class_emb.rows != cfg.n_classes)
        throw std::invalid_argument("MlpDenoiser::backward: grad buffer shape");

    // eps = w3 h2 + b3
    for (size_t i = 0; i < cfg.data_dim; i++) {
        g.b3[i] = grad_output[i];
        for (size_t j = 0; j < cfg.hidden; j++)
            g.w3(i, j) = grad_output[i] * cache.h2[j];
    }
    Vec dh2 = matvec_t(w3, grad_output);

    Vec dz2(cfg.hidden);
    for (size_t i = 0; i < cfg.hidden; i++)
        dz2[i] = dh2[i] * silu_grad(cache.z2[i]);
    for (size_t i = 0; i < cfg.hidden; i++) {
        g.b2[i] = dz2[i];
        for (size_t j = 0; j < cfg.hidden; j++)
            g.w2(i, j) = dz2[i] * cache.h1_attended[j];
    }
    Vec dh1_att = matvec_t(w2, dz2);

    Mat d_out_attn = rows_from_vec(dh1_att, cfg.attn_positions(), cfg.cond_dim);
    AttentionGrads ag = cross_attention_backward(attn, cache.attn, d_out_attn,
                                                 d_features, d_weights);
    g.w_q.data = std::move(ag.w_q.data);
    g.w_k.data = std::move(ag.w_k.data);
    g.w_v.data = std::move(ag.w_v.data);
    g.w_out.data = std::move(ag.w_out.data);
    const Vec& dh1 = ag.query_feats.data;

    Vec dz1(cfg.hidden);
    for (size_t i = 0; i < cfg.hidden; i++)
        dz1[i] = dh1[i] * silu_grad(cache.z1[i]);
    for (size_t i = 0; i < cfg.hidden; i++) {
        g.b1[i] = dz1[i];
        for (size_t j = 0; j < cfg.input_dim(); j++)
            g.w1(i, j) = dz1[i] * cache.input[j];
    }
    Vec din = matvec_t(w1, dz1);

    // only the class embedding slice of the input is a parameter
    const size_t emb_off = cfg.data_dim + cfg.time_dim;
    std::fill(g.class_emb.data.begin(), g.class_emb.data.end(), 0.0);
    for (size_t i = 0; i < cfg.cond_dim; i++)
        g.class_emb(cache.class_id, i) = din[emb_off + i];
}

Vec MlpDenoiser::predict(const Vec& xt, int t, const ConditionInput& cond) const {
    return forward(xt, t, cond).first;
}

std::vector<const Vec*> MlpDenoiser::param_blocks() const {
    return {&w1.data,        &b1, &attn.w_q.data, &attn.w_k.data, &attn.w_v.data,
            &attn.w_out.data, &w2.data, &b2, &w3.data, &b3, &class_emb.data};
}

std::vector<Vec*> MlpDenoiser::param_blocks() {
    return {&w1.data,        &b1, &attn.w_q.data, &attn.w_k.data, &attn.w_v.data,
            &attn.w_out.data, &w2.data, &b2, &w3.data, &b3, &class_emb.data};
}

size_t MlpDenoiser::param_count() const {
    size_t n = 0;
    for (const Vec* b : param_blocks())
        n += b->size();
    return n;
}

Vec MlpDenoiser::flatten_params() const {
    Vec theta;
    theta.reserve(param_count());
    for (const Vec* b : param_blocks())
        theta.insert(theta.end(), b->begin(), b->end());
    return theta;
}

void MlpDenoiser::unflatten_params(const Vec& theta) {
    if (theta.size() != param_count())
        throw std::invalid_argument("unflatten_params: size mismatch");
    size_t off = 0;
    for (Vec* b : param_blocks()) {
        std::copy(theta.begin() + off, theta.begin() + off + b->size(), b->begin());
        off += b->size();
    }
}

MlpGrads MlpDenoiser::zero_grads() const {
    MlpGrads g;
    g.w1 = Mat(cfg.hidden, cfg.input_dim());
    g.b1 = Vec(cfg.hidden, 0.0);
    g.w_q = Mat(cfg.cond_dim, cfg.cond_dim);
    g.w_k = Mat(cfg.cond_dim, cfg.cond_dim);
    g.w_v = Mat(cfg.cond_dim, cfg.cond_dim);
    g.w_out = Mat(cfg.cond_dim, cfg.cond_dim);
    g.w2 = Mat(cfg.hidden, cfg.hidden);
    g.b2 = Vec(cfg.hidden, 0.0);
    g.w3 = Mat(cfg.data_dim, cfg.hidden);
    g.b3 = Vec(cfg.data_dim, 0.0);
    g.class_emb = Mat(cfg.n_classes, cfg.cond_dim);
    return g;
}

std::vector<std::tuple<std::string, size_t, size_t>> MlpDenoiser::segment_shapes() const {
    return {
        {"w1", cfg.hidden, cfg.input_dim()},
        {"b1", cfg.hidden, 0},
        {"attn.w_q", cfg.cond_dim, cfg.cond_dim},
        {"attn.w_k", cfg.cond_dim, cfg.cond_dim},
        {"attn.w_v", cfg.cond_dim, cfg.cond_dim},
        {"attn.w_out", cfg.cond_dim, cfg.cond_dim},
        {"w2", cfg.hidden, cfg.hidden},
        {"b2", cfg.hidden, 0},
        {"w3", cfg.data_dim, cfg.hidden},
        {"b3", cfg.data_dim, 0},
        {"class_emb", cfg.n_classes, cfg.cond_dim},
    };
}

std::vector<const Vec*> MlpGrads::blocks() const {
    return {&w1.data,    &b1, &w_q.data, &w_k.data, &w_v.data,
            &w_out.data, &w2.data, &b2, &w3.data, &b3, &class_emb.data};
}

std::vector<Vec*> MlpGrads::blocks() {
    return {&w1.data,    &b1, &w_q.data, &w_k.data, &w_v.data,
            &w_out.data, &w2.data, &b2, &w3.data, &b3, &class_emb.data};
}

Vec MlpGrads::flatten() const {
    Vec out;
    for (const Vec* b : blocks())
        out.insert(out.end(), b->begin(), b->end());
    return out;
}

void MlpGrads::accumulate(const MlpGrads& other, double scale) {
    auto dst = blocks();
    auto src = other.blocks();
    for (size_t i = 0; i < dst.size(); i++)
        axpy(scale, *src[i], *dst[i]);
}

}  // namespace nudiff
