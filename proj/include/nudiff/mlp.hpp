#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nudiff/attention.hpp"
#include "nudiff/denoiser.hpp"
#include "nudiff/linalg.hpp"

namespace nudiff {

// Sinusoidal embedding: pairs (sin, cos) of t / 10000^(2i/d_time).
Vec embed_time(int t, size_t d_time, int total_steps);

struct MlpConfig {
    size_t data_dim = 2;
    size_t hidden = 128;   // width of the two hidden layers
    size_t time_dim = 16;  // time embedding size (even)
    size_t cond_dim = 8;   // class embedding width == attention d_model
    size_t n_classes = 1;
    int total_steps = 1000;  // timestep range accepted by the embedding

    size_t input_dim() const { return data_dim + time_dim + cond_dim; }
    size_t attn_positions() const { return hidden / cond_dim; }
    void validate() const;
};

struct MlpCache {
    Vec input;        // [xt, time embedding, class embedding]
    Vec z1, h1;       // first layer pre-activation / activation
    AttentionCache attn;
    Vec h1_attended;  // attention output flattened back to hidden width
    Vec z2, h2;
    int class_id = 0;
    AttentionMap map;  // kept for the ATV term during training
};

struct MlpGrads {
    Mat w1;
    Vec b1;
    Mat w_q, w_k, w_v, w_out;
    Mat w2;
    Vec b2;
    Mat w3;
    Vec b3;
    Mat class_emb;

    std::vector<const Vec*> blocks() const;
    std::vector<Vec*> blocks();
    Vec flatten() const;
    void accumulate(const MlpGrads& other, double scale = 1.0);
};

// Trainable epsilon-predictor: two SiLU hidden layers with a zero
// cross-attention block between them. The first hidden activation is laid
// out as attn_positions() rows of cond_dim features and attended against the
// condition tokens; with no tokens a single zero token keeps the block inert.
class MlpDenoiser : public Denoiser {
public:
    MlpConfig cfg;
    Mat w1;
    Vec b1;
    ZeroCrossAttentionBlock attn;
    Mat w2;
    Vec b2;
    Mat w3;
    Vec b3;
    Mat class_emb;  // n_classes x cond_dim, learned

    static MlpDenoiser init(const MlpConfig& cfg, uint64_t seed);
    // All parameters zero (including attention); forward of anything is 0.
    static MlpDenoiser zeros(const MlpConfig& cfg);

    std::pair<Vec, MlpCache> forward(const Vec& xt, int t, const ConditionInput& cond) const;
    // Exact reverse-mode gradients of the forward map. d_features/d_weights
    // inject loss terms at FM / A inside the attention block.
    MlpGrads backward(const MlpCache& cache, const Vec& grad_output,
                      const Mat& d_features = {}, const Mat& d_weights = {}) const;
    // Same, writing into a preallocated buffer (the batch kernels call this
    // once per sample; reusing buffers keeps the parallel path off malloc).
    void backward_into(const MlpCache& cache, const Vec& grad_output, const Mat& d_features,
                       const Mat& d_weights, MlpGrads& out) const;

    Vec predict(const Vec& xt, int t, const ConditionInput& cond) const override;

    size_t param_count() const;
    std::vector<const Vec*> param_blocks() const;
    std::vector<Vec*> param_blocks();
    Vec flatten_params() const;
    void unflatten_params(const Vec& theta);
    MlpGrads zero_grads() const;

    // (name, rows, cols) per parameter block, in flatten order; vectors have
    // cols = 0. Used by the checkpoint format.
    std::vector<std::tuple<std::string, size_t, size_t>> segment_shapes() const;
};

}  // namespace nudiff
