#pragma once

#include <atomic>
#include <cstdint>

#include "nudiff/linalg.hpp"
#include "nudiff/schedule.hpp"

namespace nudiff {

// Conditioning input: a class id selecting which mode/pattern to generate,
// plus an optional token sequence consumed as K/V by cross-attention.
struct ConditionInput {
    int class_id = 0;
    Mat tokens;  // L_k x d_model; empty when the task is unconditional
};

// epsilon-predictor. Output dimension equals input dimension; deterministic
// given inputs and parameters. Implementations must be const-thread-safe so
// that batch kernels can fan trajectories out across threads.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Vec predict(const Vec& xt, int t, const ConditionInput& cond) const = 0;
};

// Always predicts the same vector; used to pin down sampler algebra in tests.
class ConstantDenoiser : public Denoiser {
public:
    explicit ConstantDenoiser(Vec value) : value_(std::move(value)) {}
    Vec predict(const Vec&, int, const ConditionInput&) const override { return value_; }

private:
    Vec value_;
};

// Wraps another denoiser and counts predict() calls (thread-safe), so call
// accounting in trajectories can be asserted against ground truth.
class CountingDenoiser : public Denoiser {
public:
    explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}
    Vec predict(const Vec& xt, int t, const ConditionInput& cond) const override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return inner_.predict(xt, t, cond);
    }
    uint64_t calls() const { return calls_.load(); }
    void reset() { calls_.store(0); }

private:
    const Denoiser& inner_;
    mutable std::atomic<uint64_t> calls_{0};
};

}  // namespace nudiff
