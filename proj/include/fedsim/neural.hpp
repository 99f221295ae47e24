#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/types.hpp"

namespace fedsim::neural {

struct MlpArchitecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden{64, 16};
    std::size_t classes = 6;
    double leaky_slope = 0.01;

    // [d_in, hidden..., classes]
    std::vector<std::size_t> layer_sizes() const;
    std::size_t param_count() const;
};

struct Batch {
    std::vector<double> x;  // rows * cols, row-major
    std::vector<int> y;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                 std::size_t begin, std::size_t end);

enum class OptimizerKind { Sgdm, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgdm;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Sgdm;
    ParamVector velocity;  // sgdm
    ParamVector m, v;      // adam
    std::size_t step_count = 0;
};

OptimizerState make_optimizer_state(const OptimizerConfig& cfg, std::size_t param_count);

// He-scaled weights, zero biases; deterministic per seed.
ParamVector init_params(const MlpArchitecture& arch, std::uint64_t rng_seed);

// Row-stochastic class probabilities; softmax with max subtraction.
std::vector<double> forward(const MlpArchitecture& arch, const ParamVector& params,
                            const Batch& batch);

// Mean categorical cross entropy, probabilities floored at 1e-12.
double loss_ce(const std::vector<double>& probs, const std::vector<int>& labels,
               std::size_t classes);

// Exact gradient of loss_ce(forward(.)) w.r.t. params; also reports the loss.
ParamVector backward(const MlpArchitecture& arch, const ParamVector& params, const Batch& batch,
                     double* loss_out = nullptr);

// v <- mu*v + g ; x <- x - lr*v
void sgdm_step(OptimizerState& state, const OptimizerConfig& cfg, ParamVector& params,
               const ParamVector& grad);

// Bias-corrected Adam.
void adam_step(OptimizerState& state, const OptimizerConfig& cfg, ParamVector& params,
               const ParamVector& grad);

struct TrainResult {
    ParamVector params;
    ParamVector delta;  // params - start
    double mean_loss = 0.0;
    OptimizerState state;
};

// `epochs` shuffled mini-batch passes over `train`; final short batch kept.
// Optimizer state starts fresh unless `persistent_state` is supplied, in
// which case it is read and written through (used by the
// persist_optimizer_state ablation).
TrainResult train_local(const MlpArchitecture& arch, const ParamVector& start,
                        const std::vector<Sample>& train, std::size_t epochs,
                        std::size_t batch_size, const OptimizerConfig& opt,
                        std::uint64_t rng_seed, OptimizerState* persistent_state = nullptr);

// Little-endian float32 snapshot: 16-byte header (magic "FSNP", u32 version,
// u32 layer count) + u32 layer sizes + parameters in W1,b1,W2,b2,... order.
void save_params(const std::string& path, const MlpArchitecture& arch, const ParamVector& params);
ParamVector load_params(const std::string& path, MlpArchitecture* arch_out = nullptr);

}  // namespace fedsim::neural
