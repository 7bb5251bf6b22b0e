#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "am/autodiff.hpp"
#include "am/energy.hpp"
#include "am/optim.hpp"
#include "am/rng.hpp"
#include "am/tensor.hpp"

namespace am {

struct IclConfig {
    int layers = 2;
    int heads = 4;
    int width = 32;
    int input_dim = 2;
    int max_positions = 65;
    double init_std = 0.02;
    double ln_eps = 1e-5;
    std::uint64_t seed = 0;

    void validate() const;
};

// Per-layer attention key/value rows of a processed base batch; tape nodes
// when built on the tape, detached constants for sampling.
struct LayerCache {
    ad::Var k;
    ad::Var v;
};

// Causal transformer emitting one scalar energy per position: the output at
// row i estimates the energy of token i under the landscape built from
// tokens 0..i-1. GPT-style pre-norm blocks, GeLU feedforward, learned
// positional embeddings.
class IclEbmModel {
public:
    explicit IclEbmModel(const IclConfig& cfg);

    const IclConfig& config() const { return cfg_; }
    std::vector<ad::Var> params() const;
    std::vector<std::string> param_names() const;

    // Flattened batch of B sequences of length L ([B*L, input_dim] rows).
    // Returns per-row energies [B*L, 1]; fills per-layer caches when asked.
    ad::Var forward_full(const ad::Var& tokens, std::int64_t b, std::int64_t l,
                         std::vector<LayerCache>* caches = nullptr) const;

    // One-token evaluation against cached rows: row r replaces position
    // `position[r]` of sequence `seq_index[r]` and attends to that
    // sequence's cached rows before it, plus itself.
    ad::Var forward_tokens(const ad::Var& tokens,
                           const std::vector<std::int64_t>& seq_index,
                           const std::vector<std::int64_t>& position, std::int64_t l,
                           const std::vector<LayerCache>& caches) const;

    // Energies E(x_2|x_1), ..., E(x_L|x_<L) of one sequence; length L-1.
    VecD icl_energy(const Tensor& sequence) const;
    // Gradient of the position-i energy with respect to the token at i.
    VecD icl_energy_grad_last(const Tensor& sequence) const;

private:
    friend IclEbmModel load_checkpoint(const std::string& path);
    IclConfig cfg_;
    struct Block {
        ad::Var ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o;
        ad::Var ln2_g, ln2_b, w_fc1, b_fc1, w_fc2, b_fc2;
    };
    ad::Var w_in_, b_in_, pos_;
    std::vector<Block> blocks_;
    ad::Var lnf_g_, lnf_b_, w_head_, b_head_;
};

// E(x | context) with the context rows processed once; energy and gradient
// evaluations are single-token passes against the detached cache.
class IclConditionalEnergy final : public EnergyModel {
public:
    IclConditionalEnergy(const IclEbmModel& model, Tensor context);
    std::int64_t dim() const override;
    double energy(std::span<const double> x) const override;
    VecD grad(std::span<const double> x) const override;

private:
    const IclEbmModel& model_;
    std::int64_t context_len_;
    std::vector<LayerCache> cache_;
};

struct ContextBatch {
    Tensor tokens;  // [B*L, input_dim] rows, sequence-major
    std::int64_t b = 0;
    std::int64_t l = 0;
    std::vector<std::uint64_t> task_seeds;
};

struct CdConfig {
    std::int64_t langevin_steps = 15;
    double langevin_step_size = 3.16;
    double noise_scale = 0.01;
    std::int64_t negatives_per_position = 8;
    double init_box = 6.0;  // negatives start uniform in [-box, box]^D
    double lr = 1e-3;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CdStepResult {
    double loss = 0.0;
    std::int64_t skipped_negatives = 0;
};

// Contrastive-divergence trainer: energies on real data, negatives
// confabulated per position by Langevin on the conditional energy
// (detached from the parameter graph), loss = mean real energy minus mean
// negative energy. The update uses the difference of the two backward
// passes, so forcing negatives equal to positives gives exactly zero loss
// and exactly zero parameter gradient.
class CdTrainer {
public:
    CdTrainer(IclEbmModel& model, const CdConfig& cfg);

    CdStepResult step(const ContextBatch& batch, Rng& rng);
    // negatives supplied by the caller, for tests; [rows * negatives] tokens
    CdStepResult step_with_negatives(const ContextBatch& batch, const Tensor& negatives);

private:
    CdStepResult apply(const ContextBatch& batch, const Tensor& negatives,
                       std::int64_t negs_per_position);
    IclEbmModel& model_;
    CdConfig cfg_;
    Adam opt_;
};

// Langevin sample from E(. | context), x0 uniform in the init box.
VecD icl_sample(const IclEbmModel& model, const Tensor& context, const CdConfig& cfg,
                std::uint64_t seed);

struct GridSpec {
    double x_min = -6.0, x_max = 6.0;
    double y_min = -6.0, y_max = 6.0;
    std::int64_t resolution = 32;
};

struct EnergyGrid {
    GridSpec spec;
    std::vector<double> values;  // row-major, y outer, x inner
    double value(std::int64_t iy, std::int64_t ix) const {
        return values[iy * spec.resolution + ix];
    }
    double x_at(std::int64_t ix) const;
    double y_at(std::int64_t iy) const;
};

// E(. | context) on a regular grid; input_dim must be 2.
EnergyGrid energy_grid(const IclEbmModel& model, const Tensor& context,
                       const GridSpec& spec);

// Mixture of three Gaussians in the plane with uniform mixing; means are
// uniform in [-4, 4]^2, component std 0.5.
class TaskSampler {
public:
    explicit TaskSampler(std::uint64_t seed);
    VecD draw(Rng& rng) const;
    Tensor draw_many(std::int64_t n, Rng& rng) const;
    const Tensor& means() const { return means_; }
    double component_std() const { return std_; }

private:
    Tensor means_;  // 3 x 2
    double std_ = 0.5;
};

void save_checkpoint(const IclEbmModel& model, const std::string& path);
IclEbmModel load_checkpoint(const std::string& path);

}  // namespace am
