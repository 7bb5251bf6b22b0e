#include "am/iclebm.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace am {

namespace ad2 = am::ad;

void IclConfig::validate() const {
    if (layers < 1 || heads < 1 || width < 1 || input_dim < 1 || max_positions < 2)
        throw std::invalid_argument("IclConfig: all dimensions must be positive");
    if (width % heads != 0)
        throw std::invalid_argument("IclConfig: heads must divide width");
    if (!(init_std > 0.0) || !(ln_eps > 0.0))
        throw std::invalid_argument("IclConfig: init_std and ln_eps must be > 0");
}

void CdConfig::validate() const {
    if (langevin_steps < 0) throw std::invalid_argument("CdConfig: langevin_steps >= 0");
    if (!(langevin_step_size > 0.0))
        throw std::invalid_argument("CdConfig: langevin_step_size must be > 0");
    if (noise_scale < 0.0) throw std::invalid_argument("CdConfig: noise_scale >= 0");
    if (negatives_per_position < 1)
        throw std::invalid_argument("CdConfig: need at least one negative per position");
    if (!(init_box > 0.0)) throw std::invalid_argument("CdConfig: init_box must be > 0");
}

IclEbmModel::IclEbmModel(const IclConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg.seed);
    const std::int64_t w = cfg.width;
    auto wmat = [&](std::int64_t r, std::int64_t c) {
        return ad2::leaf(Tensor::randn({r, c}, rng, cfg.init_std));
    };
    auto zeros = [&](std::int64_t n) { return ad2::leaf(Tensor::zeros({n})); };
    auto ones = [&](std::int64_t n) { return ad2::leaf(Tensor::full({n}, 1.0)); };

    w_in_ = wmat(cfg.input_dim, w);
    b_in_ = zeros(w);
    pos_ = ad2::leaf(Tensor::randn({cfg.max_positions, w}, rng, cfg.init_std));
    for (int l = 0; l < cfg.layers; ++l) {
        Block b;
        b.ln1_g = ones(w);
        b.ln1_b = zeros(w);
        b.w_qkv = wmat(w, 3 * w);
        b.b_qkv = zeros(3 * w);
        b.w_o = wmat(w, w);
        b.b_o = zeros(w);
        b.ln2_g = ones(w);
        b.ln2_b = zeros(w);
        b.w_fc1 = wmat(w, 4 * w);
        b.b_fc1 = zeros(4 * w);
        b.w_fc2 = wmat(4 * w, w);
        b.b_fc2 = zeros(w);
        blocks_.push_back(std::move(b));
    }
    lnf_g_ = ones(w);
    lnf_b_ = zeros(w);
    w_head_ = wmat(w, 1);
    b_head_ = zeros(1);
}

std::vector<ad2::Var> IclEbmModel::params() const {
    std::vector<ad2::Var> out{w_in_, b_in_, pos_};
    for (const auto& b : blocks_) {
        out.insert(out.end(), {b.ln1_g, b.ln1_b, b.w_qkv, b.b_qkv, b.w_o, b.b_o,
                               b.ln2_g, b.ln2_b, b.w_fc1, b.b_fc1, b.w_fc2, b.b_fc2});
    }
    out.insert(out.end(), {lnf_g_, lnf_b_, w_head_, b_head_});
    return out;
}

std::vector<std::string> IclEbmModel::param_names() const {
    std::vector<std::string> out{"w_in", "b_in", "pos"};
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        for (const char* n : {"ln1_g", "ln1_b", "w_qkv", "b_qkv", "w_o", "b_o",
                              "ln2_g", "ln2_b", "w_fc1", "b_fc1", "w_fc2", "b_fc2"})
            out.push_back(p + n);
    }
    out.insert(out.end(), {"lnf_g", "lnf_b", "w_head", "b_head"});
    return out;
}

namespace {
ad2::Var transformer_tail(const ad2::Var& h, const ad2::Var& g, const ad2::Var& b,
                          const ad2::Var& w_head, const ad2::Var& b_head, double eps) {
    auto hf = ad2::layer_norm_rows(h, g, b, eps);
    return ad2::add_rowvec(ad2::matmul(hf, w_head), b_head);
}
}  // namespace

ad2::Var IclEbmModel::forward_full(const ad2::Var& tokens, std::int64_t b, std::int64_t l,
                                   std::vector<LayerCache>* caches) const {
    const std::int64_t rows = tokens->value.rows();
    if (rows != b * l || tokens->value.cols() != cfg_.input_dim)
        throw std::invalid_argument("forward_full: token shape mismatch");
    if (l > cfg_.max_positions)
        throw std::invalid_argument("forward_full: sequence longer than max_positions");

    std::vector<std::int64_t> positions(rows);
    std::vector<ad2::AttnSpan> spans(rows);
    for (std::int64_t s = 0; s < b; ++s)
        for (std::int64_t i = 0; i < l; ++i) {
            positions[s * l + i] = i;
            spans[s * l + i] = {s * l, i};
        }

    auto h = ad2::add(ad2::add_rowvec(ad2::matmul(tokens, w_in_), b_in_),
                      ad2::gather_rows(pos_, positions));
    if (caches) caches->clear();
    const std::int64_t w = cfg_.width;
    for (const auto& blk : blocks_) {
        auto hn = ad2::layer_norm_rows(h, blk.ln1_g, blk.ln1_b, cfg_.ln_eps);
        auto qkv = ad2::add_rowvec(ad2::matmul(hn, blk.w_qkv), blk.b_qkv);
        auto q = ad2::slice_cols(qkv, 0, w);
        auto k = ad2::slice_cols(qkv, w, w);
        auto v = ad2::slice_cols(qkv, 2 * w, w);
        if (caches) caches->push_back({k, v});
        auto attn = ad2::prefix_attention(q, k, v, k, v, spans, cfg_.heads);
        h = ad2::add(h, ad2::add_rowvec(ad2::matmul(attn, blk.w_o), blk.b_o));
        auto hn2 = ad2::layer_norm_rows(h, blk.ln2_g, blk.ln2_b, cfg_.ln_eps);
        auto ff = ad2::matmul(ad2::gelu(ad2::add_rowvec(ad2::matmul(hn2, blk.w_fc1), blk.b_fc1)),
                              blk.w_fc2);
        h = ad2::add(h, ad2::add_rowvec(ff, blk.b_fc2));
    }
    return transformer_tail(h, lnf_g_, lnf_b_, w_head_, b_head_, cfg_.ln_eps);
}

ad2::Var IclEbmModel::forward_tokens(const ad2::Var& tokens,
                                     const std::vector<std::int64_t>& seq_index,
                                     const std::vector<std::int64_t>& position,
                                     std::int64_t l,
                                     const std::vector<LayerCache>& caches) const {
    const std::int64_t rows = tokens->value.rows();
    if (static_cast<std::int64_t>(seq_index.size()) != rows ||
        static_cast<std::int64_t>(position.size()) != rows)
        throw std::invalid_argument("forward_tokens: row descriptor mismatch");
    if (caches.size() != static_cast<std::size_t>(cfg_.layers))
        throw std::invalid_argument("forward_tokens: cache layer count mismatch");

    std::vector<ad2::AttnSpan> spans(rows);
    for (std::int64_t r = 0; r < rows; ++r) {
        if (position[r] < 0 || position[r] >= cfg_.max_positions)
            throw std::invalid_argument("forward_tokens: position out of range");
        spans[r] = {seq_index[r] * l, position[r]};
    }

    auto h = ad2::add(ad2::add_rowvec(ad2::matmul(tokens, w_in_), b_in_),
                      ad2::gather_rows(pos_, position));
    const std::int64_t w = cfg_.width;
    for (int li = 0; li < cfg_.layers; ++li) {
        const auto& blk = blocks_[li];
        auto hn = ad2::layer_norm_rows(h, blk.ln1_g, blk.ln1_b, cfg_.ln_eps);
        auto qkv = ad2::add_rowvec(ad2::matmul(hn, blk.w_qkv), blk.b_qkv);
        auto q = ad2::slice_cols(qkv, 0, w);
        auto k = ad2::slice_cols(qkv, w, w);
        auto v = ad2::slice_cols(qkv, 2 * w, w);
        auto attn = ad2::prefix_attention(q, k, v, caches[li].k, caches[li].v,
                                          spans, cfg_.heads);
        h = ad2::add(h, ad2::add_rowvec(ad2::matmul(attn, blk.w_o), blk.b_o));
        auto hn2 = ad2::layer_norm_rows(h, blk.ln2_g, blk.ln2_b, cfg_.ln_eps);
        auto ff = ad2::matmul(ad2::gelu(ad2::add_rowvec(ad2::matmul(hn2, blk.w_fc1), blk.b_fc1)),
                              blk.w_fc2);
        h = ad2::add(h, ad2::add_rowvec(ff, blk.b_fc2));
    }
    return transformer_tail(h, lnf_g_, lnf_b_, w_head_, b_head_, cfg_.ln_eps);
}

VecD IclEbmModel::icl_energy(const Tensor& sequence) const {
    const std::int64_t l = sequence.rows();
    if (l < 2) throw std::invalid_argument("icl_energy: need at least 2 positions");
    auto out = forward_full(ad2::constant(sequence), 1, l);
    VecD e(l - 1);
    for (std::int64_t i = 1; i < l; ++i) e[i - 1] = out->value[i];
    return e;
}

VecD IclEbmModel::icl_energy_grad_last(const Tensor& sequence) const {
    const std::int64_t l = sequence.rows();
    if (l < 2) throw std::invalid_argument("icl_energy_grad_last: need at least 2 positions");
    auto tokens = ad2::leaf(sequence);
    auto out = forward_full(tokens, 1, l);
    auto last = ad2::slice_rows(out, l - 1, 1);
    ad2::backward(ad2::sum_all(last));
    const std::int64_t d = cfg_.input_dim;
    VecD g(d);
    for (std::int64_t j = 0; j < d; ++j) g[j] = tokens->grad[(l - 1) * d + j];
    return g;
}

// ------------------------------------------------- conditional energy

IclConditionalEnergy::IclConditionalEnergy(const IclEbmModel& model, Tensor context)
    : model_(model), context_len_(context.rows()) {
    if (context_len_ < 1)
        throw std::invalid_argument("IclConditionalEnergy: empty context");
    if (context_len_ + 1 > model.config().max_positions)
        throw std::invalid_argument("IclConditionalEnergy: context too long");
    std::vector<LayerCache> tape_cache;
    model_.forward_full(ad2::constant(std::move(context)), 1, context_len_, &tape_cache);
    for (auto& c : tape_cache)
        cache_.push_back({ad2::constant(c.k->value), ad2::constant(c.v->value)});
}

std::int64_t IclConditionalEnergy::dim() const { return model_.config().input_dim; }

double IclConditionalEnergy::energy(std::span<const double> x) const {
    Tensor t({1, dim()}, VecD(x.begin(), x.end()));
    auto out = model_.forward_tokens(ad2::constant(std::move(t)), {0}, {context_len_},
                                     context_len_, cache_);
    return out->value[0];
}

VecD IclConditionalEnergy::grad(std::span<const double> x) const {
    Tensor t({1, dim()}, VecD(x.begin(), x.end()));
    auto tokens = ad2::leaf(std::move(t));
    auto out = model_.forward_tokens(tokens, {0}, {context_len_}, context_len_, cache_);
    ad2::backward(ad2::sum_all(out));
    return tokens->grad.vec();
}

// ------------------------------------------------------------- trainer

CdTrainer::CdTrainer(IclEbmModel& model, const CdConfig& cfg)
    : model_(model), cfg_(cfg),
      opt_({.lr = cfg.lr, .clip_norm = cfg.clip_norm}) {
    cfg_.validate();
}

CdStepResult CdTrainer::step(const ContextBatch& batch, Rng& rng) {
    const std::int64_t b = batch.b, l = batch.l, d = model_.config().input_dim;
    const std::int64_t p_rows = b * (l - 1);
    const std::int64_t j = cfg_.negatives_per_position;

    // row descriptors shared by the Langevin phase and the loss phase
    std::vector<std::int64_t> seq_index(p_rows * j), position(p_rows * j);
    {
        std::int64_t r = 0;
        for (std::int64_t s = 0; s < b; ++s)
            for (std::int64_t i = 1; i < l; ++i)
                for (std::int64_t c = 0; c < j; ++c, ++r) {
                    seq_index[r] = s;
                    position[r] = i;
                }
    }

    // negatives start uniform in the init box
    Tensor negatives({p_rows * j, d});
    for (auto& v : negatives.vec()) v = rng.uniform(-cfg_.init_box, cfg_.init_box);

    if (cfg_.langevin_steps > 0) {
        // detached caches: the sampler never feeds the parameter graph
        std::vector<LayerCache> tape_cache;
        model_.forward_full(ad2::constant(batch.tokens), b, l, &tape_cache);
        std::vector<LayerCache> frozen;
        for (auto& c : tape_cache)
            frozen.push_back({ad2::constant(c.k->value), ad2::constant(c.v->value)});

        for (std::int64_t t = 0; t < cfg_.langevin_steps; ++t) {
            auto tok = ad2::leaf(negatives);
            auto e = model_.forward_tokens(tok, seq_index, position, l, frozen);
            ad2::backward(ad2::sum_all(e));
            for (std::int64_t i = 0; i < negatives.numel(); ++i)
                negatives[i] -= cfg_.langevin_step_size * tok->grad[i];
            if (cfg_.noise_scale > 0.0)
                for (std::int64_t i = 0; i < negatives.numel(); ++i)
                    negatives[i] += cfg_.noise_scale * rng.normal();
        }
    }
    return apply(batch, negatives, j);
}

CdStepResult CdTrainer::step_with_negatives(const ContextBatch& batch,
                                            const Tensor& negatives) {
    const std::int64_t p_rows = batch.b * (batch.l - 1);
    if (negatives.rows() % p_rows != 0)
        throw std::invalid_argument("step_with_negatives: row count must be a multiple "
                                    "of the position count");
    return apply(batch, negatives, negatives.rows() / p_rows);
}

CdStepResult CdTrainer::apply(const ContextBatch& batch, const Tensor& negatives,
                              std::int64_t negs_per_position) {
    const std::int64_t b = batch.b, l = batch.l, d = model_.config().input_dim;
    if (l < 2) throw std::invalid_argument("cd step: sequences need at least 2 positions");
    const std::int64_t p_rows = b * (l - 1);

    CdStepResult res;

    // drop non-finite negatives instead of poisoning the batch
    std::vector<std::int64_t> keep;
    for (std::int64_t r = 0; r < negatives.rows(); ++r) {
        bool ok = true;
        for (std::int64_t c = 0; c < d; ++c)
            if (!std::isfinite(negatives.at(r, c))) ok = false;
        if (ok) keep.push_back(r);
        else ++res.skipped_negatives;
    }
    if (keep.empty()) throw std::runtime_error("cd step: every negative diverged");

    std::vector<LayerCache> caches;
    model_.forward_full(ad2::constant(batch.tokens), b, l, &caches);

    // real tokens through the same single-token path as the negatives
    std::vector<std::int64_t> real_seq(p_rows), real_pos(p_rows);
    Tensor real_tokens({p_rows, d});
    {
        std::int64_t r = 0;
        for (std::int64_t s = 0; s < b; ++s)
            for (std::int64_t i = 1; i < l; ++i, ++r) {
                real_seq[r] = s;
                real_pos[r] = i;
                for (std::int64_t c = 0; c < d; ++c)
                    real_tokens.at(r, c) = batch.tokens.at(s * l + i, c);
            }
    }
    auto e_real = model_.forward_tokens(ad2::constant(std::move(real_tokens)),
                                        real_seq, real_pos, l, caches);
    auto loss_real = ad2::mean_all(e_real);

    std::vector<std::int64_t> neg_seq, neg_pos;
    Tensor neg_tokens({static_cast<std::int64_t>(keep.size()), d});
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const std::int64_t src = keep[r];
        const std::int64_t position_slot = src / negs_per_position;
        neg_seq.push_back(position_slot / (l - 1));
        neg_pos.push_back(position_slot % (l - 1) + 1);
        for (std::int64_t c = 0; c < d; ++c)
            neg_tokens.at(r, c) = negatives.at(src, c);
    }
    auto e_neg = model_.forward_tokens(ad2::constant(std::move(neg_tokens)),
                                       neg_seq, neg_pos, l, caches);
    auto loss_neg = ad2::mean_all(e_neg);

    // two reverse passes; their difference is the contrastive gradient and
    // cancels exactly when negatives match positives
    auto params = model_.params();
    ad2::backward(loss_real);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (auto& p : params) grads.push_back(p->grad);
    ad2::backward(loss_neg);
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::int64_t e = 0; e < grads[i].numel(); ++e)
            grads[i][e] -= params[i]->grad[e];

    std::vector<Tensor*> targets;
    for (auto& p : params) targets.push_back(&p->value);
    opt_.step(targets, grads);

    res.loss = loss_real->value.item() - loss_neg->value.item();
    return res;
}

// ------------------------------------------------------------- sampling

VecD icl_sample(const IclEbmModel& model, const Tensor& context, const CdConfig& cfg,
                std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const std::int64_t d = model.config().input_dim;
    VecD x(d);
    for (auto& v : x) v = rng.uniform(-cfg.init_box, cfg.init_box);
    if (cfg.langevin_steps == 0) return x;

    IclConditionalEnergy energy(model, context);
    for (std::int64_t t = 0; t < cfg.langevin_steps; ++t) {
        const VecD g = energy.grad(x);
        for (std::int64_t i = 0; i < d; ++i) x[i] -= cfg.langevin_step_size * g[i];
        if (cfg.noise_scale > 0.0)
            for (std::int64_t i = 0; i < d; ++i) x[i] += cfg.noise_scale * rng.normal();
    }
    return x;
}

double EnergyGrid::x_at(std::int64_t ix) const {
    return spec.x_min + (spec.x_max - spec.x_min) *
           (spec.resolution == 1 ? 0.0
                                 : static_cast<double>(ix) /
                                       static_cast<double>(spec.resolution - 1));
}

double EnergyGrid::y_at(std::int64_t iy) const {
    return spec.y_min + (spec.y_max - spec.y_min) *
           (spec.resolution == 1 ? 0.0
                                 : static_cast<double>(iy) /
                                       static_cast<double>(spec.resolution - 1));
}

EnergyGrid energy_grid(const IclEbmModel& model, const Tensor& context,
                       const GridSpec& spec) {
    if (model.config().input_dim != 2)
        throw std::invalid_argument("energy_grid: input_dim must be 2");
    if (context.rows() < 1)
        throw std::invalid_argument("energy_grid: need at least one context point");
    if (spec.resolution < 1)
        throw std::invalid_argument("energy_grid: resolution must be >= 1");
    IclConditionalEnergy energy(model, context);
    EnergyGrid grid;
    grid.spec = spec;
    grid.values.resize(spec.resolution * spec.resolution);
    for (std::int64_t iy = 0; iy < spec.resolution; ++iy)
        for (std::int64_t ix = 0; ix < spec.resolution; ++ix) {
            const VecD x{grid.x_at(ix), grid.y_at(iy)};
            grid.values[iy * spec.resolution + ix] = energy.energy(x);
        }
    return grid;
}

TaskSampler::TaskSampler(std::uint64_t seed) {
    Rng rng(seed);
    means_ = Tensor({3, 2});
    for (auto& v : means_.vec()) v = rng.uniform(-4.0, 4.0);
}

VecD TaskSampler::draw(Rng& rng) const {
    const auto c = static_cast<std::int64_t>(rng.uniform_int(3));
    VecD x(2);
    for (std::int64_t j = 0; j < 2; ++j)
        x[j] = means_.at(c, j) + std_ * rng.normal();
    return x;
}

Tensor TaskSampler::draw_many(std::int64_t n, Rng& rng) const {
    Tensor out({n, 2});
    for (std::int64_t i = 0; i < n; ++i) {
        const VecD x = draw(rng);
        out.at(i, 0) = x[0];
        out.at(i, 1) = x[1];
    }
    return out;
}

// ---------------------------------------------------------- checkpoints

void save_checkpoint(const IclEbmModel& model, const std::string& path) {
    const auto params = model.params();
    const auto names = model.param_names();
    nlohmann::ordered_json manifest;
    manifest["format"] = "amlab-icl-checkpoint";
    manifest["version"] = 1;
    manifest["dtype"] = "f64le";
    const auto& c = model.config();
    manifest["config"] = {{"layers", c.layers},       {"heads", c.heads},
                          {"width", c.width},         {"input_dim", c.input_dim},
                          {"max_positions", c.max_positions}, {"init_std", c.init_std},
                          {"ln_eps", c.ln_eps},       {"seed", c.seed}};
    std::uint64_t offset = 0;
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        nlohmann::ordered_json t;
        t["name"] = names[i];
        t["shape"] = params[i]->value.shape();
        t["offset"] = offset;
        t["count"] = params[i]->value.numel();
        offset += params[i]->value.numel();
        tensors.push_back(std::move(t));
    }
    manifest["tensors"] = std::move(tensors);
    const std::string header = manifest.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const std::uint64_t header_len = header.size();
    f.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& p : params)
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
    if (!f) throw std::runtime_error("save_checkpoint: write failed " + path);
}

IclEbmModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::uint64_t header_len = 0;
    f.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
    std::string header(header_len, '\0');
    f.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!f) throw std::runtime_error("load_checkpoint: truncated header " + path);
    const auto manifest = nlohmann::json::parse(header);
    if (manifest.at("format") != "amlab-icl-checkpoint")
        throw std::runtime_error("load_checkpoint: unknown format");

    IclConfig cfg;
    const auto& jc = manifest.at("config");
    cfg.layers = jc.at("layers");
    cfg.heads = jc.at("heads");
    cfg.width = jc.at("width");
    cfg.input_dim = jc.at("input_dim");
    cfg.max_positions = jc.at("max_positions");
    cfg.init_std = jc.at("init_std");
    cfg.ln_eps = jc.at("ln_eps");
    cfg.seed = jc.at("seed");
    IclEbmModel model(cfg);

    auto params = model.params();
    const auto names = model.param_names();
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.size())
        throw std::runtime_error("load_checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name") != names[i])
            throw std::runtime_error("load_checkpoint: unexpected tensor order");
        if (static_cast<std::int64_t>(t.at("count")) != params[i]->value.numel())
            throw std::runtime_error("load_checkpoint: tensor size mismatch");
        f.read(reinterpret_cast<char*>(params[i]->value.data()),
               static_cast<std::streamsize>(params[i]->value.numel() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated data " + path);
    return model;
}

}  // namespace am
