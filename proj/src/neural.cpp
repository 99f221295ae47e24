#include "fedsim/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedsim/rng.hpp"

namespace fedsim::neural {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'N', 'P'};
constexpr std::uint32_t kSnapshotVersion = 1;

struct LayerView {
    std::size_t w_off, b_off, in, out;
};

std::vector<LayerView> layer_views(const MlpArchitecture& arch) {
    const auto sizes = arch.layer_sizes();
    std::vector<LayerView> views;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        LayerView v{off, off + sizes[l] * sizes[l + 1], sizes[l], sizes[l + 1]};
        off = v.b_off + v.out;
        views.push_back(v);
    }
    return views;
}

// z = W*a + b for every row of the input matrix.
void affine(const ParamVector& params, const LayerView& lv, const std::vector<double>& in,
            std::size_t rows, std::vector<double>& out) {
    out.assign(rows * lv.out, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* a = in.data() + r * lv.in;
        double* z = out.data() + r * lv.out;
        for (std::size_t o = 0; o < lv.out; ++o) {
            const double* w = params.data() + lv.w_off + o * lv.in;
            double acc = params[lv.b_off + o];
            for (std::size_t i = 0; i < lv.in; ++i) acc += w[i] * a[i];
            z[o] = acc;
        }
    }
}

void softmax_rows(std::vector<double>& z, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = z.data() + r * cols;
        double mx = p[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, p[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            p[c] = std::exp(p[c] - mx);
            sum += p[c];
        }
        for (std::size_t c = 0; c < cols; ++c) p[c] /= sum;
    }
}

struct ForwardCache {
    // pre[l]: pre-activations of layer l; act[l]: post-activation inputs to
    // layer l (act[0] is the batch itself). probs holds the softmax output.
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;
    std::vector<double> probs;
};

ForwardCache forward_cached(const MlpArchitecture& arch, const ParamVector& params,
                            const Batch& batch) {
    if (batch.cols != arch.input_dim) throw std::runtime_error("batch width != input_dim");
    if (params.size() != arch.param_count()) throw std::runtime_error("param vector size mismatch");
    const auto views = layer_views(arch);
    ForwardCache cache;
    cache.act.resize(views.size());
    cache.pre.resize(views.size());
    cache.act[0] = batch.x;
    for (std::size_t l = 0; l < views.size(); ++l) {
        affine(params, views[l], l == 0 ? cache.act[0] : cache.act[l], batch.rows, cache.pre[l]);
        if (l + 1 < views.size()) {
            cache.act[l + 1] = cache.pre[l];
            for (auto& v : cache.act[l + 1]) {
                if (v < 0.0) v *= arch.leaky_slope;
            }
        }
    }
    cache.probs = cache.pre.back();
    softmax_rows(cache.probs, batch.rows, arch.classes);
    return cache;
}

}  // namespace

std::vector<std::size_t> MlpArchitecture::layer_sizes() const {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(classes);
    return sizes;
}

std::size_t MlpArchitecture::param_count() const {
    const auto sizes = layer_sizes();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
}

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                 std::size_t begin, std::size_t end) {
    Batch b;
    b.rows = end - begin;
    b.cols = samples.empty() ? 0 : samples.front().features.size();
    b.x.reserve(b.rows * b.cols);
    b.y.reserve(b.rows);
    for (std::size_t i = begin; i < end; ++i) {
        const auto& s = samples[indices[i]];
        b.x.insert(b.x.end(), s.features.begin(), s.features.end());
        b.y.push_back(s.label);
    }
    return b;
}

OptimizerState make_optimizer_state(const OptimizerConfig& cfg, std::size_t param_count) {
    OptimizerState st;
    st.kind = cfg.kind;
    if (cfg.kind == OptimizerKind::Sgdm) {
        st.velocity.assign(param_count, 0.0);
    } else {
        st.m.assign(param_count, 0.0);
        st.v.assign(param_count, 0.0);
    }
    return st;
}

ParamVector init_params(const MlpArchitecture& arch, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    ParamVector params(arch.param_count(), 0.0);
    for (const auto& lv : layer_views(arch)) {
        const double scale = std::sqrt(2.0 / static_cast<double>(lv.in));
        for (std::size_t i = 0; i < lv.in * lv.out; ++i) {
            params[lv.w_off + i] = scale * rng.normal();
        }
        // biases stay zero
    }
    return params;
}

std::vector<double> forward(const MlpArchitecture& arch, const ParamVector& params,
                            const Batch& batch) {
    for (double v : batch.x) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite input to forward");
    }
    return forward_cached(arch, params, batch).probs;
}

double loss_ce(const std::vector<double>& probs, const std::vector<int>& labels,
               std::size_t classes) {
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const double p = probs[r * classes + static_cast<std::size_t>(labels[r])];
        total += -std::log(std::max(p, 1e-12));
    }
    return total / static_cast<double>(labels.size());
}

ParamVector backward(const MlpArchitecture& arch, const ParamVector& params, const Batch& batch,
                     double* loss_out) {
    const auto views = layer_views(arch);
    auto cache = forward_cached(arch, params, batch);
    if (loss_out) *loss_out = loss_ce(cache.probs, batch.y, arch.classes);

    ParamVector grad(params.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.rows);

    // dL/dlogits = (p - onehot) / n
    std::vector<double> delta = cache.probs;
    for (std::size_t r = 0; r < batch.rows; ++r) {
        delta[r * arch.classes + static_cast<std::size_t>(batch.y[r])] -= 1.0;
    }
    for (auto& v : delta) v *= inv_n;

    for (std::size_t li = views.size(); li-- > 0;) {
        const auto& lv = views[li];
        const auto& input = cache.act[li];
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* d = delta.data() + r * lv.out;
            const double* a = input.data() + r * lv.in;
            for (std::size_t o = 0; o < lv.out; ++o) {
                double* gw = grad.data() + lv.w_off + o * lv.in;
                for (std::size_t i = 0; i < lv.in; ++i) gw[i] += d[o] * a[i];
                grad[lv.b_off + o] += d[o];
            }
        }
        if (li == 0) break;
        // Propagate through W and the leaky ReLU of the previous layer.
        std::vector<double> prev(batch.rows * lv.in, 0.0);
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* d = delta.data() + r * lv.out;
            double* pd = prev.data() + r * lv.in;
            for (std::size_t o = 0; o < lv.out; ++o) {
                const double* w = params.data() + lv.w_off + o * lv.in;
                for (std::size_t i = 0; i < lv.in; ++i) pd[i] += d[o] * w[i];
            }
        }
        const auto& pre = cache.pre[li - 1];
        for (std::size_t i = 0; i < prev.size(); ++i) {
            if (pre[i] < 0.0) prev[i] *= arch.leaky_slope;
        }
        delta = std::move(prev);
    }
    return grad;
}

void sgdm_step(OptimizerState& state, const OptimizerConfig& cfg, ParamVector& params,
               const ParamVector& grad) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.velocity[i] = cfg.momentum * state.velocity[i] + grad[i];
        params[i] -= cfg.learning_rate * state.velocity[i];
    }
    ++state.step_count;
}

void adam_step(OptimizerState& state, const OptimizerConfig& cfg, ParamVector& params,
               const ParamVector& grad) {
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

TrainResult train_local(const MlpArchitecture& arch, const ParamVector& start,
                        const std::vector<Sample>& train, std::size_t epochs,
                        std::size_t batch_size, const OptimizerConfig& opt,
                        std::uint64_t rng_seed, OptimizerState* persistent_state) {
    if (train.empty()) throw std::runtime_error("train_local: empty train split");
    if (batch_size == 0) throw std::runtime_error("train_local: batch_size must be >= 1");

    TrainResult result;
    result.params = start;
    result.state = persistent_state ? *persistent_state : make_optimizer_state(opt, start.size());

    Rng rng(rng_seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    double loss_sum = 0.0;
    std::size_t loss_rows = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, order.size());
            const Batch batch = make_batch(train, order, begin, end);
            double loss = 0.0;
            const ParamVector grad = backward(arch, result.params, batch, &loss);
            loss_sum += loss * static_cast<double>(batch.rows);
            loss_rows += batch.rows;
            if (opt.kind == OptimizerKind::Sgdm) {
                sgdm_step(result.state, opt, result.params, grad);
            } else {
                adam_step(result.state, opt, result.params, grad);
            }
        }
    }
    result.mean_loss = loss_rows ? loss_sum / static_cast<double>(loss_rows) : 0.0;

    result.delta.resize(start.size());
    for (std::size_t i = 0; i < start.size(); ++i) result.delta[i] = result.params[i] - start[i];
    if (persistent_state) *persistent_state = result.state;
    return result;
}

void save_params(const std::string& path, const MlpArchitecture& arch, const ParamVector& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    const auto sizes = arch.layer_sizes();
    const auto layer_count = static_cast<std::uint32_t>(sizes.size());
    char header[16] = {};
    std::memcpy(header, kMagic, 4);
    std::memcpy(header + 4, &kSnapshotVersion, 4);
    std::memcpy(header + 8, &layer_count, 4);
    out.write(header, sizeof header);
    for (std::size_t s : sizes) {
        const auto v = static_cast<std::uint32_t>(s);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    for (double p : params) {
        const float f = static_cast<float>(p);
        out.write(reinterpret_cast<const char*>(&f), 4);
    }
}

ParamVector load_params(const std::string& path, MlpArchitecture* arch_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    char header[16];
    in.read(header, sizeof header);
    if (!in || std::memcmp(header, kMagic, 4) != 0) {
        throw std::runtime_error(path + ": not a parameter snapshot");
    }
    std::uint32_t version, layer_count;
    std::memcpy(&version, header + 4, 4);
    std::memcpy(&layer_count, header + 8, 4);
    if (version != kSnapshotVersion) throw std::runtime_error(path + ": unsupported snapshot version");
    std::vector<std::size_t> sizes(layer_count);
    for (auto& s : sizes) {
        std::uint32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        s = v;
    }
    if (arch_out) {
        arch_out->input_dim = sizes.front();
        arch_out->hidden.assign(sizes.begin() + 1, sizes.end() - 1);
        arch_out->classes = sizes.back();
    }
    MlpArchitecture arch;
    arch.input_dim = sizes.front();
    arch.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
    arch.classes = sizes.back();
    ParamVector params(arch.param_count());
    for (auto& p : params) {
        float f;
        in.read(reinterpret_cast<char*>(&f), 4);
        p = f;
    }
    if (!in) throw std::runtime_error(path + ": truncated snapshot");
    return params;
}

}  // namespace fedsim::neural
