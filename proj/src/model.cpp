#include "seal/model.hpp"

#include "seal/bytes.hpp"
#include "seal/errors.hpp"
#include "seal/kernels.hpp"
#include "seal/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace seal::tiny {

namespace kp = seal::kernels::parallel;

namespace {

constexpr double kLnEps = 1e-5;
constexpr std::string_view kCheckpointMagic = "SEALTNY1";

template <typename Real>
void layer_norm(const Real * x, const Real * g, const Real * b, Real * y, Real * mu_out, Real * rs_out, size_t n,
                size_t d) {
    for (size_t t = 0; t < n; ++t) {
        const Real * xr = x + t * d;
        Real mean = 0;
        for (size_t k = 0; k < d; ++k) mean += xr[k];
        mean /= static_cast<Real>(d);
        Real var = 0;
        for (size_t k = 0; k < d; ++k) {
            const Real c = xr[k] - mean;
            var += c * c;
        }
        var /= static_cast<Real>(d);
        const Real rs = Real(1) / std::sqrt(var + static_cast<Real>(kLnEps));
        Real * yr = y + t * d;
        for (size_t k = 0; k < d; ++k) {
            yr[k] = (xr[k] - mean) * rs * g[k] + b[k];
        }
        if (mu_out) mu_out[t] = mean;
        if (rs_out) rs_out[t] = rs;
    }
}

// dx += LN'(dy); dg, db accumulated
template <typename Real>
void layer_norm_backward(const Real * x, const Real * mu, const Real * rs, const Real * g, const Real * dy, Real * dx,
                         Real * dg, Real * db, size_t n, size_t d) {
    std::vector<Real> dxhat(d);
    for (size_t t = 0; t < n; ++t) {
        const Real * xr = x + t * d;
        const Real * dyr = dy + t * d;
        Real mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (size_t k = 0; k < d; ++k) {
            const Real xhat = (xr[k] - mu[t]) * rs[t];
            dg[k] += dyr[k] * xhat;
            db[k] += dyr[k];
            dxhat[k] = dyr[k] * g[k];
            mean_dxhat += dxhat[k];
            mean_dxhat_xhat += dxhat[k] * xhat;
        }
        mean_dxhat /= static_cast<Real>(d);
        mean_dxhat_xhat /= static_cast<Real>(d);
        Real * dxr = dx + t * d;
        for (size_t k = 0; k < d; ++k) {
            const Real xhat = (xr[k] - mu[t]) * rs[t];
            dxr[k] += rs[t] * (dxhat[k] - mean_dxhat - xhat * mean_dxhat_xhat);
        }
    }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

template <typename Real>
Real gelu(Real x) {
    const Real u = static_cast<Real>(kGeluC) * (x + Real(0.044715) * x * x * x);
    return Real(0.5) * x * (Real(1) + std::tanh(u));
}

template <typename Real>
Real gelu_grad(Real x) {
    const Real u = static_cast<Real>(kGeluC) * (x + Real(0.044715) * x * x * x);
    const Real th = std::tanh(u);
    const Real du = static_cast<Real>(kGeluC) * (Real(1) + Real(3 * 0.044715) * x * x);
    return Real(0.5) * (Real(1) + th) + Real(0.5) * x * (Real(1) - th * th) * du;
}

} // namespace

// ---------------------------------------------------------------------------
// config / layout

void TinyConfig::validate() const {
    if (vocab_size == 0 || d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_context == 0) {
        throw InvalidConfig("tiny config dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw InvalidConfig("d_model must be divisible by n_heads");
    }
}

nlohmann::json TinyConfig::to_json() const {
    return {{"vocab_size", vocab_size}, {"d_model", d_model},   {"n_layers", n_layers},
            {"n_heads", n_heads},       {"d_ff", d_ff},         {"max_context", max_context}};
}

TinyConfig TinyConfig::from_json(const nlohmann::json & j) {
    TinyConfig c;
    c.vocab_size  = j.at("vocab_size").get<size_t>();
    c.d_model     = j.at("d_model").get<size_t>();
    c.n_layers    = j.at("n_layers").get<size_t>();
    c.n_heads     = j.at("n_heads").get<size_t>();
    c.d_ff        = j.at("d_ff").get<size_t>();
    c.max_context = j.at("max_context").get<size_t>();
    c.validate();
    return c;
}

ParamLayout::ParamLayout(const TinyConfig & cfg) {
    const size_t d = cfg.d_model, f = cfg.d_ff, V = cfg.vocab_size, C = cfg.max_context;
    auto add = [&](const std::string & name, size_t count) {
        const size_t off = total;
        tensors_.emplace_back(name, count);
        total += count;
        return off;
    };
    tok_emb = add("tok_emb", V * d);
    pos_emb = add("pos_emb", C * d);
    for (size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        LayerOffsets lo{};
        lo.ln1_g = add(p + "ln1.weight", d);
        lo.ln1_b = add(p + "ln1.bias", d);
        lo.w_qkv = add(p + "attn.qkv.weight", 3 * d * d);
        lo.b_qkv = add(p + "attn.qkv.bias", 3 * d);
        lo.w_o   = add(p + "attn.out.weight", d * d);
        lo.b_o   = add(p + "attn.out.bias", d);
        lo.ln2_g = add(p + "ln2.weight", d);
        lo.ln2_b = add(p + "ln2.bias", d);
        lo.w_fc1 = add(p + "mlp.fc1.weight", f * d);
        lo.b_fc1 = add(p + "mlp.fc1.bias", f);
        lo.w_fc2 = add(p + "mlp.fc2.weight", d * f);
        lo.b_fc2 = add(p + "mlp.fc2.bias", d);
        layers.push_back(lo);
    }
    lnf_g = add("ln_f.weight", d);
    lnf_b = add("ln_f.bias", d);
    w_out = add("head.weight", V * d);
    b_out = add("head.bias", V);
}

std::vector<float> init_params(const TinyConfig & cfg, uint64_t seed) {
    cfg.validate();
    const ParamLayout layout(cfg);
    std::vector<float> p(layout.total, 0.0f);
    Rng rng(seed);
    const double resid_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));
    auto normal = [&](size_t off, size_t n, double std) {
        for (size_t i = 0; i < n; ++i) p[off + i] = static_cast<float>(rng.normal() * std);
    };
    auto fill = [&](size_t off, size_t n, float v) { std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(off), n, v); };
    const size_t d = cfg.d_model, f = cfg.d_ff;
    normal(layout.tok_emb, cfg.vocab_size * d, 0.02);
    normal(layout.pos_emb, cfg.max_context * d, 0.01);
    for (const auto & lo : layout.layers) {
        fill(lo.ln1_g, d, 1.0f);
        normal(lo.w_qkv, 3 * d * d, 0.02);
        normal(lo.w_o, d * d, 0.02 * resid_scale);
        fill(lo.ln2_g, d, 1.0f);
        normal(lo.w_fc1, f * d, 0.02);
        normal(lo.w_fc2, d * f, 0.02 * resid_scale);
    }
    fill(layout.lnf_g, d, 1.0f);
    normal(layout.w_out, cfg.vocab_size * d, 0.02);
    return p;
}

// ---------------------------------------------------------------------------
// full-sequence graph

template <typename Real>
SequenceGraph<Real>::SequenceGraph(const TinyConfig & cfg, const ParamLayout & layout) : cfg_(cfg), layout_(layout) {
    const size_t L = cfg.n_layers;
    xs_.resize(L + 1);
    for (auto * v : {&ln1_, &ln1_mu_, &ln1_rs_, &qkv_, &att_, &o_, &xmid_, &ln2_, &ln2_mu_, &ln2_rs_, &h_, &g_}) {
        v->resize(L);
    }
}

template <typename Real>
std::pair<double, size_t> SequenceGraph<Real>::forward(std::span<const Real> params, std::span<const TokenId> tokens,
                                                       size_t loss_start) {
    const size_t T = tokens.size(), d = cfg_.d_model, f = cfg_.d_ff, V = cfg_.vocab_size;
    const size_t H = cfg_.n_heads, dh = cfg_.head_dim(), L = cfg_.n_layers;
    if (T == 0) {
        throw InvalidConfig("empty sequence");
    }
    if (T > cfg_.max_context) {
        throw ContextOverflow("sequence of " + std::to_string(T) + " tokens exceeds context " +
                              std::to_string(cfg_.max_context));
    }
    T_ = T;
    tokens_.assign(tokens.begin(), tokens.end());
    const Real * P = params.data();
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));

    auto & x0 = xs_[0];
    x0.assign(T * d, Real(0));
    for (size_t t = 0; t < T; ++t) {
        const auto tok = static_cast<size_t>(tokens[t]);
        if (tok >= V) {
            throw InvalidConfig("token id out of range");
        }
        for (size_t k = 0; k < d; ++k) {
            x0[t * d + k] = P[layout_.tok_emb + tok * d + k] + P[layout_.pos_emb + t * d + k];
        }
    }

    for (size_t l = 0; l < L; ++l) {
        const LayerOffsets & lo = layout_.layers[l];
        const auto & xin = xs_[l];
        ln1_[l].resize(T * d);
        ln1_mu_[l].resize(T);
        ln1_rs_[l].resize(T);
        layer_norm(xin.data(), P + lo.ln1_g, P + lo.ln1_b, ln1_[l].data(), ln1_mu_[l].data(), ln1_rs_[l].data(), T, d);

        qkv_[l].resize(T * 3 * d);
        kp::linear(ln1_[l].data(), P + lo.w_qkv, P + lo.b_qkv, qkv_[l].data(), T, d, 3 * d);

        auto & att = att_[l];
        att.assign(H * T * T, Real(0));
        auto & o = o_[l];
        o.assign(T * d, Real(0));
        const Real * qkv = qkv_[l].data();
        for (size_t h = 0; h < H; ++h) {
            for (size_t t = 0; t < T; ++t) {
                const Real * q = qkv + t * 3 * d + h * dh;
                Real * row = att.data() + (h * T + t) * T;
                Real mx = -std::numeric_limits<Real>::infinity();
                for (size_t u = 0; u <= t; ++u) {
                    const Real * kk = qkv + u * 3 * d + d + h * dh;
                    Real s = 0;
                    for (size_t e = 0; e < dh; ++e) s += q[e] * kk[e];
                    row[u] = s * scale;
                    mx = std::max(mx, row[u]);
                }
                Real z = 0;
                for (size_t u = 0; u <= t; ++u) {
                    row[u] = std::exp(row[u] - mx);
                    z += row[u];
                }
                Real * out = o.data() + t * d + h * dh;
                for (size_t u = 0; u <= t; ++u) {
                    row[u] /= z;
                    const Real * vv = qkv + u * 3 * d + 2 * d + h * dh;
                    for (size_t e = 0; e < dh; ++e) out[e] += row[u] * vv[e];
                }
            }
        }

        auto & xmid = xmid_[l];
        xmid.resize(T * d);
        kp::linear(o.data(), P + lo.w_o, P + lo.b_o, xmid.data(), T, d, d);
        for (size_t i = 0; i < T * d; ++i) xmid[i] += xin[i];

        ln2_[l].resize(T * d);
        ln2_mu_[l].resize(T);
        ln2_rs_[l].resize(T);
        layer_norm(xmid.data(), P + lo.ln2_g, P + lo.ln2_b, ln2_[l].data(), ln2_mu_[l].data(), ln2_rs_[l].data(), T,
                   d);

        h_[l].resize(T * f);
        g_[l].resize(T * f);
        kp::linear(ln2_[l].data(), P + lo.w_fc1, P + lo.b_fc1, h_[l].data(), T, d, f);
        for (size_t i = 0; i < T * f; ++i) g_[l][i] = gelu(h_[l][i]);

        auto & xout = xs_[l + 1];
        xout.resize(T * d);
        kp::linear(g_[l].data(), P + lo.w_fc2, P + lo.b_fc2, xout.data(), T, f, d);
        for (size_t i = 0; i < T * d; ++i) xout[i] += xmid[i];
    }

    lnf_.resize(T * d);
    lnf_mu_.resize(T);
    lnf_rs_.resize(T);
    layer_norm(xs_[L].data(), P + layout_.lnf_g, P + layout_.lnf_b, lnf_.data(), lnf_mu_.data(), lnf_rs_.data(), T, d);
    logits_.resize(T * V);
    kp::linear(lnf_.data(), P + layout_.w_out, P + layout_.b_out, logits_.data(), T, d, V);

    dlogits_.assign(T * V, Real(0));
    double loss = 0.0;
    size_t count = 0;
    for (size_t t = std::max<size_t>(loss_start, 1); t < T; ++t) {
        const Real * z = logits_.data() + (t - 1) * V;
        Real * dz = dlogits_.data() + (t - 1) * V;
        Real mx = *std::max_element(z, z + V);
        Real sum = 0;
        for (size_t v = 0; v < V; ++v) {
            dz[v] = std::exp(z[v] - mx);
            sum += dz[v];
        }
        const auto target = static_cast<size_t>(tokens[t]);
        loss += static_cast<double>(std::log(sum) + mx - z[target]);
        for (size_t v = 0; v < V; ++v) dz[v] /= sum;
        dz[target] -= Real(1);
        ++count;
    }
    return {loss, count};
}

template <typename Real>
void SequenceGraph<Real>::backward(std::span<const Real> params, std::span<Real> grad, Real scale) {
    const size_t T = T_, d = cfg_.d_model, f = cfg_.d_ff, V = cfg_.vocab_size;
    const size_t H = cfg_.n_heads, dh = cfg_.head_dim(), L = cfg_.n_layers;
    const Real * P = params.data();
    Real * G = grad.data();
    const Real att_scale = Real(1) / std::sqrt(static_cast<Real>(dh));

    std::vector<Real> dlog(dlogits_);
    for (auto & v : dlog) v *= scale;

    std::vector<Real> dz(T * d);
    kp::linear_backward_input(dlog.data(), P + layout_.w_out, dz.data(), T, d, V);
    kp::linear_backward_weights(dlog.data(), lnf_.data(), G + layout_.w_out, G + layout_.b_out, T, d, V);

    std::vector<Real> dx(T * d, Real(0));
    layer_norm_backward(xs_[L].data(), lnf_mu_.data(), lnf_rs_.data(), P + layout_.lnf_g, dz.data(), dx.data(),
                        G + layout_.lnf_g, G + layout_.lnf_b, T, d);

    std::vector<Real> dg(T * f), dm(T * d), dxmid(T * d), dO(T * d), dqkv(T * 3 * d), da(T * d), dp(T);
    for (size_t l = L; l-- > 0;) {
        const LayerOffsets & lo = layout_.layers[l];

        // x_out = xmid + fc2(gelu(fc1(ln2(xmid))))
        dxmid = dx;
        kp::linear_backward_input(dx.data(), P + lo.w_fc2, dg.data(), T, f, d);
        kp::linear_backward_weights(dx.data(), g_[l].data(), G + lo.w_fc2, G + lo.b_fc2, T, f, d);
        for (size_t i = 0; i < T * f; ++i) dg[i] *= gelu_grad(h_[l][i]);
        kp::linear_backward_input(dg.data(), P + lo.w_fc1, dm.data(), T, d, f);
        kp::linear_backward_weights(dg.data(), ln2_[l].data(), G + lo.w_fc1, G + lo.b_fc1, T, d, f);
        layer_norm_backward(xmid_[l].data(), ln2_mu_[l].data(), ln2_rs_[l].data(), P + lo.ln2_g, dm.data(),
                            dxmid.data(), G + lo.ln2_g, G + lo.ln2_b, T, d);

        // xmid = xin + out(attn(ln1(xin)))
        dx = dxmid;
        kp::linear_backward_input(dxmid.data(), P + lo.w_o, dO.data(), T, d, d);
        kp::linear_backward_weights(dxmid.data(), o_[l].data(), G + lo.w_o, G + lo.b_o, T, d, d);

        std::fill(dqkv.begin(), dqkv.end(), Real(0));
        const Real * qkv = qkv_[l].data();
        for (size_t h = 0; h < H; ++h) {
            for (size_t t = 0; t < T; ++t) {
                const Real * row = att_[l].data() + (h * T + t) * T;
                const Real * dout = dO.data() + t * d + h * dh;
                Real dot = 0;
                for (size_t u = 0; u <= t; ++u) {
                    const Real * vv = qkv + u * 3 * d + 2 * d + h * dh;
                    Real * dvv = dqkv.data() + u * 3 * d + 2 * d + h * dh;
                    Real s = 0;
                    for (size_t e = 0; e < dh; ++e) {
                        s += dout[e] * vv[e];
                        dvv[e] += row[u] * dout[e];
                    }
                    dp[u] = s;
                    dot += row[u] * s;
                }
                const Real * q = qkv + t * 3 * d + h * dh;
                Real * dq = dqkv.data() + t * 3 * d + h * dh;
                for (size_t u = 0; u <= t; ++u) {
                    const Real ds = row[u] * (dp[u] - dot) * att_scale;
                    if (ds == Real(0)) continue;
                    const Real * kk = qkv + u * 3 * d + d + h * dh;
                    Real * dk = dqkv.data() + u * 3 * d + d + h * dh;
                    for (size_t e = 0; e < dh; ++e) {
                        dq[e] += ds * kk[e];
                        dk[e] += ds * q[e];
                    }
                }
            }
        }
        kp::linear_backward_input(dqkv.data(), P + lo.w_qkv, da.data(), T, d, 3 * d);
        kp::linear_backward_weights(dqkv.data(), ln1_[l].data(), G + lo.w_qkv, G + lo.b_qkv, T, d, 3 * d);
        layer_norm_backward(xs_[l].data(), ln1_mu_[l].data(), ln1_rs_[l].data(), P + lo.ln1_g, da.data(), dx.data(),
                            G + lo.ln1_g, G + lo.ln1_b, T, d);
    }

    for (size_t t = 0; t < T; ++t) {
        const auto tok = static_cast<size_t>(tokens_[t]);
        for (size_t k = 0; k < d; ++k) {
            G[layout_.tok_emb + tok * d + k] += dx[t * d + k];
            G[layout_.pos_emb + t * d + k] += dx[t * d + k];
        }
    }
}

template class SequenceGraph<float>;
template class SequenceGraph<double>;

// ---------------------------------------------------------------------------
// incremental decoding

Session::Session(const TinyModel & model) : model_(model) {
    const auto & c = model.config();
    k_cache_.assign(c.n_layers, std::vector<float>(c.max_context * c.d_model));
    v_cache_.assign(c.n_layers, std::vector<float>(c.max_context * c.d_model));
    x_.resize(c.d_model);
    a_.resize(c.d_model);
    qkv_.resize(3 * c.d_model);
    att_.resize(c.max_context);
    o_.resize(c.d_model);
    proj_.resize(c.d_model);
    h_.resize(c.d_ff);
    logits_.resize(c.vocab_size);
}

std::span<const float> Session::step(TokenId token, const StepControl & ctl) {
    const auto & c = model_.config();
    const auto & lay = model_.layout();
    const float * P = model_.params().data();
    const size_t d = c.d_model, f = c.d_ff, H = c.n_heads, dh = c.head_dim();
    if (pos_ >= c.max_context) {
        throw ContextOverflow("context of " + std::to_string(c.max_context) + " tokens is full");
    }
    const auto tok = static_cast<size_t>(token);
    if (tok >= c.vocab_size) {
        throw InvalidConfig("token id out of range");
    }
    const size_t t = pos_;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    for (size_t k = 0; k < d; ++k) {
        x_[k] = P[lay.tok_emb + tok * d + k] + P[lay.pos_emb + t * d + k];
    }
    if (ctl.all_layers) {
        ctl.all_layers->assign(c.n_layers, {});
    }
    for (size_t l = 0; l < c.n_layers; ++l) {
        const LayerOffsets & lo = lay.layers[l];
        layer_norm(x_.data(), P + lo.ln1_g, P + lo.ln1_b, a_.data(), static_cast<float *>(nullptr),
                   static_cast<float *>(nullptr), 1, d);
        kernels::serial::linear(a_.data(), P + lo.w_qkv, P + lo.b_qkv, qkv_.data(), 1, d, 3 * d);
        float * kc = k_cache_[l].data();
        float * vc = v_cache_[l].data();
        std::memcpy(kc + t * d, qkv_.data() + d, d * sizeof(float));
        std::memcpy(vc + t * d, qkv_.data() + 2 * d, d * sizeof(float));
        std::fill(o_.begin(), o_.end(), 0.0f);
        for (size_t h = 0; h < H; ++h) {
            const float * q = qkv_.data() + h * dh;
            float mx = -std::numeric_limits<float>::infinity();
            for (size_t u = 0; u <= t; ++u) {
                const float * kk = kc + u * d + h * dh;
                float s = 0;
                for (size_t e = 0; e < dh; ++e) s += q[e] * kk[e];
                att_[u] = s * scale;
                mx = std::max(mx, att_[u]);
            }
            float z = 0;
            for (size_t u = 0; u <= t; ++u) {
                att_[u] = std::exp(att_[u] - mx);
                z += att_[u];
            }
            float * out = o_.data() + h * dh;
            for (size_t u = 0; u <= t; ++u) {
                const float w = att_[u] / z;
                const float * vv = vc + u * d + h * dh;
                for (size_t e = 0; e < dh; ++e) out[e] += w * vv[e];
            }
        }
        kernels::serial::linear(o_.data(), P + lo.w_o, P + lo.b_o, proj_.data(), 1, d, d);
        for (size_t k = 0; k < d; ++k) x_[k] += proj_[k];

        layer_norm(x_.data(), P + lo.ln2_g, P + lo.ln2_b, a_.data(), static_cast<float *>(nullptr),
                   static_cast<float *>(nullptr), 1, d);
        kernels::serial::linear(a_.data(), P + lo.w_fc1, P + lo.b_fc1, h_.data(), 1, d, f);
        for (size_t i = 0; i < f; ++i) h_[i] = gelu(h_[i]);
        kernels::serial::linear(h_.data(), P + lo.w_fc2, P + lo.b_fc2, proj_.data(), 1, f, d);
        for (size_t k = 0; k < d; ++k) x_[k] += proj_[k];

        if (!ctl.steer.empty() && l == ctl.steer_layer) {
            for (size_t k = 0; k < d; ++k) x_[k] += ctl.alpha * ctl.steer[k];
        }
        if (ctl.tap && l == ctl.tap_layer) {
            ctl.tap->assign(x_.begin(), x_.end());
        }
        if (ctl.all_layers) {
            (*ctl.all_layers)[l].assign(x_.begin(), x_.end());
        }
    }
    layer_norm(x_.data(), P + lay.lnf_g, P + lay.lnf_b, a_.data(), static_cast<float *>(nullptr),
               static_cast<float *>(nullptr), 1, d);
    kernels::serial::linear(a_.data(), P + lay.w_out, P + lay.b_out, logits_.data(), 1, d, c.vocab_size);
    ++pos_;
    return logits_;
}

// ---------------------------------------------------------------------------
// model + checkpoint

TinyModel::TinyModel(TinyConfig cfg, std::vector<float> params, uint64_t seed, std::string training_hash)
    : cfg_(cfg), layout_(cfg), params_(std::move(params)), seed_(seed), training_hash_(std::move(training_hash)) {
    cfg_.validate();
    if (params_.size() != layout_.total) {
        throw DimensionMismatch("expected " + std::to_string(layout_.total) + " parameters, got " +
                                std::to_string(params_.size()));
    }
    if (cfg_.vocab_size != tokenizer_.vocab_size()) {
        throw DimensionMismatch("checkpoint vocabulary size " + std::to_string(cfg_.vocab_size) +
                                " does not match tokenizer " + std::string(WordTokenizer::kVersion));
    }
}

std::vector<uint8_t> encode_checkpoint(const TinyModel & model, const nlohmann::json & extra) {
    std::vector<uint8_t> payload;
    bytes::put_floats(payload, model.params());
    nlohmann::json names = nlohmann::json::array();
    for (const auto & [name, n] : model.layout().tensors()) {
        names.push_back({name, n});
    }
    nlohmann::json header = {
        {"config", model.config().to_json()},
        {"seed", model.seed()},
        {"training_hash", model.training_hash()},
        {"tokenizer", std::string(WordTokenizer::kVersion)},
        {"param_count", model.params().size()},
        {"param_order", names},
    };
    if (!extra.is_null()) {
        header["extra"] = extra;
    }
    const std::string h = header.dump();
    std::vector<uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    bytes::put_u32(out, static_cast<uint32_t>(h.size()));
    out.insert(out.end(), h.begin(), h.end());
    out.insert(out.end(), payload.begin(), payload.end());
    bytes::put_u32(out, bytes::crc32(out));
    return out;
}

TinyModel decode_checkpoint(std::span<const uint8_t> in) {
    const size_t m = kCheckpointMagic.size();
    if (in.size() < m || std::memcmp(in.data(), kCheckpointMagic.data(), m) != 0) {
        throw BadMagic("not a SEALTNY1 checkpoint");
    }
    if (in.size() < m + 8) {
        throw ChecksumMismatch("checkpoint truncated");
    }
    const size_t body = in.size() - 4;
    if (bytes::crc32(in.first(body)) != bytes::get_u32(in, body)) {
        throw ChecksumMismatch("checkpoint CRC32 mismatch");
    }
    const uint32_t hlen = bytes::get_u32(in, m);
    if (m + 4 + size_t{hlen} > body) {
        throw ChecksumMismatch("checkpoint header overruns file");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(m + 4),
                                       in.begin() + static_cast<std::ptrdiff_t>(m + 4 + hlen));
    } catch (const nlohmann::json::exception & e) {
        throw ChecksumMismatch(std::string("checkpoint header unreadable: ") + e.what());
    }
    const TinyConfig cfg = TinyConfig::from_json(header.at("config"));
    const size_t count = header.at("param_count").get<size_t>();
    const size_t start = m + 4 + hlen;
    if (body != start + 4 * count) {
        throw ChecksumMismatch("checkpoint payload has " + std::to_string(body - start) + " bytes, expected " +
                               std::to_string(4 * count));
    }
    const auto payload = in.subspan(start, 4 * count);
    std::vector<float> params(count);
    bytes::get_floats(payload, 0, params);
    return TinyModel(cfg, std::move(params), header.value("seed", uint64_t{0}), header.value("training_hash", ""));
}

void save_checkpoint(const std::string & path, const TinyModel & model, const nlohmann::json & extra) {
    bytes::write_file(path, encode_checkpoint(model, extra));
}

TinyModel load_checkpoint(const std::string & path) {
    std::vector<uint8_t> data;
    try {
        data = bytes::read_file(path);
    } catch (const std::exception &) {
        throw MissingCheckpoint("cannot read checkpoint " + path);
    }
    return decode_checkpoint(data);
}

} // namespace seal::tiny
