#pragma once

#include <string>
#include <vector>

#include "wmc/config.hpp"
#include "wmc/nn.hpp"
#include "wmc/tape.hpp"

namespace wmc {

// Latent handling: `sample` draws one-hot codes with a straight-through
// gradient (training); `surrogate` substitutes the softmax itself, which has
// the same backward as the straight-through estimator and makes the whole
// loss a smooth function for finite-difference suites.
enum class LatentMode { sample, surrogate };

// Parameter construction and forward graphs for every network in the model.
// All functions are templated on the scalar type so the gradient suite can
// run the identical architecture in double precision.
template <class T>
struct Nets {
    using Var = typename Tape<T>::Var;

    // ---- initialization ----

    static void init_dense(ParamSet<T>& p, const std::string& name, int in, int out,
                           RngStream& rng) {
        p.add(name + "/w", init_dense_weight<T>({in, out}, in, rng));
        p.add(name + "/b", TensorT<T>::zeros({out}));
    }

    static void init_mlp(ParamSet<T>& p, const std::string& prefix, int in, int hidden,
                         int layers, int out, RngStream& rng) {
        int cur = in;
        for (int i = 0; i < layers; ++i) {
            init_dense(p, prefix + "/fc" + std::to_string(i), cur, hidden, rng);
            cur = hidden;
        }
        init_dense(p, prefix + "/out", cur, out, rng);
    }

    static void init_encoder(const ModelArch& arch, ParamSet<T>& p, RngStream& rng) {
        int ci = 3;
        for (size_t i = 0; i < arch.enc_kernels.size(); ++i) {
            const int k = arch.enc_kernels[i], co = arch.enc_channels[i];
            p.add("enc/conv" + std::to_string(i) + "/w",
                  init_dense_weight<T>({k, k, ci, co}, k * k * ci, rng));
            p.add("enc/conv" + std::to_string(i) + "/b", TensorT<T>::zeros({co}));
            ci = co;
        }
        int cur = arch.task_dim;
        for (int i = 0; i < arch.task_layers; ++i) {
            init_dense(p, "enc/task" + std::to_string(i), cur, arch.task_units, rng);
            cur = arch.task_units;
        }
    }

    static void init_rssm(const ModelArch& arch, ParamSet<T>& p, RngStream& rng) {
        const int zdim = arch.z_dim();
        init_dense(p, "rssm/in", zdim + arch.action_dim, arch.rssm_hidden, rng);
        p.add("rssm/gru/wx",
              init_dense_weight<T>({arch.rssm_hidden, 3 * arch.rssm_units},
                                   arch.rssm_hidden, rng));
        p.add("rssm/gru/wh",
              init_dense_weight<T>({arch.rssm_units, 3 * arch.rssm_units},
                                   arch.rssm_units, rng));
        p.add("rssm/gru/b", TensorT<T>::zeros({3 * arch.rssm_units}));
        init_dense(p, "rssm/post1", arch.rssm_units + arch.embed_dim(), arch.rssm_hidden,
                   rng);
        init_dense(p, "rssm/post2", arch.rssm_hidden, zdim, rng);
        init_dense(p, "rssm/prior1", arch.rssm_units, arch.rssm_hidden, rng);
        init_dense(p, "rssm/prior2", arch.rssm_hidden, zdim, rng);
    }

    static void init_decoder(const ModelArch& arch, ParamSet<T>& p,
                             const std::string& prefix, int out_channels,
                             RngStream& rng) {
        const int s0 = arch.dec_start_hw();
        const int c0 = arch.enc_channels.back();
        init_dense(p, prefix + "/fc", arch.feat_dim(), s0 * s0 * c0, rng);
        const auto channels = arch.dec_channels(out_channels);
        int ci = c0;
        for (size_t i = 0; i < arch.dec_kernels.size(); ++i) {
            const int k = arch.dec_kernels[i], co = channels[i];
            p.add(prefix + "/deconv" + std::to_string(i) + "/w",
                  init_dense_weight<T>({ci, k, k, co}, k * k * ci, rng));
            p.add(prefix + "/deconv" + std::to_string(i) + "/b", TensorT<T>::zeros({co}));
            ci = co;
        }
    }

    // ---- forward graphs ----

    static Var dense_fwd(Tape<T>& t, BoundParams<T>& bp, const std::string& name, Var x) {
        return t.dense(x, bp[name + "/w"], bp[name + "/b"]);
    }

    static Var mlp_fwd(Tape<T>& t, BoundParams<T>& bp, const std::string& prefix, Var x,
                       int layers) {
        Var h = x;
        for (int i = 0; i < layers; ++i) {
            h = t.elu(dense_fwd(t, bp, prefix + "/fc" + std::to_string(i), h));
        }
        return dense_fwd(t, bp, prefix + "/out", h);
    }

    // Image [N,H,W,3] + task [N,task_dim] -> embedding [N, embed_dim].
    // Conv features and task-MLP features are concatenated.
    static Var encode(Tape<T>& t, BoundParams<T>& bp, const ModelArch& arch, Var image,
                      Var task) {
        check(t.shape(image)[1] == arch.img_h && t.shape(image)[2] == arch.img_w,
              "encode: image shape mismatch");
        Var h = image;
        for (size_t i = 0; i < arch.enc_kernels.size(); ++i) {
            const int k = arch.enc_kernels[i];
            h = t.elu(t.conv2d(h, bp["enc/conv" + std::to_string(i) + "/w"],
                               bp["enc/conv" + std::to_string(i) + "/b"],
                               arch.enc_strides[i], (k - 2) / 2));
        }
        const int n = t.shape(h)[0];
        Var flat = t.reshape(h, {n, arch.conv_out_dim()});
        Var task_h = task;
        for (int i = 0; i < arch.task_layers; ++i) {
            task_h = t.elu(dense_fwd(t, bp, "enc/task" + std::to_string(i), task_h));
        }
        return t.concat({flat, task_h});
    }

    struct RssmState {
        Var h;       // [N, rssm_units]
        Var logits;  // [N, z_dim]
        Var z;       // [N, z_dim], one-hot per variable
    };

    static Var gru_advance(Tape<T>& t, BoundParams<T>& bp, const ModelArch& arch,
                           Var h_prev, Var z_prev, Var a_prev) {
        Var x = t.elu(dense_fwd(t, bp, "rssm/in", t.concat({z_prev, a_prev})));
        return t.gru_cell(x, h_prev, bp["rssm/gru/wx"], bp["rssm/gru/wh"],
                          bp["rssm/gru/b"]);
    }

    static Var latent_from_logits(Tape<T>& t, const ModelArch& arch, Var logits,
                                  RngStream& rng, LatentMode mode) {
        if (mode == LatentMode::surrogate) {
            return t.softmax(logits, arch.latent_classes);
        }
        return t.categorical_sample_st(logits, arch.latent_classes, rng);
    }

    // Representation model: logits from (h_t, embed_t); z sampled with a
    // straight-through gradient.
    static RssmState rssm_posterior(Tape<T>& t, BoundParams<T>& bp, const ModelArch& arch,
                                    Var h_prev, Var z_prev, Var a_prev, Var embed,
                                    RngStream& rng, LatentMode mode = LatentMode::sample) {
        RssmState s;
        s.h = gru_advance(t, bp, arch, h_prev, z_prev, a_prev);
        Var hidden = t.elu(dense_fwd(t, bp, "rssm/post1", t.concat({s.h, embed})));
        s.logits = dense_fwd(t, bp, "rssm/post2", hidden);
        s.z = latent_from_logits(t, arch, s.logits, rng, mode);
        return s;
    }

    // Predictive memory model: logits from h_t only; the imagination transition.
    static RssmState rssm_prior(Tape<T>& t, BoundParams<T>& bp, const ModelArch& arch,
                                Var h_prev, Var z_prev, Var a_prev, RngStream& rng,
                                LatentMode mode = LatentMode::sample) {
        RssmState s;
        s.h = gru_advance(t, bp, arch, h_prev, z_prev, a_prev);
        Var hidden = t.elu(dense_fwd(t, bp, "rssm/prior1", s.h));
        s.logits = dense_fwd(t, bp, "rssm/prior2", hidden);
        s.z = latent_from_logits(t, arch, s.logits, rng, mode);
        return s;
    }

    // Prior logits for states whose h is already computed (posterior pass).
    static Var prior_logits_from_h(Tape<T>& t, BoundParams<T>& bp, Var h) {
        Var hidden = t.elu(dense_fwd(t, bp, "rssm/prior1", h));
        return dense_fwd(t, bp, "rssm/prior2", hidden);
    }

    // feat [N, feat_dim] -> image [N, H, W, out_channels]
    static Var decode(Tape<T>& t, BoundParams<T>& bp, const ModelArch& arch,
                      const std::string& prefix, Var feat, int out_channels) {
        const int n = t.shape(feat)[0];
        const int s0 = arch.dec_start_hw();
        const int c0 = arch.enc_channels.back();
        Var h = dense_fwd(t, bp, prefix + "/fc", feat);
        h = t.reshape(h, {n, s0, s0, c0});
        const size_t layers = arch.dec_kernels.size();
        for (size_t i = 0; i < layers; ++i) {
            const int k = arch.dec_kernels[i];
            const int pad_total = k - 2;  // doubles the spatial size at stride 2
            const int pad_lo = pad_total / 2;
            const int pad_hi = pad_total - pad_lo;
            h = t.conv2d_transpose(h, bp[prefix + "/deconv" + std::to_string(i) + "/w"],
                                   bp[prefix + "/deconv" + std::to_string(i) + "/b"], 2,
                                   pad_lo, pad_hi);
            if (i + 1 < layers) {
                h = t.elu(h);
            }
        }
        return h;
    }
};

}  // namespace wmc
