#pragma once

#include <string>
#include <vector>

#include "wmc/augment.hpp"
#include "wmc/config.hpp"
#include "wmc/networks.hpp"
#include "wmc/nn.hpp"
#include "wmc/optim.hpp"
#include "wmc/replay.hpp"
#include "wmc/tape.hpp"

namespace wmc {

struct WmDiagnostics {
    double total = 0.0;
    double contrastive = 0.0;
    double depth_nll = 0.0;
    double reward_nll = 0.0;
    double kl = 0.0;
    double positive_prob = 0.0;
    double positive_pair_dist = 0.0;
    int contrastive_terms = 0;
};

// InfoNCE over explicit key sets: the negative log-softmax of the positive
// bilinear logit q^T W k over the provided keys. Masked columns are excluded
// from the softmax (used to drop a query's own alternate-positive keys).
template <class T>
typename Tape<T>::Var infonce_loss(Tape<T>& tape, typename Tape<T>::Var q,
                                   typename Tape<T>::Var w, typename Tape<T>::Var keys,
                                   const std::vector<int>& positive_cols,
                                   const std::vector<uint8_t>* mask = nullptr,
                                   double* mean_positive_prob = nullptr) {
    auto logits = tape.bilinear_logits(q, w, keys);
    return tape.cross_entropy_rows(logits, positive_cols, mask, mean_positive_prob);
}

// The joint world model: invariant encoder with momentum key encoder and
// bilinear projection, categorical-latent RSSM, depth/reward (or rgb) heads.
template <class T>
class WorldModel {
public:
    using Var = typename Tape<T>::Var;

    WorldModel(ModelArch arch, WorldModelConfig cfg, AugmentationConfig aug,
               float depth_max)
        : arch_(std::move(arch)), cfg_(cfg), aug_(aug), depth_max_(depth_max) {
        arch_.validate();
    }

    const ModelArch& arch() const { return arch_; }
    const WorldModelConfig& config() const { return cfg_; }

    void init_params(ParamSet<T>& p, RngStream& rng) const {
        Nets<T>::init_encoder(arch_, p, rng);
        Nets<T>::init_rssm(arch_, p, rng);
        Nets<T>::init_mlp(p, "reward", arch_.feat_dim(), arch_.head_units,
                          arch_.head_layers, 1, rng);
        switch (cfg_.recon_head()) {
            case ReconHead::depth:
                Nets<T>::init_decoder(arch_, p, "depth", 1, rng);
                break;
            case ReconHead::rgb:
                Nets<T>::init_decoder(arch_, p, "rgb", 3, rng);
                break;
            case ReconHead::none:
                break;
        }
        if (cfg_.use_contrastive) {
            const int e = arch_.embed_dim();
            p.add("contrast/W", init_dense_weight<T>({e, e}, e, rng));
        }
    }

    // Momentum encoder: a copy of the query encoder parameters. It is a
    // separate ParamSet, never registered with the optimizer; ema_update is
    // its only mutation path.
    ParamSet<T> init_key_params(const ParamSet<T>& params) const {
        ParamSet<T> key;
        for (const auto& [name, e] : params.entries) {
            if (name.rfind("enc/", 0) == 0) {
                key.add(name, e.value);
            }
        }
        return key;
    }

    void ema_update_keys(ParamSet<T>& key_params, const ParamSet<T>& params) const {
        ema_update(key_params, params, cfg_.momentum);
    }

    struct LossResult {
        Var loss = -1;
        WmDiagnostics diag;
        // posterior state values in t-major order (row = t*B + b), detached
        TensorT<T> h_values;  // [B*L, rssm_units]
        TensorT<T> z_values;  // [B*L, z_dim]
    };

    // Builds the full joint objective on the tape:
    //   contrastive - ln q(depth|s) - ln q(reward|s) + beta * KL(post||prior)
    // as a quantity to minimize, mean over batch and time.
    LossResult build_loss(Tape<T>& tape, BoundParams<T>& bound,
                          const ParamSet<T>& key_params, const SequenceBatch& batch,
                          RngStream rng, LatentMode mode = LatentMode::sample) const {
        const int b = batch.b, l = batch.l;
        const int n_rows = b * l;
        const int h_img = arch_.img_h, w_img = arch_.img_w;
        const int64_t img3 = static_cast<int64_t>(h_img) * w_img * 3;
        const int64_t img1 = static_cast<int64_t>(h_img) * w_img;

        // ---- style interventions (outside the graph) ----
        RngStream aug_rng = rng.split("augment");
        std::vector<Tensor32> views_q(static_cast<size_t>(n_rows));
        for (int bi = 0; bi < b; ++bi) {
            for (int t = 0; t < l; ++t) {
                Tensor32 raw({h_img, w_img, 3});
                const float* src =
                    batch.rgb.data() + (static_cast<int64_t>(bi) * l + t) * img3;
                std::copy(src, src + img3, raw.data());
                const int row = t * b + bi;  // t-major
                views_q[static_cast<size_t>(row)] =
                    cfg_.use_augmentation
                        ? augment_view(raw, aug_, aug_rng.split(static_cast<uint64_t>(row)))
                        : std::move(raw);
            }
        }

        // ---- constants: inputs and targets (t-major rows) ----
        TensorT<T> x_img({n_rows, h_img, w_img, 3});
        for (int row = 0; row < n_rows; ++row) {
            const Tensor32& v = views_q[static_cast<size_t>(row)];
            for (int64_t i = 0; i < img3; ++i) {
                x_img.data()[row * img3 + i] = static_cast<T>(v[i] - 0.5f);
            }
        }
        TensorT<T> x_task({n_rows, arch_.task_dim});
        TensorT<T> reward_target({n_rows, 1});
        for (int bi = 0; bi < b; ++bi) {
            for (int t = 0; t < l; ++t) {
                const int row = t * b + bi;
                const int64_t src = static_cast<int64_t>(bi) * l + t;
                for (int k = 0; k < 6; ++k) {
                    x_task.data()[static_cast<int64_t>(row) * arch_.task_dim + k] =
                        static_cast<T>(batch.task[src * 6 + k]);
                }
                reward_target[row] = static_cast<T>(batch.reward[src]);
            }
        }

        Var image_in = tape.constant(std::move(x_img), "obs_image");
        Var task_in = tape.constant(std::move(x_task), "obs_task");
        Var embed_all = Nets<T>::encode(tape, bound, arch_, image_in, task_in);

        // ---- RSSM scan ----
        RngStream z_rng = rng.split("posterior_z");
        const int zdim = arch_.z_dim();
        Var h_prev = tape.constant(TensorT<T>::zeros({b, arch_.rssm_units}));
        Var z_prev = tape.constant(TensorT<T>::zeros({b, zdim}));
        std::vector<Var> feats, kl_terms;
        std::vector<Var> h_list, z_list;
        for (int t = 0; t < l; ++t) {
            TensorT<T> a_prev({b, arch_.action_dim});
            if (t > 0) {
                for (int bi = 0; bi < b; ++bi) {
                    const int64_t src = (static_cast<int64_t>(bi) * l + (t - 1)) * 2;
                    a_prev.data()[bi * 2] = static_cast<T>(batch.action[src]);
                    a_prev.data()[bi * 2 + 1] = static_cast<T>(batch.action[src + 1]);
                }
            }
            Var a_in = tape.constant(std::move(a_prev), "action");
            std::vector<int> rows(static_cast<size_t>(b));
            for (int bi = 0; bi < b; ++bi) {
                rows[static_cast<size_t>(bi)] = t * b + bi;
            }
            Var embed_t = tape.gather_rows(embed_all, rows);
            auto post = Nets<T>::rssm_posterior(tape, bound, arch_, h_prev, z_prev, a_in,
                                                embed_t, z_rng, mode);
            Var prior_logits = Nets<T>::prior_logits_from_h(tape, bound, post.h);
            Var kl = tape.kl_categorical(post.logits, prior_logits, arch_.latent_vars,
                                         arch_.latent_classes);
            kl_terms.push_back(kl);
            feats.push_back(tape.concat({post.h, post.z}));
            h_list.push_back(post.h);
            z_list.push_back(post.z);
            h_prev = post.h;
            z_prev = post.z;
        }
        Var feat_all = tape.stack_rows(feats);  // [B*L, feat_dim], t-major

        std::vector<Var> loss_terms;
        LossResult result;

        // ---- reconstruction ----
        const ReconHead recon = cfg_.recon_head();
        if (recon == ReconHead::depth) {
            TensorT<T> target({n_rows, h_img, w_img, 1});
            for (int bi = 0; bi < b; ++bi) {
                for (int t = 0; t < l; ++t) {
                    const int row = t * b + bi;
                    const float* src =
                        batch.depth.data() + (static_cast<int64_t>(bi) * l + t) * img1;
                    for (int64_t i = 0; i < img1; ++i) {
                        const float norm =
                            std::clamp(src[i] / depth_max_, 0.0f, 1.0f) - 0.5f;
                        target.data()[row * img1 + i] = static_cast<T>(norm);
                    }
                }
            }
            Var pred = Nets<T>::decode(tape, bound, arch_, "depth", feat_all, 1);
            Var err = tape.sub(pred, tape.constant(std::move(target), "depth_target"));
            Var nll = tape.scale(tape.half_sum_sq(err), static_cast<T>(1.0 / n_rows));
            result.diag.depth_nll = static_cast<double>(tape.val(nll)[0]);
            loss_terms.push_back(nll);
        } else if (recon == ReconHead::rgb) {
            // reconstructs the model input view (centered)
            Var pred = Nets<T>::decode(tape, bound, arch_, "rgb", feat_all, 3);
            Var err = tape.sub(pred, tape.constant(tape.val(image_in), "rgb_target"));
            Var nll = tape.scale(tape.half_sum_sq(err), static_cast<T>(1.0 / n_rows));
            result.diag.depth_nll = static_cast<double>(tape.val(nll)[0]);
            loss_terms.push_back(nll);
        }

        // ---- reward ----
        {
            Var pred = Nets<T>::mlp_fwd(tape, bound, "reward", feat_all,
                                        arch_.head_layers);
            Var err = tape.sub(pred, tape.constant(std::move(reward_target), "reward_t"));
            Var nll = tape.scale(tape.half_sum_sq(err), static_cast<T>(1.0 / n_rows));
            result.diag.reward_nll = static_cast<double>(tape.val(nll)[0]);
            loss_terms.push_back(nll);
        }

        // ---- KL with a free-bits floor per latent variable ----
        {
            std::vector<Var> kls;
            double raw_kl = 0.0;
            for (Var kl : kl_terms) {
                raw_kl += static_cast<double>(tape.val(tape.sum(kl))[0]);
                kls.push_back(tape.sum(tape.clamp_min(kl, static_cast<T>(cfg_.free_nats))));
            }
            result.diag.kl = raw_kl / n_rows;
            if (cfg_.beta > 0.0) {
                Var kl_total = tape.scale(tape.add_n(kls),
                                          static_cast<T>(cfg_.beta / n_rows));
                loss_terms.push_back(kl_total);
            }
        }

        // ---- contrastive ----
        if (cfg_.use_contrastive) {
            build_contrastive(tape, bound, key_params, batch, views_q, embed_all,
                              rng.split("keys"), loss_terms, result.diag);
        }

        result.loss = tape.add_n(loss_terms);
        result.diag.total = static_cast<double>(tape.val(result.loss)[0]);

        // detached posterior states for the controller
        Var h_all = tape.stack_rows(h_list);
        Var z_all = tape.stack_rows(z_list);
        result.h_values = tape.val(h_all);
        result.z_values = tape.val(z_all);
        return result;
    }

private:
    // Key dictionary: for N thinned queries, keys are the momentum-encoder
    // embeddings of the other view of every thinned timestep plus the query
    // views themselves; a query's own view column is masked, so each query
    // sees its positive plus 2(N-1) negatives. Action-replay partners add
    // alternate positives for rows carrying an intervention pair.
    void build_contrastive(Tape<T>& tape, BoundParams<T>& bound,
                           const ParamSet<T>& key_params, const SequenceBatch& batch,
                           const std::vector<Tensor32>& views_q, Var embed_all,
                           RngStream rng, std::vector<Var>& loss_terms,
                           WmDiagnostics& diag) const {
        const int b = batch.b, l = batch.l;
        const int h_img = arch_.img_h, w_img = arch_.img_w;
        const int64_t img3 = static_cast<int64_t>(h_img) * w_img * 3;
        const auto thins = ReplayBuffer::mine_negatives(l, cfg_.stride_negatives);
        const int n = static_cast<int>(thins.size()) * b;
        if (n == 0) {
            return;
        }

        // gather query rows (t-major)
        std::vector<int> q_rows;
        std::vector<std::pair<int, int>> q_bt;
        for (int tau : thins) {
            for (int bi = 0; bi < b; ++bi) {
                q_rows.push_back(tau * b + bi);
                q_bt.emplace_back(bi, tau);
            }
        }
        Var queries = tape.gather_rows(embed_all, q_rows);

        // key views: augmented second view of each thinned step, plus the
        // partner (texture-intervened) view where present
        RngStream key_aug = rng.split("aug_k");
        std::vector<Tensor32> key_views(static_cast<size_t>(n));
        std::vector<int> partner_of(static_cast<size_t>(n), -1);
        std::vector<Tensor32> partner_views;
        for (int i = 0; i < n; ++i) {
            const auto [bi, tau] = q_bt[static_cast<size_t>(i)];
            Tensor32 raw({h_img, w_img, 3});
            const float* src =
                batch.rgb.data() + (static_cast<int64_t>(bi) * l + tau) * img3;
            std::copy(src, src + img3, raw.data());
            key_views[static_cast<size_t>(i)] =
                cfg_.use_augmentation
                    ? augment_view(raw, aug_, key_aug.split(static_cast<uint64_t>(i)))
                    : std::move(raw);
            if (cfg_.use_action_replay && batch.partner_present[static_cast<size_t>(bi)]) {
                Tensor32 praw({h_img, w_img, 3});
                const float* psrc = batch.partner_rgb.data() +
                                    (static_cast<int64_t>(bi) * l + tau) * img3;
                std::copy(psrc, psrc + img3, praw.data());
                partner_of[static_cast<size_t>(i)] =
                    n + n + static_cast<int>(partner_views.size());
                partner_views.push_back(
                    cfg_.use_augmentation
                        ? augment_view(praw, aug_,
                                       key_aug.split(1000000u + static_cast<uint64_t>(i)))
                        : std::move(praw));
            }
        }

        // momentum-encoder forward pass (no gradients, separate tape)
        const int m_total = 2 * n + static_cast<int>(partner_views.size());
        TensorT<T> key_matrix({m_total, arch_.embed_dim()});
        {
            Tape<T> ktape;
            BoundParams<T> kbound(ktape, key_params, false);
            TensorT<T> kimgs({m_total, h_img, w_img, 3});
            TensorT<T> ktasks({m_total, arch_.task_dim});
            auto put_view = [&](int row, const Tensor32& v, int bi, int tau) {
                for (int64_t i = 0; i < img3; ++i) {
                    kimgs.data()[row * img3 + i] = static_cast<T>(v[i] - 0.5f);
                }
                const int64_t src = (static_cast<int64_t>(bi) * l + tau) * 6;
                for (int k = 0; k < 6; ++k) {
                    ktasks.data()[static_cast<int64_t>(row) * arch_.task_dim + k] =
                        static_cast<T>(batch.task[src + k]);
                }
            };
            for (int i = 0; i < n; ++i) {
                const auto [bi, tau] = q_bt[static_cast<size_t>(i)];
                put_view(i, key_views[static_cast<size_t>(i)], bi, tau);
                put_view(n + i, views_q[static_cast<size_t>(tau * b + bi)], bi, tau);
            }
            for (size_t pi = 0; pi < partner_views.size(); ++pi) {
                int owner = -1;
                for (int i = 0; i < n; ++i) {
                    if (partner_of[static_cast<size_t>(i)] ==
                        2 * n + static_cast<int>(pi)) {
                        owner = i;
                        break;
                    }
                }
                const auto [bi, tau] = q_bt[static_cast<size_t>(owner)];
                put_view(2 * n + static_cast<int>(pi), partner_views[pi], bi, tau);
            }
            auto kimg_var = ktape.constant(std::move(kimgs));
            auto ktask_var = ktape.constant(std::move(ktasks));
            auto kembed = Nets<T>::encode(ktape, kbound, arch_, kimg_var, ktask_var);
            key_matrix = ktape.val(kembed);
        }

        Var keys_const = tape.constant(key_matrix, "keys");
        Var w_proj = bound["contrast/W"];

        // primary positives: the other view of the same timestep. A query's
        // own view column and its partner column leave the denominator.
        std::vector<uint8_t> mask(static_cast<size_t>(n) * m_total, 1);
        std::vector<int> labels(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            labels[static_cast<size_t>(i)] = i;
            mask[static_cast<size_t>(i) * m_total + n + i] = 0;
            if (partner_of[static_cast<size_t>(i)] >= 0) {
                mask[static_cast<size_t>(i) * m_total +
                     partner_of[static_cast<size_t>(i)]] = 0;
            }
        }
        double pos_prob = 0.0;
        Var logits = tape.bilinear_logits(queries, w_proj, keys_const);
        Var ce1 = tape.cross_entropy_rows(logits, labels, &mask, &pos_prob);
        diag.positive_prob = pos_prob;

        // alternate positives across texture interventions (action replay)
        std::vector<int> ar_rows;
        for (int i = 0; i < n; ++i) {
            if (partner_of[static_cast<size_t>(i)] >= 0) {
                ar_rows.push_back(i);
            }
        }
        if (!ar_rows.empty()) {
            const int n_ar = static_cast<int>(ar_rows.size());
            Var ar_logits = tape.gather_rows(logits, ar_rows);
            std::vector<uint8_t> ar_mask(static_cast<size_t>(n_ar) * m_total, 1);
            std::vector<int> ar_labels(static_cast<size_t>(n_ar));
            for (int j = 0; j < n_ar; ++j) {
                const int i = ar_rows[static_cast<size_t>(j)];
                ar_labels[static_cast<size_t>(j)] = partner_of[static_cast<size_t>(i)];
                ar_mask[static_cast<size_t>(j) * m_total + n + i] = 0;
                ar_mask[static_cast<size_t>(j) * m_total + i] = 0;  // the CE1 positive
            }
            Var ce2 = tape.cross_entropy_rows(ar_logits, ar_labels, &ar_mask);
            const double w1 = static_cast<double>(n) / (n + n_ar);
            const double w2 = static_cast<double>(n_ar) / (n + n_ar);
            Var combined = tape.add(tape.scale(ce1, static_cast<T>(w1)),
                                    tape.scale(ce2, static_cast<T>(w2)));
            loss_terms.push_back(combined);
            diag.contrastive = static_cast<double>(tape.val(combined)[0]);
            diag.contrastive_terms = n + n_ar;
        } else {
            loss_terms.push_back(ce1);
            diag.contrastive = static_cast<double>(tape.val(ce1)[0]);
            diag.contrastive_terms = n;
        }

        // positive-pair distance diagnostic: cosine distance between the
        // projected query qW and its positive key, i.e. distance in the metric
        // the bilinear head actually learns. Scale-invariant by construction.
        {
            const auto& qv = tape.val(queries);
            const auto& wv = tape.val(w_proj);
            const int e = arch_.embed_dim();
            std::vector<double> proj(static_cast<size_t>(e));
            double dist = 0.0;
            for (int i = 0; i < n; ++i) {
                for (int c = 0; c < e; ++c) {
                    double acc = 0.0;
                    for (int a = 0; a < e; ++a) {
                        acc += static_cast<double>(qv[i * e + a]) *
                               static_cast<double>(wv[a * e + c]);
                    }
                    proj[static_cast<size_t>(c)] = acc;
                }
                double dot = 0.0, nq = 0.0, nk = 0.0;
                for (int c = 0; c < e; ++c) {
                    const double bv = static_cast<double>(key_matrix[i * e + c]);
                    dot += proj[static_cast<size_t>(c)] * bv;
                    nq += proj[static_cast<size_t>(c)] * proj[static_cast<size_t>(c)];
                    nk += bv * bv;
                }
                dist += 1.0 - dot / std::max(1e-12, std::sqrt(nq) * std::sqrt(nk));
            }
            diag.positive_pair_dist = dist / n;
        }
    }

    ModelArch arch_;
    WorldModelConfig cfg_;
    AugmentationConfig aug_;
    float depth_max_;
};

}  // namespace wmc
