#include "bidenv/model.hpp"

namespace bidenv {

void Model::init(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.t_max < 1 || cfg.d_model < 2 || cfg.n_layers < 1 || cfg.n_heads < 1)
        throw ContractError("Model::init: non-positive dimensions");
    if (cfg.d_model % cfg.n_heads != 0)
        throw ContractError("Model::init: head count must divide model width");
    cfg_ = cfg;
    Rng rng(Rng::mix(seed, 0xb1d));
    emb_.init(cfg.t_max, cfg.d_model, cfg.adv_vocab, cfg.prod_vocab, cfg.n_cont_feats(), rng,
              cfg.per_variable_hist);
    enc_.assign(cfg.n_layers, {});
    dec_.assign(cfg.n_layers, {});
    for (auto& b : enc_) b.init(cfg.d_model, rng);
    for (auto& b : dec_) b.init(cfg.d_model, rng);
    fusion_.init(cfg.d_model, rng);
    for (auto& h : heads_) h.init(cfg.d_model, rng);
    pos_ = positional_encoding(cfg.t_max, cfg.d_model);

    params_.clear();
    emb_.register_params(params_, "emb");
    for (std::size_t i = 0; i < enc_.size(); ++i)
        enc_[i].register_params(params_, "enc" + std::to_string(i));
    for (std::size_t i = 0; i < dec_.size(); ++i)
        dec_[i].register_params(params_, "dec" + std::to_string(i));
    fusion_.register_params(params_, "fusion");
    for (int i = 0; i < kNumTargets; ++i)
        heads_[i].register_params(params_, std::string("head_") + kTargetNames[i]);
}

long Model::param_count() const {
    long n = 0;
    for (const auto& [name, t] : params_) n += static_cast<long>(t.numel());
    return n;
}

PreparedSample Model::prepare(const CampaignDayPair& pair, const NormStats& ns, int prefix_len,
                              double bid_override, int next_tick_override) const {
    DatasetHeader hdr;
    hdr.t_max = cfg_.t_max;
    return prepare_sample(pair, hdr, ns, prefix_len, bid_override, cfg_.zero_target_inputs,
                          next_tick_override);
}

SampleForward Model::forward(const PreparedSample& s) const {
    if (s.t != cfg_.t_max)
        throw ShapeError("Model::forward: sample padded to " + std::to_string(s.t) +
                         ", model expects " + std::to_string(cfg_.t_max));
    std::size_t t = static_cast<std::size_t>(cfg_.t_max);
    Tensor hist = Tensor::from({kNumVariables, t}, s.hist);
    Tensor tokens = Tensor::from({t, kNumVariables}, s.tokens);
    Tensor camp = embed_campaign(emb_, s.adv_cat, s.prod_cat, s.cont_feats);
    Tensor z_hist = embed_history(emb_, hist, camp);
    Tensor z_today = embed_today(emb_, tokens, camp, pos_);

    Tensor h_var = cfg_.use_va ? variable_encoder(z_hist, enc_, cfg_.n_heads) : z_hist;
    Tensor h_tem = temporal_decoder(z_today, s.mask, dec_, cfg_.n_heads);
    auto fused = variable_aware_fusion(h_var, h_tem, fusion_);

    SampleForward out;
    for (int i = 0; i < kNumTargets; ++i) {
        out.targets[i] = predict_target(fused[i], heads_[i], cfg_.nonneg_value_head);
        if (!cfg_.use_zip) out.targets[i].y_hat = out.targets[i].y_tilde;
    }
    return out;
}

Tensor Model::batch_loss(const PreparedBatch& batch, LossReport& report) const {
    if (batch.empty()) throw ContractError("Model::batch_loss: empty batch");
    report = {};
    Tensor total;
    std::size_t t = static_cast<std::size_t>(cfg_.t_max);
    for (const PreparedSample& s : batch) {
        if (s.labeled < 1) throw ContractError("Model::batch_loss: sample has no labeled slots");
        std::vector<double> lm(t, 0.0);
        for (int i = 0; i < s.labeled; ++i) lm[i] = 1.0;
        Tensor loss_mask = Tensor::from({t, 1}, std::move(lm));
        report.valid_slots += s.labeled;

        SampleForward fwd = forward(s);
        Tensor sample_total;
        for (int i = 0; i < kNumTargets; ++i) {
            std::vector<double> yn(t, 0.0), ind(t, 0.0), cn(t, 0.0);
            for (std::size_t slot = 0; slot < t; ++slot) {
                yn[slot] = s.target_norm[slot * kNumTargets + i];
                ind[slot] = s.target_raw[slot * kNumTargets + i] != 0.0 ? 1.0 : 0.0;
                cn[slot] = s.cum_norm[slot * kNumTargets + i];
            }
            Tensor y_norm = Tensor::from({t, 1}, std::move(yn));
            Tensor y_cum = Tensor::from({t, 1}, std::move(cn));
            const TargetPrediction& pred = fwd.targets[i];

            Tensor zip_total;
            if (cfg_.use_zip) {
                Tensor indicator = Tensor::from({t, 1}, std::move(ind));
                ZipLossParts zp = zip_loss(pred.p, pred.y_hat, indicator, y_norm, loss_mask);
                report.target_bce[i] += zp.bce.item();
                report.target_mse[i] += zp.mse.item();
                zip_total = zp.total;
            } else {
                zip_total = masked_mse(pred.y_hat, y_norm, loss_mask);
                report.target_mse[i] += zip_total.item();
            }
            Tensor target_total = zip_total;
            if (cfg_.gamma != 0.0) {
                Tensor cum = masked_mse(pred.y_cum, y_cum, loss_mask);
                report.target_cum[i] += cum.item();
                target_total = add(target_total, scale(cum, cfg_.gamma));
            }
            sample_total = i == 0 ? target_total : add(sample_total, target_total);
        }
        total = total.defined() ? add(total, sample_total) : sample_total;
    }
    double inv_b = 1.0 / static_cast<double>(batch.size());
    total = scale(total, inv_b);
    for (int i = 0; i < kNumTargets; ++i) {
        report.target_bce[i] *= inv_b;
        report.target_mse[i] *= inv_b;
        report.target_cum[i] *= inv_b;
        report.bce += report.target_bce[i];
        report.mse += report.target_mse[i];
        report.cum += report.target_cum[i];
    }
    report.zip = report.bce + report.mse;
    report.total = total.item();
    return total;
}

}  // namespace bidenv
