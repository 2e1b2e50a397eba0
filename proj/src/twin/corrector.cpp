#include "ctwin/twin/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ctwin/rng.hpp"

namespace ctwin::twin {

const char *model_kind_name(ModelKind k) {
    switch (k) {
    case ModelKind::encoder_decoder: return "encoder_decoder";
    case ModelKind::mlp: return "mlp";
    }
    return "?";
}

void CorrectorConfig::validate() const {
    if (encoder_blocks < 2 || decoder_blocks < 2)
        throw dimension_error("corrector config: encoder and decoder need at least 2 blocks");
    if (base_channels == 0 || max_channels < base_channels)
        throw dimension_error("corrector config: channel plan must be positive and non-decreasing");
    if (kernel_size == 0 || kernel_size % 2 == 0)
        throw dimension_error("corrector config: kernel size must be odd");
    if (mlp_layers < 2 || mlp_width == 0)
        throw dimension_error("corrector config: MLP needs at least 2 layers of positive width");
    if (epochs == 0 || batch_size == 0)
        throw dimension_error("corrector config: epochs and batch size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw dimension_error("corrector config: learning rate must be finite and non-negative");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw dimension_error("corrector config: validation fraction must lie in [0, 1)");
}

std::vector<nn::LayerSpec> corrector_spec(ModelKind kind, const CorrectorConfig &cfg, std::size_t taps) {
    cfg.validate();
    if (taps == 0)
        throw dimension_error("corrector_spec: tap count must be positive");
    std::vector<nn::LayerSpec> specs;
    if (kind == ModelKind::mlp) {
        for (std::size_t i = 0; i + 1 < cfg.mlp_layers; ++i) {
            specs.push_back(nn::LayerSpec::dense(cfg.mlp_width));
            specs.push_back(nn::LayerSpec::relu());
        }
        specs.push_back(nn::LayerSpec::dense(2 * taps));
        return specs;
    }

    // Encoder: stride-2 compression while the sequence can still shrink.
    std::size_t length = taps;
    std::size_t channels = cfg.base_channels;
    std::size_t halvings = 0;
    for (std::size_t i = 0; i < cfg.encoder_blocks; ++i) {
        const std::size_t stride = length > 1 ? 2 : 1;
        specs.push_back(nn::LayerSpec::conv1d(channels, cfg.kernel_size, stride));
        specs.push_back(nn::LayerSpec::batchnorm());
        specs.push_back(nn::LayerSpec::relu());
        if (stride == 2) {
            length = (length - 1) / 2 + 1;
            ++halvings;
        }
        channels = std::min(channels * 2, cfg.max_channels);
    }
    if (cfg.decoder_blocks < halvings)
        throw dimension_error("corrector_spec: decoder too shallow to restore the tap length (needs >= " +
                              std::to_string(halvings) + " blocks)");

    // Decoder: stride-1 refinement first, then one stride-2 upsampling per
    // encoder halving; channels shrink back toward the base width.
    std::size_t dec_channels = std::min(cfg.base_channels << (cfg.encoder_blocks - 1), cfg.max_channels);
    for (std::size_t i = 0; i < cfg.decoder_blocks; ++i) {
        const bool upsample = i >= cfg.decoder_blocks - halvings;
        specs.push_back(nn::LayerSpec::conv1d_transpose(dec_channels, cfg.kernel_size, upsample ? 2 : 1));
        specs.push_back(nn::LayerSpec::relu());
        dec_channels = std::max(cfg.base_channels, dec_channels / 2);
    }
    specs.push_back(nn::LayerSpec::conv1d(2, 1, 1)); // collapse to re/im channels
    specs.push_back(nn::LayerSpec::dense(2 * taps)); // regression head
    return specs;
}

namespace {

// Train tensors: inputs are [batch, 2, P] (channel 0 real, channel 1
// imaginary), targets are the matching flattened [batch, 2P].
void fill_batch(const Dataset &ds, const std::vector<std::size_t> &indices, std::size_t from, std::size_t count,
                nn::Tensor &input, nn::Tensor &target) {
    const std::size_t p = static_cast<std::size_t>(ds.meta.taps);
    input = nn::Tensor::zeros({count, 2, p});
    target = nn::Tensor::zeros({count, 2 * p});
    for (std::size_t b = 0; b < count; ++b) {
        const CirPair &pair = ds.pairs[indices[from + b]];
        for (std::size_t i = 0; i < p; ++i) {
            input.data[(b * 2 + 0) * p + i] = pair.h_rt[i].real();
            input.data[(b * 2 + 1) * p + i] = pair.h_rt[i].imag();
            target.data[b * 2 * p + i] = pair.h_real[i].real();
            target.data[b * 2 * p + p + i] = pair.h_real[i].imag();
        }
    }
}

double infer_mse(const nn::ModelParams &params, const Dataset &ds, const std::vector<std::size_t> &indices,
                 std::size_t batch_size) {
    double acc = 0.0;
    std::size_t elements = 0;
    nn::Tensor input, target;
    for (std::size_t from = 0; from < indices.size(); from += batch_size) {
        const std::size_t count = std::min(batch_size, indices.size() - from);
        fill_batch(ds, indices, from, count, input, target);
        const nn::Tensor pred = nn::infer(params, input);
        const nn::MseResult r = nn::mse_loss(pred, target);
        acc += r.loss * static_cast<double>(pred.size());
        elements += pred.size();
    }
    return elements ? acc / static_cast<double>(elements) : 0.0;
}

bool params_finite(const nn::ModelParams &params) {
    for (const nn::Layer &ly : params.layers)
        for (const nn::Tensor *t : {&ly.weights, &ly.bias, &ly.running_mean, &ly.running_var})
            if (!t->all_finite())
                return false;
    return true;
}

} // namespace

TrainResult train_corrector(const Dataset &dataset, const CorrectorConfig &cfg, ModelKind kind) {
    dataset.validate();
    cfg.validate();
    // The training contract assumes the scale_dataset normalization ran.
    double max_abs = 0.0;
    for (const CirPair &p : dataset.pairs)
        for (const std::vector<cplx> *v : {&p.h_rt, &p.h_real})
            for (const cplx &z : *v)
                max_abs = std::max({max_abs, std::abs(z.real()), std::abs(z.imag())});
    if (max_abs > 1.0 + 1e-9)
        throw state_error("train_corrector: dataset is not scaled (max |entry| = " + std::to_string(max_abs) + ")");

    const std::size_t p = static_cast<std::size_t>(dataset.meta.taps);
    SplitIndices split = split_indices(dataset.meta);
    if (split.train.empty())
        throw state_error("train_corrector: training split is empty");

    // Hold the tail of the (already shuffled) train split out for early
    // stopping; the test split stays untouched for evaluation.
    std::size_t val_count = 0;
    if (cfg.validation_fraction > 0.0 && split.train.size() > 1) {
        val_count = static_cast<std::size_t>(
            std::llround(cfg.validation_fraction * static_cast<double>(split.train.size())));
        val_count = std::min(val_count, split.train.size() - 1);
    }
    std::vector<std::size_t> train_idx(split.train.begin(), split.train.end() - static_cast<std::ptrdiff_t>(val_count));
    std::vector<std::size_t> val_idx(split.train.end() - static_cast<std::ptrdiff_t>(val_count), split.train.end());

    TrainResult result;
    result.provenance.dataset_seed = dataset.meta.seed;
    result.provenance.split = dataset.meta.split;
    result.provenance.realizations = dataset.meta.realizations;

    nn::ModelParams params =
        nn::build_model(corrector_spec(kind, cfg, p), {2, p}, mix_seed(cfg.seed, static_cast<std::uint64_t>(kind)));
    nn::AdamState adam = nn::make_adam_state(params);
    nn::AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;

    nn::ModelParams last_good = params; // end of the last fully finite epoch
    nn::ModelParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order = train_idx;
    nn::Tensor input, target;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Deterministic per-epoch shuffle of the training realizations.
        Rng shuffle(mix_seed(cfg.seed, 0xba7c4ULL, epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.next_u64() % i)]);

        const std::size_t full_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
        const std::size_t batches =
            cfg.batches_per_epoch ? std::min(cfg.batches_per_epoch, full_batches) : full_batches;

        double train_acc = 0.0;
        std::size_t train_elems = 0;
        bool finite = true;
        for (std::size_t bi = 0; bi < batches && finite; ++bi) {
            const std::size_t from = bi * cfg.batch_size;
            const std::size_t count = std::min(cfg.batch_size, order.size() - from);
            fill_batch(dataset, order, from, count, input, target);
            nn::ForwardTrace trace;
            const nn::Tensor pred = nn::forward(params, input, nn::Mode::train, &trace);
            const nn::MseResult loss = nn::mse_loss(pred, target);
            if (!std::isfinite(loss.loss)) {
                finite = false;
                break;
            }
            train_acc += loss.loss * static_cast<double>(pred.size());
            train_elems += pred.size();
            const nn::Gradients grads = nn::backward(params, trace, loss.grad);
            try {
                nn::adam_step(params, grads, adam, adam_cfg);
            } catch (const numeric_error &) {
                finite = false; // non-finite gradients; params were not touched
            }
        }
        if (!finite || !params_finite(params)) {
            std::fprintf(stderr, "train_corrector: divergence in epoch %zu, keeping last finite parameters\n",
                         epoch);
            result.aborted = true;
            result.params = best_epoch ? best : last_good;
            result.best_epoch = best_epoch ? best_epoch : epoch - 1;
            return result;
        }

        EpochStats stats;
        stats.train_mse = train_elems ? train_acc / static_cast<double>(train_elems) : 0.0;
        stats.val_mse = val_idx.empty() ? stats.train_mse : infer_mse(params, dataset, val_idx, cfg.batch_size);
        result.log.push_back(stats);
        last_good = params;

        if (stats.val_mse < best_val) {
            best_val = stats.val_mse;
            best = params;
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (cfg.patience && since_best >= cfg.patience)
                break;
        }
    }

    result.params = best;
    result.best_epoch = best_epoch;
    return result;
}

std::vector<cplx> predict(const nn::ModelParams &params, const std::vector<cplx> &h_rt, double scale_factor) {
    if (h_rt.empty())
        throw dimension_error("predict: empty realization");
    if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
        throw dimension_error("predict: scale factor must be positive and finite");
    const std::size_t p = h_rt.size();
    nn::Tensor input = nn::Tensor::zeros({1, 2, p});
    for (std::size_t i = 0; i < p; ++i) {
        input.data[i] = h_rt[i].real();
        input.data[p + i] = h_rt[i].imag();
    }
    const nn::Tensor out = nn::infer(params, input);
    if (out.size() != 2 * p)
        throw dimension_error("predict: model emits " + std::to_string(out.size()) + " values for " +
                              std::to_string(2 * p) + " tap components");
    std::vector<cplx> h_pred(p);
    for (std::size_t i = 0; i < p; ++i)
        h_pred[i] = scale_factor * cplx(out.data[i], out.data[p + i]);
    return h_pred;
}

CaseReport evaluate_cases(const Dataset &dataset, const nn::ModelParams &params) {
    dataset.validate();
    SplitIndices split = split_indices(dataset.meta);
    if (split.test.empty())
        throw state_error("evaluate_cases: test split is empty");

    const double f = dataset.meta.scale_factor;
    CaseReport report;
    double db1 = 0.0, db2 = 0.0, ratio1 = 0.0, ratio2 = 0.0;
    for (std::size_t idx : split.test) {
        const CirPair &pair = dataset.pairs[idx];
        double ref_energy = 0.0;
        for (const cplx &z : pair.h_real)
            ref_energy += std::norm(z);
        if (ref_energy == 0.0) {
            std::fprintf(stderr, "evaluate_cases: realization %zu has a zero truth CIR, skipped\n", idx);
            continue;
        }
        // Physical units: stored values times the scale factor. NMSE is
        // invariant to the common factor for case 1; case 2 needs it because
        // predict de-scales.
        std::vector<cplx> h_real(pair.h_real), h_rt(pair.h_rt);
        for (cplx &z : h_real)
            z *= f;
        for (cplx &z : h_rt)
            z *= f;
        const std::vector<cplx> h_pred = predict(params, pair.h_rt, f);

        const double c1 = nmse_db(h_real, h_rt);
        const double c2 = nmse_db(h_real, h_pred);
        db1 += c1;
        db2 += c2;
        double n1 = 0.0, n2 = 0.0, den = 0.0;
        for (std::size_t i = 0; i < h_real.size(); ++i) {
            n1 += std::norm(h_real[i] - h_rt[i]);
            n2 += std::norm(h_real[i] - h_pred[i]);
            den += std::norm(h_real[i]);
        }
        ratio1 += n1 / den;
        ratio2 += n2 / den;
        ++report.count;
    }
    if (report.count == 0)
        throw state_error("evaluate_cases: every test realization had a zero truth CIR");
    const double n = static_cast<double>(report.count);
    report.case1_db = db1 / n;
    report.case2_db = db2 / n;
    const auto ratio_db = [](double r) { return r <= 1e-10 ? -100.0 : 10.0 * std::log10(r); };
    report.case1_ratio_db = ratio_db(ratio1 / n);
    report.case2_ratio_db = ratio_db(ratio2 / n);
    return report;
}

} // namespace ctwin::twin
