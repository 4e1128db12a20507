#include "freqforge/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "freqforge/errors.hpp"

namespace freqforge::harness {

void TrainConfig::validate() const {
    if (!(lr > 0) || !(decay_factor > 0) || decay_every < 1) throw ConfigError("lr, decay factor and decay period must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0)) throw ConfigError("bad Adam moments/eps");
    if (batch < 2) throw ConfigError("batch size must be at least 2 (batch normalization)");
    if (epochs < 0 || max_steps < 0 || eval_batch < 1) throw ConfigError("epochs, max_steps and eval_batch must be non-negative");
    augment.validate();
}

double learning_rate(const TrainConfig& config, int epoch) {
    return config.lr * std::pow(config.decay_factor, epoch / config.decay_every);
}

void copy_state(const network::TripleStreamNet& src, network::TripleStreamNet& dst) {
    torch::NoGradGuard no_grad;
    auto sp = src->named_parameters(true), dp = dst->named_parameters(true);
    for (const auto& item : sp) dp[item.key()].copy_(item.value());
    auto sb = src->named_buffers(true), db = dst->named_buffers(true);
    for (const auto& item : sb) db[item.key()].copy_(item.value());
}

Scores score(network::TripleStreamNet& net, const torch::Tensor& images, const torch::Tensor& labels, int batch) {
    const bool was_training = net->is_training();
    net->eval();
    torch::NoGradGuard no_grad;
    Scores s;
    const int64_t n = images.size(0);
    s.margin.reserve(n);
    for (int64_t start = 0; start < n; start += batch) {
        const int64_t len = std::min<int64_t>(batch, n - start);
        auto logits = net->forward(images.narrow(0, start, len)).predictions.logits.to(torch::kFloat64);
        auto m = (logits.select(1, 1) - logits.select(1, 0)).contiguous();
        s.margin.insert(s.margin.end(), m.data_ptr<double>(), m.data_ptr<double>() + len);
    }
    s.p_fake.reserve(s.margin.size());
    for (double m : s.margin) s.p_fake.push_back(1.0 / (1.0 + std::exp(-m)));
    auto l = labels.to(torch::kLong).contiguous();
    for (int64_t i = 0; i < n; ++i) s.labels.push_back(static_cast<int>(l.data_ptr<int64_t>()[i]));
    net->train(was_training);
    return s;
}

MetricsReport evaluate(network::TripleStreamNet& net, const LabeledImages& data, const std::string& split, int batch) {
    return report_from_scores(score(net, data.images, data.labels, batch), split);
}

namespace {

miloss::LossRecord mean_of(const std::vector<miloss::LossRecord>& steps, std::size_t from) {
    miloss::LossRecord m{0, 0, 0, 0, 0, 0, 0};
    const std::size_t n = steps.size() - from;
    if (n == 0) return {};
    for (std::size_t i = from; i < steps.size(); ++i) {
        const auto& r = steps[i];
        m.l_ce += r.l_ce;
        m.l_d += r.l_d;
        m.l_gia += r.l_gia;
        m.l_total += r.l_total;
        m.ce_weight += r.ce_weight;
        m.alpha += r.alpha;
        m.beta += r.beta;
    }
    const double k = static_cast<double>(n);
    return {m.l_ce / k, m.l_d / k, m.l_gia / k, m.l_total / k, m.ce_weight / k, m.alpha / k, m.beta / k};
}

torch::Tensor gather_batch(const LabeledImages& data, std::span<const int64_t> idx, const TrainConfig& config, int epoch) {
    std::vector<torch::Tensor> items;
    items.reserve(idx.size());
    for (int64_t i : idx) {
        auto img = data.images[i];
        if (!config.augment.identity()) {
            auto rng = make_rng(config.seed, {0xA11CE, static_cast<uint64_t>(epoch), static_cast<uint64_t>(i)});
            img = augment(img, config.augment, rng);
        }
        items.push_back(img);
    }
    return torch::stack(items);
}

} // namespace

TrainResult train(const network::NetworkConfig& net_config, const TrainConfig& config, const LabeledImages& train_set,
                  const LabeledImages& val_set, const TrainHooks& hooks) {
    config.validate();
    if (train_set.size() < 2) throw InvalidInput("training split needs at least two images");
    TrainResult result;
    auto net = network::make_network(net_config, config.seed);
    result.model = network::make_network(net_config, config.seed);
    net->train();

    torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(config.lr)
                                                  .betas({config.beta1, config.beta2})
                                                  .eps(config.eps)
                                                  .weight_decay(0));
    const int64_t n = train_set.size();
    std::vector<int64_t> order(static_cast<std::size_t>(n));
    bool stop = false;
    double best = -1.0;

    for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
        const double lr = learning_rate(config, epoch);
        for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
        std::iota(order.begin(), order.end(), 0);
        auto shuffle_rng = make_rng(config.seed, {0x5EED, static_cast<uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        const std::size_t epoch_start = result.steps.size();
        for (int64_t start = 0, batch_index = 0; start < n; start += config.batch, ++batch_index) {
            const int64_t len = std::min<int64_t>(config.batch, n - start);
            if (len < 2) break; // batch normalization needs two samples
            std::span<const int64_t> idx(order.data() + start, static_cast<std::size_t>(len));
            auto images = gather_batch(train_set, idx, config, epoch);
            auto labels = train_set.labels.index_select(0, torch::tensor(std::vector<int64_t>(idx.begin(), idx.end())));

            opt.zero_grad();
            auto out = net->forward(images);
            if (!torch::isfinite(out.predictions.logits).all().item<bool>()) {
                std::ostringstream msg;
                msg << "non-finite logits at epoch " << epoch << ", batch " << batch_index << " (diverged parameters)";
                throw NanLossError(msg.str(), epoch, batch_index);
            }
            auto bundle = net->losses(out, labels);
            const auto rec = miloss::record(bundle);
            if (!std::isfinite(rec.l_total) || !std::isfinite(rec.l_ce) || !std::isfinite(rec.l_d) || !std::isfinite(rec.l_gia)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index << ": l_ce=" << rec.l_ce
                    << " l_d=" << rec.l_d << " l_gia=" << rec.l_gia << " l_total=" << rec.l_total;
                throw NanLossError(msg.str(), epoch, batch_index,
                                   {{"l_ce", rec.l_ce}, {"l_d", rec.l_d}, {"l_gia", rec.l_gia}, {"l_total", rec.l_total}});
            }
            bundle.l_total.backward();
            opt.step();
            result.steps.push_back(rec);
            if (config.max_steps > 0 && static_cast<int64_t>(result.steps.size()) >= config.max_steps) {
                stop = true;
                break;
            }
        }

        EpochRecord er;
        er.epoch = epoch;
        er.lr = lr;
        er.steps = static_cast<int64_t>(result.steps.size() - epoch_start);
        er.mean = mean_of(result.steps, epoch_start);
        if (val_set.size() > 0) {
            const auto scores = score(net, val_set.images, val_set.labels, config.eval_batch);
            for (double m : scores.margin) {
                if (!std::isfinite(m)) throw NanLossError("non-finite validation scores (diverged parameters)", epoch, -1);
            }
            const auto rep = report_from_scores(scores, "val");
            er.val_auc = rep.auc;
            er.val_acc = rep.acc;
        }
        const double key = er.val_auc.value_or(er.val_acc);
        const bool improved = key > best;
        if (improved) {
            best = key;
            result.best_epoch = epoch;
            result.best_val_auc = er.val_auc;
            copy_state(net, result.model);
        }
        result.history.push_back(er);
        if (hooks.log) {
            std::ostringstream line;
            line << "epoch " << epoch << " lr " << lr << " steps " << er.steps << " loss " << er.mean.l_total << " (ce "
                 << er.mean.l_ce << ", d " << er.mean.l_d << ", gia " << er.mean.l_gia << ") val_auc "
                 << (er.val_auc ? std::to_string(*er.val_auc) : "null") << " val_acc " << er.val_acc;
            hooks.log(line.str());
        }
        if (hooks.on_epoch) hooks.on_epoch(net, er, improved);
    }
    result.total_steps = static_cast<int64_t>(result.steps.size());
    result.model->eval();
    return result;
}

} // namespace freqforge::harness
