#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qs/errors.hpp"
#include "qs/masked_net.hpp"
#include "qs/rng.hpp"

namespace qs::net {

namespace {

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed, int epoch) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed({seed, 0x455048ULL /*"EPH"*/, static_cast<uint64_t>(epoch)}));
    rng.shuffle(idx);
    return idx;
}

void check_dataset(const Dataset& d, int t_step, const char* what) {
    if (d.inputs.size() != d.outputs.size())
        throw Error(ErrorClass::Shape, std::string(what) + ": inputs/outputs size mismatch");
    for (const auto& in : d.inputs)
        if (in.channels != 1 || in.t_len != t_step)
            throw Error(ErrorClass::Shape, std::string(what) + ": bad input shape");
}

std::vector<const Signal*> gather(const std::vector<Signal>& pool,
                                  const std::vector<size_t>& order, size_t start,
                                  size_t stop) {
    std::vector<const Signal*> out;
    out.reserve(stop - start);
    for (size_t i = start; i < stop; ++i) out.push_back(&pool[order[i]]);
    return out;
}

std::vector<const Signal*> pointers(const std::vector<Signal>& pool) {
    std::vector<const Signal*> out;
    out.reserve(pool.size());
    for (const auto& s : pool) out.push_back(&s);
    return out;
}

} // namespace

std::vector<Signal> predict_source(const MaskedNetwork& net,
                                   const std::vector<Signal>& inputs, int chunk) {
    std::vector<Signal> preds;
    preds.reserve(inputs.size());
    for (size_t start = 0; start < inputs.size(); start += static_cast<size_t>(chunk)) {
        size_t stop = std::min(inputs.size(), start + static_cast<size_t>(chunk));
        std::vector<const Signal*> ptrs;
        for (size_t i = start; i < stop; ++i) ptrs.push_back(&inputs[i]);
        auto out = from_planes(net.forward_source_b(to_planes(ptrs)));
        for (auto& s : out) preds.push_back(std::move(s));
    }
    return preds;
}

std::vector<Signal> predict_target(const MaskedNetwork& net,
                                   const std::vector<Signal>& inputs, int chunk) {
    std::vector<Signal> preds;
    preds.reserve(inputs.size());
    for (size_t start = 0; start < inputs.size(); start += static_cast<size_t>(chunk)) {
        size_t stop = std::min(inputs.size(), start + static_cast<size_t>(chunk));
        std::vector<const Signal*> ptrs;
        for (size_t i = start; i < stop; ++i) ptrs.push_back(&inputs[i]);
        auto out = from_planes(net.forward_target_b(to_planes(ptrs)));
        for (auto& s : out) preds.push_back(std::move(s));
    }
    return preds;
}

TrainCurves train_source(MaskedNetwork& net, Adam& adam, const Dataset& train,
                         const Dataset& val, const SourceTrainConfig& cfg) {
    if (net.has_head())
        throw Error(ErrorClass::State, "train_source: network already has a transfer head");
    check_dataset(train, net.config().t_step, "train_source");
    check_dataset(val, net.config().t_step, "train_source(val)");
    if (train.inputs.empty())
        throw Error(ErrorClass::Config, "train_source: empty training set");
    const int batch_size = std::max(1, cfg.batch);

    TrainCurves curves;
    curves.train.reserve(static_cast<size_t>(cfg.epochs));
    curves.val.reserve(static_cast<size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = shuffled_indices(train.inputs.size(), cfg.seed, epoch);
        double epoch_loss = 0.0;
        size_t counted = 0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(batch_size));

            auto x_planes = to_planes(gather(train.inputs, order, start, stop));
            MaskedNetwork::BatchTrace trace;
            auto preds = from_planes(net.forward_source_b(x_planes, &trace));
            std::vector<Signal> truths;
            truths.reserve(stop - start);
            for (size_t i = start; i < stop; ++i) truths.push_back(train.outputs[order[i]]);

            std::vector<Signal> grads;
            double loss = source_loss(preds, truths, epoch, cfg.loss, &grads);
            if (!std::isfinite(loss))
                throw Error(ErrorClass::Training,
                            "train_source: loss diverged at epoch " + std::to_string(epoch));
            net.backward_source_b(trace, to_planes(pointers(grads)));
            adam.step();

            epoch_loss += loss * static_cast<double>(stop - start);
            counted += stop - start;
        }
        curves.train.push_back(epoch_loss / static_cast<double>(counted));

        if (!val.inputs.empty()) {
            auto preds = predict_source(net, val.inputs, batch_size);
            curves.val.push_back(source_loss(preds, val.outputs, epoch, cfg.loss));
        } else {
            curves.val.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return curves;
}

TrainCurves train_target(MaskedNetwork& net, Adam& adam, const Dataset& train,
                         const Dataset& holdout, const TargetTrainConfig& cfg) {
    if (!net.has_head())
        throw Error(ErrorClass::State, "train_target: no transfer head attached");
    check_dataset(train, net.config().t_step, "train_target");
    check_dataset(holdout, net.config().t_step, "train_target(holdout)");
    if (train.inputs.empty())
        throw Error(ErrorClass::Config, "train_target: empty training set");
    const int batch_size = std::max(1, cfg.batch);

    // Backbone is frozen; compute its features once per motion.
    auto feat_train = predict_source(net, train.inputs, batch_size);
    auto feat_holdout = predict_source(net, holdout.inputs, batch_size);

    auto snapshot_head = [&]() {
        std::vector<std::vector<double>> snap;
        snap.push_back(net.conv()->weights.value);
        snap.push_back(net.conv()->bias.value);
        for (auto& h : net.floor_heads()) {
            snap.push_back(h.weights.value);
            snap.push_back(h.bias.value);
        }
        return snap;
    };
    auto restore_head = [&](const std::vector<std::vector<double>>& snap) {
        size_t i = 0;
        net.conv()->weights.value = snap[i++];
        net.conv()->bias.value = snap[i++];
        for (auto& h : net.floor_heads()) {
            h.weights.value = snap[i++];
            h.bias.value = snap[i++];
        }
    };
    auto head_predict = [&](const std::vector<Signal>& feats) {
        std::vector<Signal> preds;
        preds.reserve(feats.size());
        for (size_t start = 0; start < feats.size(); start += static_cast<size_t>(batch_size)) {
            size_t stop = std::min(feats.size(), start + static_cast<size_t>(batch_size));
            std::vector<const Signal*> ptrs;
            for (size_t i = start; i < stop; ++i) ptrs.push_back(&feats[i]);
            auto out = from_planes(net.forward_head_b(to_planes(ptrs)));
            for (auto& s : out) preds.push_back(std::move(s));
        }
        return preds;
    };

    TrainCurves curves;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_snap;
    int best_epoch = -1;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        auto order = shuffled_indices(train.inputs.size(), cfg.seed, epoch);
        double epoch_loss = 0.0;
        size_t counted = 0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(batch_size));

            auto feat_planes = to_planes(gather(feat_train, order, start, stop));
            MaskedNetwork::BatchTrace trace;
            auto preds = from_planes(net.forward_head_b(feat_planes, &trace));
            std::vector<Signal> truths;
            truths.reserve(stop - start);
            for (size_t i = start; i < stop; ++i) truths.push_back(train.outputs[order[i]]);

            std::vector<Signal> grads;
            double loss = target_loss(preds, truths, cfg.huber_delta, &grads);
            if (!std::isfinite(loss))
                throw Error(ErrorClass::Training,
                            "train_target: loss diverged at epoch " + std::to_string(epoch));
            net.backward_head_b(feat_planes, trace, to_planes(pointers(grads)));
            adam.step();

            epoch_loss += loss * static_cast<double>(stop - start);
            counted += stop - start;
        }
        curves.train.push_back(epoch_loss / static_cast<double>(counted));

        if (!holdout.inputs.empty()) {
            auto preds = head_predict(feat_holdout);
            double vloss = target_loss(preds, holdout.outputs, cfg.huber_delta);
            curves.val.push_back(vloss);
            if (vloss < best_val) {
                best_val = vloss;
                best_epoch = epoch;
                best_snap = snapshot_head();
            }
            if (epoch - best_epoch >= cfg.patience) break;
        } else {
            curves.val.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }

    if (best_epoch >= 0) {
        restore_head(best_snap);
        curves.best_epoch = best_epoch;
    }
    return curves;
}

} // namespace qs::net
