#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fruitnet/dataset.hpp"
#include "fruitnet/network.hpp"
#include "fruitnet/optim.hpp"

namespace fruitnet {

// Numerical failure (non-finite loss or gradient); the CLI maps this to its
// own exit code, distinct from usage errors.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int epochs = 15;
    std::size_t batch_size = 15;
    double eta = 0.002;
    std::uint64_t seed = 0;
    bool deterministic = true;
    double lr_factor = 0.5;
    int lr_patience = 3;
    double min_lr = 1e-5;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0;
    double train_acc = 0;
    double test_loss = 0;
    double test_acc = 0;
    double eta = 0;
    double seconds = 0;
};

using TrainHistory = std::vector<EpochStats>;

// A resumable training run: network, optimizer states (aligned with
// parameters(net)), schedule state, current rate and completed epochs.
template <class T>
struct Session {
    using value_type = T;
    Network<T> net;
    std::vector<AdamState<T>> opt;
    PlateauSchedule sched;
    double eta = 0.002;
    int epoch = 0;
};

template <class T>
Session<T> make_session(Network<T> net, const TrainConfig& cfg) {
    Session<T> s;
    s.net = std::move(net);
    s.eta = cfg.eta;
    s.sched.factor = cfg.lr_factor;
    s.sched.patience = cfg.lr_patience;
    s.sched.min_lr = cfg.min_lr;
    for (const auto& p : parameters(s.net))
        s.opt.emplace_back(p.value->shape(), cfg.eta);
    return s;
}

struct EvalResult {
    double loss = 0;
    double accuracy = 0;
};

// Eval-mode pass over the whole dataset in its stored order: mean
// cross-entropy and top-1 accuracy.
template <class T>
EvalResult evaluate(const Network<T>& net, const Dataset& ds, std::size_t batch_size = 32) {
    if (ds.size() == 0) throw std::invalid_argument("evaluate: dataset is empty");
    if (ds.num_classes() != net.spec.num_classes)
        throw std::invalid_argument("evaluate: dataset has " +
                                    std::to_string(ds.num_classes()) + " classes, network " +
                                    std::to_string(net.spec.num_classes));
    Prng unused(0);
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double total_loss = 0;
    std::size_t correct = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
        const std::size_t count = std::min(batch_size, order.size() - pos);
        auto batch = assemble_batch<T>(ds, order, pos, count);
        auto fwd = forward_full(net, batch.x, Mode::eval, unused);
        total_loss += cross_entropy(fwd.probs, batch.y) * static_cast<double>(count);
        for (std::size_t n = 0; n < count; ++n) {
            std::size_t am = 0;
            for (std::size_t j = 1; j < net.spec.num_classes; ++j)
                if (fwd.probs.at(n, j) > fwd.probs.at(n, am)) am = j;
            if (static_cast<int>(am) == batch.labels[n]) ++correct;
        }
    }
    return {total_loss / static_cast<double>(ds.size()),
            static_cast<double>(correct) / static_cast<double>(ds.size())};
}

// Runs epochs session.epoch+1 .. cfg.epochs: shuffle, forward in train mode,
// cross-entropy, backward, one adam step per parameter tensor; then a full
// eval-mode pass over both sets, one history row, and the plateau rule.
// All randomness is derived from (cfg.seed, epoch), so a resumed session
// replays exactly. In deterministic mode the wall-clock column is recorded
// as 0 so run artifacts are byte-reproducible.
template <class T>
TrainHistory train(Session<T>& session, const Dataset& train_ds, const Dataset& test_ds,
                   const TrainConfig& cfg,
                   const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (train_ds.size() == 0 || test_ds.size() == 0)
        throw std::invalid_argument("train: empty dataset");
    if (train_ds.num_classes() != session.net.spec.num_classes)
        throw std::invalid_argument("train: dataset/network class count mismatch");

    auto params = parameters(session.net);
    if (params.size() != session.opt.size())
        throw std::invalid_argument("train: optimizer state does not match parameters");

    TrainHistory history;
    for (int epoch = session.epoch + 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double eta_used = session.eta;
        for (auto& st : session.opt) st.eta = eta_used;

        Prng dropout_prng =
            derive_stream(cfg.seed, static_cast<std::uint64_t>(epoch), Stream::dropout);
        BatchIter<T> batches(train_ds, cfg.batch_size, static_cast<std::uint64_t>(epoch),
                             cfg.seed);
        std::size_t batch_no = 0;
        while (auto batch = batches.next()) {
            ++batch_no;
            auto fwd = forward_full(session.net, batch->x, Mode::train, dropout_prng);
            for (std::size_t i = 0; i < fwd.logits.size(); ++i)
                if (!std::isfinite(static_cast<double>(fwd.logits[i])))
                    throw NumericError("non-finite logits at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_no));
            const double loss = cross_entropy(fwd.probs, batch->y);
            if (!std::isfinite(loss))
                throw NumericError("training loss is not finite at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_no));
            auto grad_logits = softmax_xent_grad(fwd.logits, batch->y);
            auto back = backward_full(session.net, fwd.caches, grad_logits);
            try {
                for (std::size_t i = 0; i < params.size(); ++i)
                    adam_step(session.opt[i], *params[i].value, back.param_grads[i],
                              params[i].name);
            } catch (const std::runtime_error& e) {
                throw NumericError(std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_no));
            }
        }

        EpochStats row;
        row.epoch = epoch;
        EvalResult train_eval, test_eval;
        try {
            train_eval = evaluate(session.net, train_ds);
            test_eval = evaluate(session.net, test_ds);
        } catch (const std::invalid_argument& e) {
            // a diverged net produces NaN probabilities, which the loss rejects
            throw NumericError(std::string(e.what()) + " during evaluation at epoch " +
                               std::to_string(epoch));
        }
        if (!std::isfinite(train_eval.loss) || !std::isfinite(test_eval.loss))
            throw NumericError("non-finite evaluation loss at epoch " + std::to_string(epoch));
        row.train_loss = train_eval.loss;
        row.train_acc = train_eval.accuracy;
        row.test_loss = test_eval.loss;
        row.test_acc = test_eval.accuracy;
        row.eta = eta_used;
        const auto t1 = std::chrono::steady_clock::now();
        row.seconds = cfg.deterministic ? 0.0 : std::chrono::duration<double>(t1 - t0).count();

        session.eta = lr_on_epoch_end(session.sched, session.eta, row.test_acc);
        session.epoch = epoch;
        history.push_back(row);
        if (on_epoch) on_epoch(row);
    }
    return history;
}

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double worst = 0;
};

// Compares analytic parameter gradients against central finite differences
// of the cross-entropy loss on one batch. Dropout masks are pinned by
// restarting the same prng stream for every evaluation, so the loss is a
// deterministic function of the parameters. Samples >= `samples_per_tensor`
// coordinates per tensor (corners, extremes, then random draws); relative
// error is guarded with a small denominator floor so near-zero gradients do
// not amplify finite-difference noise.
template <class T>
GradCheckReport gradient_check(Network<T>& net, const Batch<T>& batch, double eps = 1e-5,
                               std::size_t samples_per_tensor = 50) {
    static_assert(std::is_same_v<T, double>,
                  "gradient_check requires double precision tensors");
    if (eps <= 0) throw std::invalid_argument("gradient_check: eps must be positive");

    const std::uint64_t mask_seed = 0x6D61736B5F666978ULL;
    auto loss_fn = [&] {
        Prng prng(mask_seed);
        auto fwd = forward_full(net, batch.x, Mode::train, prng);
        return cross_entropy(fwd.probs, batch.y);
    };

    Prng mask_prng(mask_seed);
    auto fwd = forward_full(net, batch.x, Mode::train, mask_prng);
    auto grad_logits = softmax_xent_grad(fwd.logits, batch.y);
    auto back = backward_full(net, fwd.caches, grad_logits);

    auto params = parameters(net);
    GradCheckReport report;
    Prng pick(0xC0117EC7ULL);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<T>& w = *params[pi].value;
        const Tensor<T>& analytic = back.param_grads[pi];

        std::vector<std::size_t> coords;
        if (w.size() <= samples_per_tensor) {
            for (std::size_t i = 0; i < w.size(); ++i) coords.push_back(i);
        } else {
            coords.push_back(0);
            coords.push_back(w.size() - 1);
            std::size_t lo = 0, hi = 0;
            for (std::size_t i = 1; i < w.size(); ++i) {
                if (std::abs(w[i]) > std::abs(w[hi])) hi = i;
                if (std::abs(w[i]) < std::abs(w[lo])) lo = i;
            }
            coords.push_back(lo);
            coords.push_back(hi);
            while (coords.size() < samples_per_tensor)
                coords.push_back(pick.next_below(w.size()));
        }

        GradCheckEntry entry{params[pi].name, 0.0};
        for (std::size_t i : coords) {
            const T saved = w[i];
            w[i] = saved + static_cast<T>(eps);
            const double lp = loss_fn();
            w[i] = saved - static_cast<T>(eps);
            const double lm = loss_fn();
            w[i] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double a = static_cast<double>(analytic[i]);
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.worst = std::max(report.worst, entry.max_rel_err);
        report.per_param.push_back(std::move(entry));
    }
    return report;
}

}  // namespace fruitnet
