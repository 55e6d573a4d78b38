#pragma once

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlf/core/error.hpp"
#include "stlf/core/random.hpp"
#include "stlf/data/window.hpp"
#include "stlf/models/neural.hpp"
#include "stlf/train/optimizer.hpp"

namespace stlf::train {

struct TrainConfig {
	double learning_rate = 1e-3;
	std::size_t batch_size = 32;
	std::size_t max_epochs = 300;
	std::size_t patience = 15;
	std::size_t n_trials = 5;
	std::uint64_t base_seed = 0;
	bool clip_gradients = true;
	double clip_norm = 5.0;
	/// Minibatches drawn per epoch; 0 uses every training window once.
	std::size_t max_batches_per_epoch = 0;

	void validate() const {
		if (!(learning_rate > 0.0)) throw DataError("training: learning_rate must be positive");
		if (batch_size < 1) throw DataError("training: batch_size must be >= 1");
		if (max_epochs < 1) throw DataError("training: max_epochs must be >= 1");
		if (patience >= max_epochs) throw DataError("training: patience must be smaller than max_epochs");
		if (n_trials < 1) throw DataError("training: n_trials must be >= 1");
		if (clip_gradients && !(clip_norm > 0.0)) throw DataError("training: clip_norm must be positive");
	}
};

struct EpochRecord {
	std::size_t epoch = 0;
	double train_loss = 0.0;
	double val_loss = 0.0;
	double lr = 0.0;
	double time = 0.0; // seconds since the start of training
};

inline nlohmann::json to_json(const EpochRecord& r) {
	return {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.lr}, {"time", r.time}};
}

struct TrainOutcome {
	bool failed = false;
	std::string failure;
	double best_val_loss = INFINITY;
	std::size_t best_epoch = 0;
	std::size_t epochs_run = 0;
	double wall_time = 0.0;
	std::vector<EpochRecord> history;
};

/// Mean absolute error in scaled space over every element of `batch`.
inline double evaluate_loss(const models::ForecastModel& model, const data::WindowBatch& batch, std::size_t chunk = 256) {
	if (batch.empty()) throw DataError("evaluate: empty partition");
	double total = 0.0;
	std::size_t count = 0;
	for (std::size_t start = 0; start < batch.size(); start += chunk) {
		std::vector<std::size_t> idx(std::min(chunk, batch.size() - start));
		std::iota(idx.begin(), idx.end(), start);
		const auto part = batch.subset(idx);
		const Tensor3 pred = model.forecast(part.inputs);
		for (std::size_t i = 0; i < pred.data.size(); ++i) total += std::abs(pred.data[i] - part.targets.data[i]);
		count += pred.data.size();
	}
	return total / static_cast<double>(count);
}

/// Adam on the MAE loss with early stopping on validation MAE. On return the
/// model holds the parameters of the best validation epoch.
inline TrainOutcome fit(models::NeuralModel& model, const data::WindowBatch& train, const data::WindowBatch& val,
                        const TrainConfig& cfg, std::uint64_t seed, std::ostream* log = nullptr) {
	cfg.validate();
	if (train.empty() || val.empty()) throw DataError("training: empty training or validation partition");
	using clock = std::chrono::steady_clock;
	const auto t0 = clock::now();
	auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

	Rng shuffle_rng(seed ^ 0x5eed5eedULL), dropout_rng(seed ^ 0xd509ULL);
	Adam opt(cfg.learning_rate);
	nn::ParameterStore best = model.parameters();
	TrainOutcome out;
	std::size_t since_best = 0;

	for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
		std::vector<std::size_t> order = shuffle_rng.permutation(train.size());
		std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
		if (cfg.max_batches_per_epoch) n_batches = std::min(n_batches, cfg.max_batches_per_epoch);
		double loss_sum = 0.0;
		for (std::size_t b = 0; b < n_batches; ++b) {
			const std::size_t lo = b * cfg.batch_size, hi = std::min(order.size(), lo + cfg.batch_size);
			const auto batch = train.subset(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(lo),
			                                                         order.begin() + static_cast<std::ptrdiff_t>(hi)));
			nn::Tape tape;
			nn::Context ctx(tape, model.parameters(), true);
			nn::Var pred = model.forward(ctx, batch.inputs, &dropout_rng);
			nn::Var loss = nn::mean_abs_error(pred, batch.targets.as_matrix());
			const double value = loss.value()[0];
			if (!std::isfinite(value)) {
				out.failed = true;
				out.failure = "loss became non-finite at epoch " + std::to_string(epoch);
				break;
			}
			tape.backward(loss);
			Gradients grads = ctx.gradients();
			const double norm = global_norm(grads);
			if (!std::isfinite(norm)) {
				out.failed = true;
				out.failure = "gradient became non-finite at epoch " + std::to_string(epoch);
				break;
			}
			if (cfg.clip_gradients) clip_global_norm(grads, cfg.clip_norm);
			opt.step(model.parameters(), grads);
			loss_sum += value;
		}
		if (out.failed) break;

		double val_loss = NAN;
		try {
			val_loss = evaluate_loss(model, val);
		} catch (const InternalError&) {
			// non-finite forecast, reported below
		}
		out.epochs_run = epoch;
		EpochRecord rec{epoch, loss_sum / static_cast<double>(n_batches), val_loss, cfg.learning_rate, elapsed()};
		out.history.push_back(rec);
		if (log) *log << to_json(rec).dump() << '\n';
		if (!std::isfinite(val_loss)) {
			out.failed = true;
			out.failure = "validation loss became non-finite at epoch " + std::to_string(epoch);
			break;
		}
		if (val_loss < out.best_val_loss) {
			out.best_val_loss = val_loss;
			out.best_epoch = epoch;
			best = model.parameters();
			since_best = 0;
		} else if (++since_best >= cfg.patience) {
			break;
		}
	}
	model.parameters() = best;
	out.wall_time = elapsed();
	return out;
}

} // namespace stlf::train
