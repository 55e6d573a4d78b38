#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stlf/data/synth.hpp"
#include "stlf/train/experiment.hpp"

using namespace stlf;
using namespace stlf::train;

namespace {

struct Fixture {
	data::SyntheticPanel synth = data::synth_panel(6, 48 * 14, 2, 0.6, 3);
	data::SplitSpec spec = data::make_duration_split(synth.panel.timeline(), 8 * kDay, 3 * kDay, 3 * kDay);
};

models::ModelConfig gru_config() { return models::ModelConfig::make(models::ModelId::gru, {{"hidden", "4"}, {"window", "48"}}); }

TrainConfig quick(std::size_t epochs = 4) {
	TrainConfig c;
	c.learning_rate = 1e-2;
	c.batch_size = 16;
	c.max_epochs = epochs;
	c.patience = epochs - 1;
	c.n_trials = 2;
	c.max_batches_per_epoch = 4;
	return c;
}

} // namespace

TEST_CASE("adam fits a one-parameter regression", "[optimizer]") {
	nn::ParameterStore ps;
	ps.add("w", Matrix(1, 1, 0.0));
	Matrix x(32, 1), y(32, 1);
	for (std::size_t i = 0; i < 32; ++i) {
		x[i] = static_cast<double>(i) / 8.0 - 2.0;
		y[i] = 2.0 * x[i];
	}
	Adam opt(0.05);
	for (int step = 0; step < 600; ++step) {
		nn::Tape tape;
		nn::Context ctx(tape, ps, true);
		nn::Var loss = nn::mean_abs_error(nn::matmul(ctx.constant(x), ctx.param("w")), y);
		tape.backward(loss);
		opt.step(ps, ctx.gradients());
	}
	CHECK(ps.at("w")[0] == Catch::Approx(2.0).margin(0.05));
	CHECK(opt.steps() == 600);

	// the first step moves every coordinate by about lr against the gradient sign
	nn::ParameterStore p2;
	p2.add("v", Matrix{{1.0, -1.0}});
	Adam a(0.1);
	a.step(p2, {{"v", Matrix{{3.0, -0.001}}}});
	CHECK(p2.at("v")(0, 0) == Catch::Approx(0.9).margin(1e-6));
	CHECK(p2.at("v")(0, 1) == Catch::Approx(-0.9).margin(1e-4));
}

TEST_CASE("gradient clipping bounds the global norm", "[optimizer]") {
	Gradients g{{"a", Matrix{{3.0}}}, {"b", Matrix{{0.0, 4.0}}}};
	CHECK(global_norm(g) == Catch::Approx(5.0));
	CHECK(clip_global_norm(g, 2.5) == Catch::Approx(5.0));
	CHECK(global_norm(g) == Catch::Approx(2.5));
	CHECK(g["a"][0] == Catch::Approx(1.5));
	CHECK(clip_global_norm(g, 10.0) == Catch::Approx(2.5));
	CHECK(g["a"][0] == Catch::Approx(1.5));
}

TEST_CASE("training config is validated", "[trainer]") {
	TrainConfig c;
	c.patience = c.max_epochs;
	CHECK_THROWS_AS(c.validate(), DataError);
	c = TrainConfig{};
	c.learning_rate = 0.0;
	CHECK_THROWS_AS(c.validate(), DataError);
	c = TrainConfig{};
	c.batch_size = 0;
	CHECK_THROWS_AS(c.validate(), DataError);
}

TEST_CASE("early stopping keeps the best validation epoch", "[trainer]") {
	Fixture f;
	SplitData sd(f.synth.panel, f.spec);
	auto model = models::build(gru_config(), nullptr, 6, 1);
	auto& neural = *models::as_neural(model.get());
	TrainConfig cfg = quick(12);
	cfg.patience = 2;
	cfg.learning_rate = 0.05;
	const auto out = fit(neural, sd.train(48, "t"), sd.val(48, "t"), cfg, 1);
	REQUIRE_FALSE(out.failed);
	CHECK(out.best_epoch >= 1);
	CHECK(out.epochs_run <= 12);
	CHECK(out.history.size() == out.epochs_run);
	if (out.epochs_run < 12) CHECK(out.epochs_run == out.best_epoch + cfg.patience);
	double best = INFINITY;
	for (const auto& r : out.history) best = std::min(best, r.val_loss);
	CHECK(out.best_val_loss == best);
	CHECK(evaluate_loss(*model, sd.val(48, "t")) == out.best_val_loss);
}

TEST_CASE("training is deterministic for a seed", "[trainer]") {
	Fixture f;
	SplitData sd(f.synth.panel, f.spec);
	auto a = models::build(gru_config(), nullptr, 6, 4);
	auto b = models::build(gru_config(), nullptr, 6, 4);
	const auto oa = fit(*models::as_neural(a.get()), sd.train(48, "t"), sd.val(48, "t"), quick(), 4);
	const auto ob = fit(*models::as_neural(b.get()), sd.train(48, "t"), sd.val(48, "t"), quick(), 4);
	CHECK(oa.best_val_loss == ob.best_val_loss);
	CHECK(models::as_neural(a.get())->parameters() == models::as_neural(b.get())->parameters());
}

TEST_CASE("trials use consecutive seeds and ignore the worker count", "[trials]") {
	Fixture f;
	SplitData sd(f.synth.panel, f.spec);
	TrainConfig cfg = quick();
	cfg.n_trials = 3;
	cfg.base_seed = 10;
	const auto one = run_trials(gru_config(), nullptr, sd, cfg, 1);
	const auto many = run_trials(gru_config(), nullptr, sd, cfg, 3);
	REQUIRE(one.trials.size() == 3);
	for (std::size_t i = 0; i < 3; ++i) {
		CHECK(one.trials[i].seed == 10 + i);
		CHECK(one.trials[i].residential.mae == many.trials[i].residential.mae);
		CHECK(one.trials[i].forecast.values == many.trials[i].forecast.values);
	}
	CHECK(one.trials[0].residential.mae != one.trials[1].residential.mae);
	const auto s = one.summary(eval::Level::residential, eval::Metric::mae);
	CHECK(s.find('(') != std::string::npos);
	CHECK(s.back() == ')');
}

TEST_CASE("benchmarks without parameters score on the test windows", "[trials]") {
	Fixture f;
	SplitData sd(f.synth.panel, f.spec);
	TrainConfig cfg = quick();
	cfg.n_trials = 1;
	const auto naive = run_trials(models::ModelConfig::make(models::ModelId::seasonal_naive, {{"window", "48"}}), nullptr, sd, cfg);
	const auto& t = naive.trials[0];
	CHECK(t.truth.values.rows() == 6);
	CHECK(t.truth.values.cols() == 2 * 48); // non-overlapping day-ahead test windows
	CHECK(t.residential.mae == Catch::Approx(eval::mae(t.truth.values, t.forecast.values)));
	const auto var = run_trials(models::ModelConfig::make(models::ModelId::var, {{"window", "4"}, {"order", "2"}}), nullptr, sd, cfg);
	CHECK(std::isfinite(var.trials[0].residential.mae));
}

TEST_CASE("tuning never reads the test partition", "[tune]") {
	Fixture f;
	auto audit = std::make_shared<AuditLog>();
	SplitData sd(f.synth.panel, f.spec, data::kDayAheadSteps, audit);
	TuneGrid grid;
	grid.learning_rates = {1e-2, 1e-3};
	grid.windows = {24, 48};
	const auto r = tune(gru_config(), nullptr, sd, grid, quick(3), 0);
	CHECK(r.candidates.size() == 4);
	CHECK(r.train.batch_size == quick().batch_size);
	CHECK(audit->touched("train", "tune"));
	CHECK(audit->touched("val", "tune"));
	CHECK_FALSE(audit->touched("test"));
	double best = INFINITY;
	for (const auto& c : r.candidates) best = std::min(best, c.val_loss);
	CHECK(r.candidates[r.best].val_loss == best);

	run_trials(r.config, nullptr, sd, r.train);
	CHECK(audit->touched("test", "trial"));
	CHECK_FALSE(audit->touched("test", "tune"));
}

TEST_CASE("signal graphs ignore everything after training", "[graphs]") {
	Fixture f;
	Matrix v = f.synth.panel.values();
	const std::size_t cut = f.synth.panel.timeline().lower_index(f.spec.train_end);
	for (std::size_t i = 0; i < v.rows(); ++i)
		for (std::size_t t = cut; t < v.cols(); ++t) v(i, t) = 1000.0 + static_cast<double>((i * 7 + t) % 13);
	const data::LoadPanel changed(v, f.synth.panel.node_ids(), f.synth.panel.timeline());
	const auto src = models::GraphSource::parse("signal:pearson");
	const auto rule = graph::parse_rule("knn:2");
	CHECK(*graph_for(src, f.synth.panel, f.spec, rule) == *graph_for(src, changed, f.spec, rule));
	CHECK_FALSE(graph_for(models::GraphSource::parse("learnable"), f.synth.panel, f.spec, rule).has_value());
	CHECK(graph_for(models::GraphSource::parse("bipartite:3"), f.synth.panel, f.spec, rule)->virtual_nodes() == 3);
	CHECK_THROWS_AS(graph_for(models::GraphSource::parse("signal:planted"), f.synth.panel, f.spec, rule), DataError);
}
