#pragma once

#include <cmath>
#include <map>
#include <string>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/nn/params.hpp"

namespace stlf::train {

using Gradients = std::map<std::string, Matrix>;

inline double global_norm(const Gradients& grads) {
	double s = 0.0;
	for (const auto& [_, g] : grads) s += g.squared_norm();
	return std::sqrt(s);
}

/// Rescales all gradients so their joint norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_global_norm(Gradients& grads, double max_norm) {
	const double norm = global_norm(grads);
	if (norm > max_norm && norm > 0.0) {
		const double f = max_norm / norm;
		for (auto& [_, g] : grads) g *= f;
	}
	return norm;
}

class Adam {
public:
	explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
	    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
		if (!(lr > 0.0)) throw DataError("learning rate must be positive");
	}

	double learning_rate() const { return lr_; }
	std::size_t steps() const { return t_; }

	void step(nn::ParameterStore& params, const Gradients& grads) {
		++t_;
		const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
		const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
		for (const auto& [name, g] : grads) {
			Matrix& p = params.at(name);
			if (g.rows() != p.rows() || g.cols() != p.cols()) throw ShapeError("adam: gradient shape mismatch for " + name);
			auto [mit, m_new] = m_.try_emplace(name, p.rows(), p.cols());
			auto [vit, v_new] = v_.try_emplace(name, p.rows(), p.cols());
			Matrix& m = mit->second;
			Matrix& v = vit->second;
			for (std::size_t i = 0; i < p.size(); ++i) {
				m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
				v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
				p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
			}
		}
	}

private:
	double lr_, beta1_, beta2_, eps_;
	std::size_t t_ = 0;
	std::map<std::string, Matrix> m_, v_;
};

} // namespace stlf::train
