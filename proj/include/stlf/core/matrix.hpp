#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "stlf/core/error.hpp"

namespace stlf {

/// Dense row-major matrix of doubles.
///
/// Products accumulate every output entry over the inner dimension in index
/// order, independently of the entry's row position, so permuting the rows of
/// the left operand permutes the result bit-for-bit.
class Matrix {
public:
	Matrix() = default;
	Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
	Matrix(std::initializer_list<std::initializer_list<double>> init) {
		rows_ = init.size();
		cols_ = rows_ ? init.begin()->size() : 0;
		data_.reserve(rows_ * cols_);
		for (const auto& row : init) {
			if (row.size() != cols_) throw ShapeError("ragged matrix initializer");
			data_.insert(data_.end(), row.begin(), row.end());
		}
	}

	static Matrix identity(std::size_t n) {
		Matrix m(n, n);
		for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
		return m;
	}
	static Matrix column(std::span<const double> v) {
		Matrix m(v.size(), 1);
		std::copy(v.begin(), v.end(), m.data_.begin());
		return m;
	}

	std::size_t rows() const { return rows_; }
	std::size_t cols() const { return cols_; }
	std::size_t size() const { return data_.size(); }
	bool empty() const { return data_.empty(); }

	double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
	double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
	double& operator[](std::size_t i) { return data_[i]; }
	double operator[](std::size_t i) const { return data_[i]; }

	std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
	std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

	double* data() { return data_.data(); }
	const double* data() const { return data_.data(); }
	std::vector<double>& storage() { return data_; }
	const std::vector<double>& storage() const { return data_; }

	bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
	std::string shape_str() const { return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]"; }

	void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

	Matrix transpose() const {
		Matrix t(cols_, rows_);
		for (std::size_t r = 0; r < rows_; ++r)
			for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
		return t;
	}

	Matrix& operator+=(const Matrix& o) {
		require_same(o, "+=");
		for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
		return *this;
	}
	Matrix& operator-=(const Matrix& o) {
		require_same(o, "-=");
		for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
		return *this;
	}
	Matrix& operator*=(double s) {
		for (auto& v : data_) v *= s;
		return *this;
	}

	double squared_norm() const {
		double s = 0.0;
		for (double v : data_) s += v * v;
		return s;
	}
	double max_abs() const {
		double m = 0.0;
		for (double v : data_) m = std::max(m, std::abs(v));
		return m;
	}
	bool all_finite() const {
		return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
	}

	bool operator==(const Matrix&) const = default;

private:
	void require_same(const Matrix& o, const char* op) const {
		if (!same_shape(o)) throw ShapeError(std::string("matrix ") + op + ": " + shape_str() + " vs " + o.shape_str());
	}

	std::size_t rows_ = 0;
	std::size_t cols_ = 0;
	std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }

/// out += a * b
inline void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
	if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols())
		throw ShapeError("matmul: " + a.shape_str() + " x " + b.shape_str() + " -> " + out.shape_str());
	const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
	for (std::size_t i = 0; i < n; ++i) {
		double* o = out.data() + i * m;
		const double* ai = a.data() + i * k;
		for (std::size_t p = 0; p < k; ++p) {
			const double av = ai[p];
			const double* bp = b.data() + p * m;
			for (std::size_t j = 0; j < m; ++j) o[j] += av * bp[j];
		}
	}
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
	Matrix out(a.rows(), b.cols());
	matmul_accumulate(a, b, out);
	return out;
}

/// out += a^T * b
inline void matmul_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
	if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols())
		throw ShapeError("matmul_tn: " + a.shape_str() + "^T x " + b.shape_str());
	const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
	for (std::size_t r = 0; r < n; ++r) {
		const double* ar = a.data() + r * k;
		const double* br = b.data() + r * m;
		for (std::size_t p = 0; p < k; ++p) {
			const double av = ar[p];
			double* o = out.data() + p * m;
			for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
		}
	}
}

/// out += a * b^T
inline void matmul_nt_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
	if (a.cols() != b.cols() || out.rows() != a.rows() || out.cols() != b.rows())
		throw ShapeError("matmul_nt: " + a.shape_str() + " x " + b.shape_str() + "^T");
	matmul_accumulate(a, b.transpose(), out);
}

/// Batch x nodes x length array, row-major in (batch, node, step).
struct Tensor3 {
	std::size_t batch = 0;
	std::size_t nodes = 0;
	std::size_t length = 0;
	std::vector<double> data;

	Tensor3() = default;
	Tensor3(std::size_t b, std::size_t n, std::size_t l, double fill = 0.0)
	    : batch(b), nodes(n), length(l), data(b * n * l, fill) {}

	double& operator()(std::size_t b, std::size_t n, std::size_t l) { return data[(b * nodes + n) * length + l]; }
	double operator()(std::size_t b, std::size_t n, std::size_t l) const { return data[(b * nodes + n) * length + l]; }

	std::span<const double> series(std::size_t b, std::size_t n) const { return {data.data() + (b * nodes + n) * length, length}; }
	std::span<double> series(std::size_t b, std::size_t n) { return {data.data() + (b * nodes + n) * length, length}; }

	/// Rows (b*nodes + n), columns = steps.
	Matrix as_matrix() const {
		Matrix m(batch * nodes, length);
		std::copy(data.begin(), data.end(), m.data());
		return m;
	}
	static Tensor3 from_matrix(const Matrix& m, std::size_t batch, std::size_t nodes) {
		if (m.rows() != batch * nodes) throw ShapeError("Tensor3::from_matrix: row count mismatch " + m.shape_str());
		Tensor3 t(batch, nodes, m.cols());
		std::copy(m.data(), m.data() + m.size(), t.data.begin());
		return t;
	}
	/// Column `step` as a (batch*nodes) x 1 matrix.
	Matrix step(std::size_t l) const {
		Matrix m(batch * nodes, 1);
		for (std::size_t r = 0; r < batch * nodes; ++r) m[r] = data[r * length + l];
		return m;
	}
	bool all_finite() const {
		return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
	}
	std::string shape_str() const {
		return "[" + std::to_string(batch) + "x" + std::to_string(nodes) + "x" + std::to_string(length) + "]";
	}
	bool operator==(const Tensor3&) const = default;
};

} // namespace stlf
