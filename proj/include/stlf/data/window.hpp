#pragma once

#include <string>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/data/panel.hpp"
#include "stlf/data/splits.hpp"

namespace stlf::data {

/// Day-ahead horizon at 30-minute resolution.
inline constexpr std::size_t kDayAheadSteps = 48;

/// (input window, target) pairs. `origins[b]` is the first target instant.
struct WindowBatch {
	Tensor3 inputs;  // B x N x W
	Tensor3 targets; // B x N x H
	std::vector<Timestamp> origins;

	std::size_t size() const { return origins.size(); }
	bool empty() const { return origins.empty(); }

	WindowBatch subset(const std::vector<std::size_t>& idx) const {
		WindowBatch out;
		out.inputs = Tensor3(idx.size(), inputs.nodes, inputs.length);
		out.targets = Tensor3(idx.size(), targets.nodes, targets.length);
		const std::size_t in_stride = inputs.nodes * inputs.length, out_stride = targets.nodes * targets.length;
		for (std::size_t k = 0; k < idx.size(); ++k) {
			std::copy_n(inputs.data.begin() + static_cast<std::ptrdiff_t>(idx[k] * in_stride), in_stride,
			            out.inputs.data.begin() + static_cast<std::ptrdiff_t>(k * in_stride));
			std::copy_n(targets.data.begin() + static_cast<std::ptrdiff_t>(idx[k] * out_stride), out_stride,
			            out.targets.data.begin() + static_cast<std::ptrdiff_t>(k * out_stride));
			out.origins.push_back(origins[idx[k]]);
		}
		return out;
	}
};

/// floor((len - W - H) / stride) + 1, or 0 if the partition is too short.
inline std::size_t window_count(std::size_t len, std::size_t w, std::size_t h, std::size_t stride) {
	if (len < w + h) return 0;
	return (len - w - h) / stride + 1;
}

/// Sliding windows lying entirely inside `range`.
inline WindowBatch window_partition(const Matrix& values, const Timeline& tl, TimeRange range, std::size_t w, std::size_t h,
                                    std::size_t stride, const std::string& name) {
	if (w < 1 || h < 1 || stride < 1) throw DataError("window: W, H and stride must all be >= 1");
	const std::size_t lo = tl.lower_index(range.start), hi = tl.lower_index(range.end);
	const std::size_t len = hi > lo ? hi - lo : 0;
	const std::size_t count = window_count(len, w, h, stride);
	if (count == 0)
		throw DataError("window: " + name + " partition has " + std::to_string(len) + " steps; needs at least W + H = " +
		                std::to_string(w + h));
	const std::size_t n = values.rows();
	WindowBatch out{Tensor3(count, n, w), Tensor3(count, n, h), {}};
	out.origins.reserve(count);
	for (std::size_t b = 0; b < count; ++b) {
		const std::size_t s = lo + b * stride;
		for (std::size_t i = 0; i < n; ++i) {
			const auto row = values.row(i);
			std::copy_n(row.begin() + static_cast<std::ptrdiff_t>(s), w, out.inputs.series(b, i).begin());
			std::copy_n(row.begin() + static_cast<std::ptrdiff_t>(s + w), h, out.targets.series(b, i).begin());
		}
		out.origins.push_back(tl.at(s + w));
	}
	return out;
}

struct WindowStrides {
	std::size_t train = 1;
	std::size_t eval = kDayAheadSteps;
};

struct PartitionedWindows {
	WindowBatch train;
	WindowBatch val;
	WindowBatch test;
};

inline PartitionedWindows window(const Matrix& values, const Timeline& tl, const SplitSpec& spec, std::size_t w,
                                 std::size_t h, WindowStrides strides = {}) {
	spec.validate();
	return {window_partition(values, tl, spec.train(), w, h, strides.train, "training"),
	        window_partition(values, tl, spec.val, w, h, strides.eval, "validation"),
	        window_partition(values, tl, spec.test, w, h, strides.eval, "test")};
}

inline PartitionedWindows window(const LoadPanel& panel, const SplitSpec& spec, std::size_t w, std::size_t h,
                                 WindowStrides strides = {}) {
	return window(panel.values(), panel.timeline(), spec, w, h, strides);
}

inline PartitionedWindows window(const SeriesPanel& panel, const SplitSpec& spec, std::size_t w, std::size_t h,
                                 WindowStrides strides = {}) {
	return window(panel.values, panel.timeline, spec, w, h, strides);
}

} // namespace stlf::data
