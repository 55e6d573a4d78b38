#pragma once

// Minimal SVG rendering for error histograms and metric bar charts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace stlf::cli {

struct HistogramPanel {
	std::string title;
	std::vector<double> edges;        // bins + 1
	std::vector<std::size_t> counts;  // bins
};

namespace svg {

inline std::string num(double v) {
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.2f", v);
	return buf;
}

inline std::string escape(const std::string& s) {
	std::string out;
	for (char c : s) {
		switch (c) {
		case '&': out += "&amp;"; break;
		case '<': out += "&lt;"; break;
		case '>': out += "&gt;"; break;
		case '"': out += "&quot;"; break;
		default: out += c;
		}
	}
	return out;
}

inline std::string text(double x, double y, const std::string& s, int size = 11, const char* anchor = "middle") {
	return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) + "\" text-anchor=\"" + anchor +
	       "\" font-family=\"sans-serif\">" + escape(s) + "</text>\n";
}

} // namespace svg

/// Grid of per-model error histograms sharing one x axis; a dashed line marks
/// zero error.
inline std::string render_histograms(const std::vector<HistogramPanel>& panels, const std::string& title, std::size_t columns = 3) {
	const double pw = 260, ph = 180, pad = 40;
	columns = std::max<std::size_t>(1, std::min(columns, panels.size()));
	const std::size_t rows = (panels.size() + columns - 1) / columns;
	const double width = static_cast<double>(columns) * pw, height = 30 + static_cast<double>(rows) * ph;
	std::ostringstream os;
	os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(width) << "\" height=\"" << svg::num(height) << "\">\n";
	os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" << svg::text(width / 2, 20, title, 14);
	for (std::size_t k = 0; k < panels.size(); ++k) {
		const auto& p = panels[k];
		const double ox = static_cast<double>(k % columns) * pw, oy = 30 + static_cast<double>(k / columns) * ph;
		const double x0 = ox + pad, x1 = ox + pw - 10, y0 = oy + ph - 30, y1 = oy + 20;
		const double lo = p.edges.front(), hi = p.edges.back();
		const std::size_t peak = std::max<std::size_t>(1, p.counts.empty() ? 1 : *std::max_element(p.counts.begin(), p.counts.end()));
		auto sx = [&](double v) { return x0 + (v - lo) / (hi - lo) * (x1 - x0); };
		os << svg::text((x0 + x1) / 2, oy + 14, p.title, 12);
		for (std::size_t b = 0; b < p.counts.size(); ++b) {
			const double h = (y0 - y1) * static_cast<double>(p.counts[b]) / static_cast<double>(peak);
			os << "<rect x=\"" << svg::num(sx(p.edges[b])) << "\" y=\"" << svg::num(y0 - h) << "\" width=\""
			   << svg::num(std::max(0.5, sx(p.edges[b + 1]) - sx(p.edges[b]) - 0.5)) << "\" height=\"" << svg::num(h)
			   << "\" fill=\"#4878a8\"/>\n";
		}
		os << "<line x1=\"" << svg::num(x0) << "\" y1=\"" << svg::num(y0) << "\" x2=\"" << svg::num(x1) << "\" y2=\"" << svg::num(y0)
		   << "\" stroke=\"black\"/>\n";
		if (lo <= 0.0 && hi >= 0.0)
			os << "<line x1=\"" << svg::num(sx(0.0)) << "\" y1=\"" << svg::num(y0) << "\" x2=\"" << svg::num(sx(0.0)) << "\" y2=\""
			   << svg::num(y1) << "\" stroke=\"red\" stroke-dasharray=\"4,3\"/>\n";
		os << svg::text(x0, y0 + 14, svg::num(lo), 9) << svg::text(x1, y0 + 14, svg::num(hi), 9);
		os << svg::text((x0 + x1) / 2, y0 + 26, "forecast - truth (Wh)", 9);
	}
	os << "</svg>\n";
	return os.str();
}

struct BarGroup {
	std::string label;                       // e.g. split
	std::vector<std::pair<std::string, double>> bars; // model -> value
};

/// Grouped bar chart (one group per split, one bar per model).
inline std::string render_bars(const std::vector<BarGroup>& groups, const std::string& title, const std::string& unit) {
	std::size_t nbars = 0;
	double peak = 0.0;
	for (const auto& g : groups) {
		nbars = std::max(nbars, g.bars.size());
		for (const auto& [_, v] : g.bars) peak = std::max(peak, v);
	}
	if (peak <= 0.0) peak = 1.0;
	const double bw = 16, gap = 24, left = 60, top = 40, plot_h = 260;
	const double width = left + static_cast<double>(groups.size()) * (static_cast<double>(nbars) * bw + gap) + 160;
	const double height = top + plot_h + 60;
	static const char* palette[] = {"#4878a8", "#e8853a", "#5aa05a", "#c8504a", "#8c6bb1", "#8c564b", "#d67fbf", "#7f7f7f", "#bcbd22", "#17becf", "#1f4e79"};
	std::ostringstream os;
	os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(width) << "\" height=\"" << svg::num(height) << "\">\n";
	os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" << svg::text(width / 2, 20, title, 14);
	const double base = top + plot_h;
	os << "<line x1=\"" << svg::num(left) << "\" y1=\"" << svg::num(base) << "\" x2=\"" << svg::num(width - 150) << "\" y2=\""
	   << svg::num(base) << "\" stroke=\"black\"/>\n";
	os << svg::text(left - 6, top + 4, svg::num(peak), 9, "end") << svg::text(left - 6, base, "0", 9, "end");
	os << svg::text(18, top + plot_h / 2, unit, 10);
	std::vector<std::string> legend;
	for (std::size_t gi = 0; gi < groups.size(); ++gi) {
		const double gx = left + 10 + static_cast<double>(gi) * (static_cast<double>(nbars) * bw + gap);
		for (std::size_t b = 0; b < groups[gi].bars.size(); ++b) {
			const auto& [model, v] = groups[gi].bars[b];
			auto it = std::find(legend.begin(), legend.end(), model);
			const std::size_t colour = static_cast<std::size_t>(it - legend.begin());
			if (it == legend.end()) legend.push_back(model);
			const double h = plot_h * v / peak;
			os << "<rect x=\"" << svg::num(gx + static_cast<double>(b) * bw) << "\" y=\"" << svg::num(base - h) << "\" width=\""
			   << svg::num(bw - 2) << "\" height=\"" << svg::num(h) << "\" fill=\"" << palette[colour % 11] << "\"/>\n";
		}
		os << svg::text(gx + static_cast<double>(nbars) * bw / 2, base + 16, groups[gi].label, 10);
	}
	for (std::size_t k = 0; k < legend.size(); ++k) {
		const double ly = top + static_cast<double>(k) * 16;
		os << "<rect x=\"" << svg::num(width - 140) << "\" y=\"" << svg::num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\"" << palette[k % 11]
		   << "\"/>\n"
		   << svg::text(width - 124, ly, legend[k], 10, "start");
	}
	os << "</svg>\n";
	return os.str();
}

} // namespace stlf::cli
