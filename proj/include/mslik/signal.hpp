#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "mslik/errors.hpp"

namespace mslik {

// Declarative description of a test signal on [0, 1). All kinds reduce to
// piecewise-linear functions, so cell integrals are exact.
struct SignalSpec {
    enum class Kind { constant, blocks, ramp, spikes };

    Kind kind = Kind::constant;
    double level = 1.0;                                   // constant
    std::vector<double> breakpoints;                      // blocks: sorted, in (0,1)
    std::vector<double> levels;                           // blocks: breakpoints.size() + 1 values
    double ramp_lo = 0.0, ramp_hi = 1.0;                  // ramp endpoints
    double spike_base = 0.0;                              // spikes baseline
    std::vector<double> spike_centers;                    // triangular bumps
    std::vector<double> spike_widths;                     // half-widths
    std::vector<double> spike_heights;
    std::optional<std::pair<double, double>> clamp;       // optional range clamp [c, C]

    static SignalSpec constant(double level) {
        SignalSpec s;
        s.kind = Kind::constant;
        s.level = level;
        return s;
    }

    static SignalSpec blocks(std::vector<double> breakpoints, std::vector<double> levels) {
        SignalSpec s;
        s.kind = Kind::blocks;
        s.breakpoints = std::move(breakpoints);
        s.levels = std::move(levels);
        return s;
    }

    static SignalSpec ramp(double lo, double hi) {
        SignalSpec s;
        s.kind = Kind::ramp;
        s.ramp_lo = lo;
        s.ramp_hi = hi;
        return s;
    }

    static SignalSpec spikes(double base, std::vector<double> centers, std::vector<double> widths,
                             std::vector<double> heights) {
        SignalSpec s;
        s.kind = Kind::spikes;
        s.spike_base = base;
        s.spike_centers = std::move(centers);
        s.spike_widths = std::move(widths);
        s.spike_heights = std::move(heights);
        return s;
    }
};

// Evaluable piecewise-linear signal with closed-form integrals.
class Signal {
  public:
    struct Segment {
        double t0, t1;  // [t0, t1)
        double v0, v1;  // endpoint values, linear in between
    };

    explicit Signal(std::vector<Segment> segments) : segments_(std::move(segments)) {}

    double operator()(double t) const {
        for (const auto& s : segments_) {
            if (t >= s.t0 && t < s.t1) return value_in(s, t);
        }
        // t == 1 or beyond: hold the final value.
        const auto& last = segments_.back();
        return last.v1;
    }

    // Exact integral over [a, b] within [0, 1].
    double integral(double a, double b) const {
        double total = 0.0;
        for (const auto& s : segments_) {
            const double lo = std::max(a, s.t0);
            const double hi = std::min(b, s.t1);
            if (hi <= lo) continue;
            total += 0.5 * (value_in(s, lo) + value_in(s, hi)) * (hi - lo);
        }
        return total;
    }

    // Total variation: within-segment swing plus jumps at segment joins.
    double total_variation() const {
        double tv = 0.0;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            tv += std::abs(segments_[i].v1 - segments_[i].v0);
            if (i + 1 < segments_.size()) tv += std::abs(segments_[i + 1].v0 - segments_[i].v1);
        }
        return tv;
    }

    double min_value() const {
        double m = segments_[0].v0;
        for (const auto& s : segments_) m = std::min({m, s.v0, s.v1});
        return m;
    }

    double max_value() const {
        double m = segments_[0].v0;
        for (const auto& s : segments_) m = std::max({m, s.v0, s.v1});
        return m;
    }

    const std::vector<Segment>& segments() const { return segments_; }

  private:
    static double value_in(const Segment& s, double t) {
        if (s.t1 == s.t0) return s.v0;
        const double w = (t - s.t0) / (s.t1 - s.t0);
        return s.v0 + w * (s.v1 - s.v0);
    }

    std::vector<Segment> segments_;
};

namespace detail {

// Clamp one linear segment into [lo, hi], splitting at threshold crossings.
inline void clamp_segment(const Signal::Segment& s, double lo, double hi,
                          std::vector<Signal::Segment>& out) {
    const auto clamped = [&](double v) { return std::clamp(v, lo, hi); };
    if (s.v0 == s.v1) {
        out.push_back({s.t0, s.t1, clamped(s.v0), clamped(s.v1)});
        return;
    }
    // Crossing times of the two thresholds, kept inside (t0, t1) and sorted.
    std::vector<double> cuts = {s.t0, s.t1};
    for (double bound : {lo, hi}) {
        const double t = s.t0 + (bound - s.v0) / (s.v1 - s.v0) * (s.t1 - s.t0);
        if (t > s.t0 && t < s.t1) cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    const double slope = (s.v1 - s.v0) / (s.t1 - s.t0);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        if (b <= a) continue;
        const double va = clamped(s.v0 + slope * (a - s.t0));
        const double vb = clamped(s.v0 + slope * (b - s.t0));
        out.push_back({a, b, va, vb});
    }
}

}  // namespace detail

inline Signal make_signal(const SignalSpec& spec) {
    std::vector<Signal::Segment> segs;
    switch (spec.kind) {
        case SignalSpec::Kind::constant:
            segs.push_back({0.0, 1.0, spec.level, spec.level});
            break;
        case SignalSpec::Kind::blocks: {
            if (spec.levels.size() != spec.breakpoints.size() + 1) {
                throw invalid_argument("blocks signal needs one more level than breakpoints");
            }
            double prev = 0.0;
            for (std::size_t i = 0; i < spec.breakpoints.size(); ++i) {
                const double b = spec.breakpoints[i];
                if (b <= prev || b >= 1.0) throw invalid_argument("breakpoints must be sorted within (0,1)");
                segs.push_back({prev, b, spec.levels[i], spec.levels[i]});
                prev = b;
            }
            segs.push_back({prev, 1.0, spec.levels.back(), spec.levels.back()});
            break;
        }
        case SignalSpec::Kind::ramp:
            segs.push_back({0.0, 1.0, spec.ramp_lo, spec.ramp_hi});
            break;
        case SignalSpec::Kind::spikes: {
            if (spec.spike_centers.size() != spec.spike_widths.size() ||
                spec.spike_centers.size() != spec.spike_heights.size()) {
                throw invalid_argument("spikes signal needs matching centers/widths/heights");
            }
            // Triangular bumps on a constant baseline. Build the knot set,
            // then evaluate the bump sum piecewise.
            std::vector<double> knots = {0.0, 1.0};
            for (std::size_t i = 0; i < spec.spike_centers.size(); ++i) {
                const double c = spec.spike_centers[i], w = spec.spike_widths[i];
                if (w <= 0.0) throw invalid_argument("spike widths must be positive");
                for (double t : {c - w, c, c + w}) {
                    if (t > 0.0 && t < 1.0) knots.push_back(t);
                }
            }
            std::sort(knots.begin(), knots.end());
            knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
            const auto bump_sum = [&](double t) {
                double v = spec.spike_base;
                for (std::size_t i = 0; i < spec.spike_centers.size(); ++i) {
                    const double u = 1.0 - std::abs(t - spec.spike_centers[i]) / spec.spike_widths[i];
                    if (u > 0.0) v += spec.spike_heights[i] * u;
                }
                return v;
            };
            for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
                segs.push_back({knots[i], knots[i + 1], bump_sum(knots[i]), bump_sum(knots[i + 1])});
            }
            break;
        }
    }
    for (const auto& s : segs) {
        if (!std::isfinite(s.v0) || !std::isfinite(s.v1)) throw invalid_argument("signal levels must be finite");
    }
    if (spec.clamp) {
        const auto [lo, hi] = *spec.clamp;
        if (!(lo < hi)) throw invalid_argument("clamp range must satisfy c < C");
        std::vector<Signal::Segment> clamped;
        for (const auto& s : segs) detail::clamp_segment(s, lo, hi, clamped);
        segs = std::move(clamped);
    }
    return Signal(std::move(segs));
}

}  // namespace mslik
