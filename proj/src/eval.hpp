#ifndef VCM_EVAL_HPP
#define VCM_EVAL_HPP

#include <span>
#include <string>
#include <vector>

namespace vcm::eval {

// Pearson correlation; throws Numeric on fewer than 2 points or zero
// variance in either argument.
double pearson(std::span<const double> x, std::span<const double> y);

// sqrt(mean squared difference); lengths must match and be >= 1.
double rmse(std::span<const double> x, std::span<const double> y);

// m(x) = a + (b-a) / (1 + exp(-c (x - d))), clamped to [1,5]. c >= 0 and
// b >= a, so the mapping is monotone non-decreasing.
struct SigmoidMapping {
    double a = 1;
    double b = 5;
    double c = 1;
    double d = 0;

    double operator()(double x) const;
};

// Least-squares fit by derivative-free simplex search with a fixed
// iteration budget (deterministic). Needs >= 4 pairs and non-constant raw
// scores. The c >= 0 constraint is enforced by projection.
SigmoidMapping fit_mapping(std::span<const double> raw, std::span<const double> mos);

struct EvalReport {
    double pcc = 0;
    double rmse = 0;
    std::vector<double> mapped;
    SigmoidMapping mapping;
};

// Fits the mapping on the given pairs, applies it, and reports mapped
// PCC/RMSE (per-file protocol: one prediction per clip).
EvalReport evaluate_model(std::span<const double> predictions, std::span<const double> mos);

// Per-frame report CSV: frame,q_raw,q_clamped,freeze_div10,skip_div10 plus an
// optional extra metric column. freeze/skip are written divided by 10; when
// absent they are written as 0.
struct TimelineColumns {
    std::span<const double> quality; // raw per-frame scores, required
    std::span<const double> freeze;  // optional, same length
    std::span<const double> skip;    // optional, same length
    std::string metric_name;         // optional extra column
    std::span<const double> metric;
};

void export_timeline(const TimelineColumns& columns, const std::string& path);

} // namespace vcm::eval

#endif
