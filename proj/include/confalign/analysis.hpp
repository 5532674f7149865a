#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confalign/certainty.hpp"
#include "confalign/common.hpp"

namespace confalign {

enum class taxonomy_label {
    consistent_alignment,
    internal_overconfidence,
    external_overconfidence,
    consistent_discordance
};

inline const char* to_string(taxonomy_label t) {
    switch (t) {
        case taxonomy_label::consistent_alignment: return "consistent_alignment";
        case taxonomy_label::internal_overconfidence: return "internal_overconfidence";
        case taxonomy_label::external_overconfidence: return "external_overconfidence";
        case taxonomy_label::consistent_discordance: return "consistent_discordance";
    }
    return "?";
}

inline taxonomy_label taxonomy_from_string(const std::string& s) {
    if (s == "consistent_alignment") return taxonomy_label::consistent_alignment;
    if (s == "internal_overconfidence") return taxonomy_label::internal_overconfidence;
    if (s == "external_overconfidence") return taxonomy_label::external_overconfidence;
    if (s == "consistent_discordance") return taxonomy_label::consistent_discordance;
    throw validation_error("unknown taxonomy label: " + s);
}

struct alignment_thresholds {
    double ic_high = 0.9;
    double vc_high = 0.8;
};

// Four-way partition of the (internal confidence, verbalized certainty) square.
inline taxonomy_label classify_alignment(double internal_confidence, double verbalized_score,
                                         alignment_thresholds t = {}) {
    if (!(internal_confidence >= 0.0 && internal_confidence <= 1.0))
        throw validation_error("internal confidence out of [0,1]");
    if (!(verbalized_score >= 0.0 && verbalized_score <= 1.0))
        throw validation_error("verbalized score out of [0,1]");
    bool ic_high = internal_confidence >= t.ic_high;
    bool vc_high = verbalized_score >= t.vc_high;
    if (ic_high && vc_high) return taxonomy_label::consistent_alignment;
    if (ic_high) return taxonomy_label::internal_overconfidence;
    if (vc_high) return taxonomy_label::external_overconfidence;
    return taxonomy_label::consistent_discordance;
}

// One question's full outcome.
struct trial_record {
    std::string question_id;
    std::string dataset;
    std::string variant_id;
    char chosen = 0;  // 0 when answer extraction failed
    std::optional<double> internal_confidence;
    std::optional<double> verbalized_score;
    std::optional<std::string> verbalized_category;
    std::optional<certainty_failure> verbal_failure;
    std::optional<bool> correct;
    double temperature = 0.0;
    int sample_index = 0;
    std::optional<taxonomy_label> taxonomy;
    std::optional<std::string> error;  // "stage: message" when a pipeline stage failed
    std::string answer_text;
    std::string certainty_text;
    bool label_ambiguity = false;
    bool letter_conflict = false;
};

// --- Spearman ----------------------------------------------------------------

struct correlation_result {
    double rho = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
    bool rho_defined = false;
};

namespace detail {

// Average ranks (midranks) for ties, 1-based.
inline std::vector<double> midranks(std::span<const double> values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-14, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

inline double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// Two-sided survival probability of Student's t with df degrees of freedom.
inline double student_t_two_sided(double t, double df) {
    double x = df / (df + t * t);
    return incbeta(df / 2.0, 0.5, x);
}

}  // namespace detail

// Midrank Spearman's rank correlation with the t-approximation p-value.
// Perfect rank agreement/reversal is detected on the rank vectors themselves,
// which keeps rho exactly +/-1 in those cases.
inline correlation_result spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw validation_error("spearman_rho: length mismatch");
    const size_t n = x.size();
    if (n < 2) throw validation_error("spearman_rho: need at least 2 observations");

    correlation_result res;
    res.n = n;

    bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (x_const || y_const) return res;  // rho undefined, not zero

    std::vector<double> rx = detail::midranks(x);
    std::vector<double> ry = detail::midranks(y);

    bool equal = true, reversed = true;
    const double flip = static_cast<double>(n) + 1.0;
    for (size_t i = 0; i < n; ++i) {
        equal &= rx[i] == ry[i];
        reversed &= rx[i] == flip - ry[i];
    }

    double rho;
    if (equal) {
        rho = 1.0;
    } else if (reversed) {
        rho = -1.0;
    } else {
        const double mean = (static_cast<double>(n) + 1.0) / 2.0;  // exact for midranks
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double a = rx[i] - mean, b = ry[i] - mean;
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        rho = sxy / std::sqrt(sxx * syy);
        rho = std::clamp(rho, -1.0, 1.0);
    }

    res.rho = rho;
    res.rho_defined = true;
    if (n >= 3) {
        if (rho == 1.0 || rho == -1.0) {
            res.p_value = 0.0;
        } else {
            double t = rho * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - rho * rho));
            res.p_value = detail::student_t_two_sided(t, static_cast<double>(n) - 2.0);
        }
    }
    return res;
}

// Closed-form shortcut rho = 1 - 6*sum(d^2) / (n(n^2-1)); valid without ties.
inline double spearman_rho_no_ties(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw validation_error("length mismatch");
    const size_t n = x.size();
    std::vector<double> rx = detail::midranks(x);
    std::vector<double> ry = detail::midranks(y);
    double sum_d2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = rx[i] - ry[i];
        sum_d2 += d * d;
    }
    double dn = static_cast<double>(n);
    return 1.0 - 6.0 * sum_d2 / (dn * (dn * dn - 1.0));
}

// --- matrices ----------------------------------------------------------------

// Percentages over the analyzed set; "+" rows first, correct column first.
struct confusion_matrix {
    double pos_correct = 0.0;
    double pos_incorrect = 0.0;
    double neg_correct = 0.0;
    double neg_incorrect = 0.0;
    std::size_t n = 0;              // records the percentages are over
    double residual_fraction = 0.0;  // fraction of eligible records excluded
    bool empty = true;

    double sum() const { return pos_correct + pos_incorrect + neg_correct + neg_incorrect; }
};

// Verbalized certainty vs correctness, restricted to the "very certain" (+)
// and "fairly certain" (-) score levels.
inline confusion_matrix verbal_confusion_matrix(const std::vector<trial_record>& records) {
    confusion_matrix m;
    size_t eligible = 0, counts[4] = {0, 0, 0, 0};
    for (const auto& r : records) {
        if (!r.correct.has_value() || !r.verbalized_score.has_value()) continue;
        ++eligible;
        double v = *r.verbalized_score;
        bool pos = v == 1.0, neg = v == 0.8;
        if (!pos && !neg) continue;
        size_t idx = (pos ? 0 : 2) + (*r.correct ? 0 : 1);
        counts[idx] += 1;
    }
    size_t restricted = counts[0] + counts[1] + counts[2] + counts[3];
    if (restricted == 0) return m;
    m.empty = false;
    m.n = restricted;
    m.residual_fraction =
        eligible == 0 ? 0.0 : static_cast<double>(eligible - restricted) / static_cast<double>(eligible);
    double dn = static_cast<double>(restricted);
    m.pos_correct = 100.0 * static_cast<double>(counts[0]) / dn;
    m.pos_incorrect = 100.0 * static_cast<double>(counts[1]) / dn;
    m.neg_correct = 100.0 * static_cast<double>(counts[2]) / dn;
    m.neg_incorrect = 100.0 * static_cast<double>(counts[3]) / dn;
    return m;
}

// Internal confidence vs correctness split at the record set's median;
// strictly above the median is "+", at-or-below is "-".
inline confusion_matrix internal_confusion_matrix(const std::vector<trial_record>& records) {
    confusion_matrix m;
    std::vector<const trial_record*> usable;
    for (const auto& r : records)
        if (r.correct.has_value() && r.internal_confidence.has_value()) usable.push_back(&r);
    if (usable.size() < 2) return m;

    std::vector<double> ic;
    ic.reserve(usable.size());
    for (const auto* r : usable) ic.push_back(*r->internal_confidence);
    std::sort(ic.begin(), ic.end());
    double median = ic.size() % 2 == 1 ? ic[ic.size() / 2]
                                       : (ic[ic.size() / 2 - 1] + ic[ic.size() / 2]) / 2.0;

    size_t counts[4] = {0, 0, 0, 0};
    for (const auto* r : usable) {
        bool pos = *r->internal_confidence > median;
        size_t idx = (pos ? 0 : 2) + (*r->correct ? 0 : 1);
        counts[idx] += 1;
    }
    m.empty = false;
    m.n = usable.size();
    double dn = static_cast<double>(usable.size());
    m.pos_correct = 100.0 * static_cast<double>(counts[0]) / dn;
    m.pos_incorrect = 100.0 * static_cast<double>(counts[1]) / dn;
    m.neg_correct = 100.0 * static_cast<double>(counts[2]) / dn;
    m.neg_incorrect = 100.0 * static_cast<double>(counts[3]) / dn;
    return m;
}

// --- histograms ----------------------------------------------------------------

struct histogram {
    std::vector<std::string> labels;
    std::vector<double> percentages;
    std::size_t n = 0;
};

// Bins are the exact likert score levels; a value lands in the nearest level.
inline histogram certainty_histogram(const std::vector<trial_record>& records) {
    static const double levels[6] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    histogram h;
    h.labels = {"0.0", "0.2", "0.4", "0.6", "0.8", "1.0"};
    std::vector<size_t> counts(6, 0);
    for (const auto& r : records) {
        if (!r.verbalized_score.has_value()) continue;
        size_t best = 0;
        for (size_t i = 1; i < 6; ++i)
            if (std::fabs(*r.verbalized_score - levels[i]) < std::fabs(*r.verbalized_score - levels[best]))
                best = i;
        counts[best] += 1;
        h.n += 1;
    }
    h.percentages.assign(6, 0.0);
    if (h.n > 0)
        for (size_t i = 0; i < 6; ++i)
            h.percentages[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(h.n);
    return h;
}

// Ten equal-width bins on [0,1]; 1.0 falls in the last bin.
inline histogram confidence_histogram(const std::vector<trial_record>& records) {
    histogram h;
    for (int i = 0; i < 10; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.1f-%.1f", i / 10.0, (i + 1) / 10.0);
        h.labels.push_back(buf);
    }
    std::vector<size_t> counts(10, 0);
    for (const auto& r : records) {
        if (!r.internal_confidence.has_value()) continue;
        int idx = std::min(9, static_cast<int>(*r.internal_confidence * 10.0));
        idx = std::max(0, idx);
        counts[static_cast<size_t>(idx)] += 1;
        h.n += 1;
    }
    h.percentages.assign(10, 0.0);
    if (h.n > 0)
        for (size_t i = 0; i < 10; ++i)
            h.percentages[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(h.n);
    return h;
}

// --- temperature stability ------------------------------------------------------

struct stability_point {
    double temperature = 0.0;
    double avg_std = 0.0;
    std::size_t questions = 0;  // questions contributing at this temperature
    std::size_t excluded = 0;   // (question, temperature) groups with < 2 samples
};

namespace detail {

// Population standard deviation; exactly 0 for a constant sample.
inline double population_std(const std::vector<double>& values) {
    bool all_equal = std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
    if (all_equal) return 0.0;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size()));
}

}  // namespace detail

// Per temperature: the population std of each question's verbalized scores,
// averaged over questions. Groups with fewer than 2 samples are excluded.
inline std::vector<stability_point> temperature_stability(const std::vector<trial_record>& records,
                                                          std::span<const double> grid) {
    std::map<double, std::map<std::string, std::vector<double>>> groups;
    for (const auto& r : records) {
        if (!r.verbalized_score.has_value()) continue;
        groups[r.temperature][r.question_id].push_back(*r.verbalized_score);
    }
    std::vector<stability_point> out;
    for (double t : grid) {
        stability_point p;
        p.temperature = t;
        auto it = groups.find(t);
        if (it != groups.end()) {
            double sum = 0.0;
            for (const auto& [qid, scores] : it->second) {
                if (scores.size() < 2) {
                    p.excluded += 1;
                    continue;
                }
                sum += detail::population_std(scores);
                p.questions += 1;
            }
            if (p.questions > 0) p.avg_std = sum / static_cast<double>(p.questions);
        }
        out.push_back(p);
    }
    return out;
}

// --- ablation -----------------------------------------------------------------

struct ablation_table_result {
    std::vector<std::string> variants;  // row order as supplied
    std::vector<std::string> datasets;  // sorted
    // rho[row][col]; undefined cells keep rho_defined = false
    std::vector<std::vector<correlation_result>> cells;
    // per dataset: row index of the highest defined rho, SIZE_MAX when none
    std::vector<std::size_t> best_row;
};

inline std::vector<const trial_record*> records_with_pair(const std::vector<trial_record>& records) {
    std::vector<const trial_record*> out;
    for (const auto& r : records)
        if (r.internal_confidence.has_value() && r.verbalized_score.has_value()) out.push_back(&r);
    return out;
}

inline correlation_result alignment_correlation(const std::vector<trial_record>& records) {
    auto paired = records_with_pair(records);
    if (paired.size() < 2) return {};
    std::vector<double> ic, vc;
    ic.reserve(paired.size());
    vc.reserve(paired.size());
    for (const auto* r : paired) {
        ic.push_back(*r->internal_confidence);
        vc.push_back(*r->verbalized_score);
    }
    return spearman_rho(ic, vc);
}

inline ablation_table_result ablation_table(
    const std::vector<std::pair<std::string, std::vector<trial_record>>>& per_variant) {
    ablation_table_result out;
    std::set<std::string> dataset_names;
    for (const auto& [variant, records] : per_variant) {
        out.variants.push_back(variant);
        for (const auto& r : records) dataset_names.insert(r.dataset);
    }
    out.datasets.assign(dataset_names.begin(), dataset_names.end());

    for (const auto& [variant, records] : per_variant) {
        std::vector<correlation_result> row;
        for (const auto& ds : out.datasets) {
            std::vector<trial_record> subset;
            for (const auto& r : records)
                if (r.dataset == ds) subset.push_back(r);
            row.push_back(alignment_correlation(subset));
        }
        out.cells.push_back(std::move(row));
    }
    for (size_t col = 0; col < out.datasets.size(); ++col) {
        size_t best = SIZE_MAX;
        for (size_t row = 0; row < out.cells.size(); ++row) {
            const auto& c = out.cells[row][col];
            if (!c.rho_defined) continue;
            if (best == SIZE_MAX || c.rho > out.cells[best][col].rho) best = row;
        }
        out.best_row.push_back(best);
    }
    return out;
}

}  // namespace confalign
