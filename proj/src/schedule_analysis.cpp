#include "dbn/schedule_analysis.hpp"

#include <cmath>
#include <cstdio>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

SeriesVerdict combine(std::initializer_list<SeriesVerdict> parts) {
    bool inconclusive = false;
    for (auto v : parts) {
        if (v == SeriesVerdict::divergent) return SeriesVerdict::divergent;
        if (v == SeriesVerdict::inconclusive) inconclusive = true;
    }
    return inconclusive ? SeriesVerdict::inconclusive : SeriesVerdict::convergent;
}

}  // namespace

std::optional<double> SchedulePair::alpha_exponent() const {
    switch (alpha.kind) {
        case AlphaSchedule::Kind::power: return alpha.value;
        case AlphaSchedule::Kind::constant:
            if (alpha.value > 0.0) return 0.0;
            return std::nullopt;
        case AlphaSchedule::Kind::table: return std::nullopt;
    }
    return std::nullopt;
}

double SchedulePair::eta_exponent() const {
    return eta.kind == EtaSchedule::Kind::power ? eta.exponent : 0.0;
}

bool check_theorem31_rule(double h, double k) { return h > 1.0 && k >= 1.0; }

bool check_lemma42_rule(double h, double k) { return h > 2.0 && k >= 1.0; }

bool PartialSums::finite() const {
    return std::isfinite(s1) && std::isfinite(s2) && std::isfinite(s3) && std::isfinite(s4) && std::isfinite(eta_sq);
}

PartialSums partial_sums(const SchedulePair& pair, std::uint64_t truncation) {
    if (truncation == 0) throw ParameterError("partial_sums: truncation must be at least 1");
    PartialSums out;
    // weighted[i] = α^(i)·E_i with E_i = Σ_{n<=i} η^(n)
    std::vector<double> weighted(truncation);
    std::vector<double> alphas(truncation);
    double eta_prefix = 0.0;
    for (std::uint64_t m = 1; m <= truncation; ++m) {
        const double a = alpha_at(pair.alpha, m);
        const double e = eta_at(pair.eta, m);
        eta_prefix += e;
        alphas[m - 1] = a;
        weighted[m - 1] = a * eta_prefix;
        out.s1 += a;
        out.s2 += weighted[m - 1];
        out.eta_sq += e * e;
    }
    // Σ_m Σ_{i>=m} x_i: accumulate the tail from the back and sum every tail.
    double weighted_tail = 0.0;
    double alpha_tail = 0.0;
    for (std::uint64_t i = truncation; i-- > 0;) {
        weighted_tail += weighted[i];
        alpha_tail += alphas[i];
        out.s3 += weighted_tail;
        out.s4 += alpha_tail;
    }
    return out;
}

double tail_bound_am(const SchedulePair& pair, std::uint64_t m, double m1, double m2, std::uint64_t horizon) {
    if (m == 0) throw ParameterError("tail_bound_am: m is 1-based");
    if (horizon <= m) throw ParameterError("tail_bound_am: horizon must exceed m");
    if (!(m1 >= 0.0) || !(m2 >= 0.0)) throw ParameterError("tail_bound_am: constants must be nonnegative");
    double eta_prefix = 0.0;
    double weighted_tail = 0.0;
    double alpha_tail = 0.0;
    for (std::uint64_t i = 1; i <= horizon; ++i) {
        eta_prefix += eta_at(pair.eta, i);
        if (i < m) continue;
        const double a = alpha_at(pair.alpha, i);
        weighted_tail += a * eta_prefix;
        alpha_tail += a;
    }
    return m1 * weighted_tail + m2 * alpha_tail;
}

std::string to_string(SeriesVerdict v) {
    switch (v) {
        case SeriesVerdict::convergent: return "convergent";
        case SeriesVerdict::divergent: return "divergent";
        case SeriesVerdict::inconclusive: return "inconclusive at this truncation";
    }
    return "?";
}

SeriesVerdict judge_growth(double at_m, double at_2m) {
    if (!std::isfinite(at_m) || !std::isfinite(at_2m)) return SeriesVerdict::divergent;
    if (at_m == 0.0) return at_2m == 0.0 ? SeriesVerdict::convergent : SeriesVerdict::inconclusive;
    const double growth = (at_2m - at_m) / at_m;
    if (growth < kTailGrowthThreshold) return SeriesVerdict::convergent;
    if (growth > kTailGrowthThreshold) return SeriesVerdict::divergent;
    return SeriesVerdict::inconclusive;
}

ConditionReport classify(const SchedulePair& pair, std::uint64_t truncation) {
    ConditionReport r;
    r.truncation = truncation;

    if (const auto h = pair.alpha_exponent()) {
        const double k = pair.eta_exponent();
        r.theorem31_symbolic = check_theorem31_rule(*h, k);
        r.lemma42_symbolic = check_lemma42_rule(*h, k);
        r.theorem31_trace = {"h = " + num(*h) + (*h > 1.0 ? " > 1" : " <= 1"),
                             "k = " + num(k) + (k >= 1.0 ? " >= 1" : " < 1")};
        r.lemma42_trace = {"h = " + num(*h) + (*h > 2.0 ? " > 2" : " <= 2"),
                           "k = " + num(k) + (k >= 1.0 ? " >= 1" : " < 1")};
    }

    r.sums = partial_sums(pair, truncation);
    const PartialSums doubled = partial_sums(pair, 2 * truncation);
    auto evidence = [&](const char* name, double a, double b) {
        SeriesEvidence e{name, a, b, a != 0.0 ? (b - a) / a : 0.0, judge_growth(a, b)};
        r.evidence.push_back(e);
        return e.verdict;
    };
    const auto v1 = evidence("s1", r.sums.s1, doubled.s1);
    const auto v2 = evidence("s2", r.sums.s2, doubled.s2);
    const auto ve = evidence("eta_sq", r.sums.eta_sq, doubled.eta_sq);
    const auto v3 = evidence("s3", r.sums.s3, doubled.s3);
    const auto v4 = evidence("s4", r.sums.s4, doubled.s4);
    r.theorem31_numeric = combine({v1, v2, ve});
    r.lemma42_numeric = combine({r.theorem31_numeric, v3, v4});

    const auto as_bool = [](SeriesVerdict v) { return v == SeriesVerdict::convergent; };
    r.theorem31_ok = r.theorem31_symbolic.value_or(as_bool(r.theorem31_numeric));
    r.lemma42_ok = r.lemma42_symbolic.value_or(as_bool(r.lemma42_numeric));
    r.lemma42_ok = r.lemma42_ok && r.theorem31_ok;

    if (r.theorem31_symbolic && r.lemma42_symbolic) {
        const auto matches = [&](SeriesVerdict v, bool symbolic) {
            return v != SeriesVerdict::inconclusive && as_bool(v) == symbolic;
        };
        r.agreement = matches(r.theorem31_numeric, *r.theorem31_symbolic) &&
                      matches(r.lemma42_numeric, *r.lemma42_symbolic);
    }
    return r;
}

}  // namespace dbn
