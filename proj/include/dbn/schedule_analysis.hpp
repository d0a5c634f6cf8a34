#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbn/dbn_state.hpp"
#include "dbn/optimizer.hpp"

namespace dbn {

struct SchedulePair {
    AlphaSchedule alpha;
    EtaSchedule eta;

    static SchedulePair power(double h, double k) {
        return {AlphaSchedule::power(h), EtaSchedule::power(1.0, k)};
    }

    /// Exponent h of α^(m) = 1/m^h; a positive constant counts as h = 0.
    /// Empty for tables and for α ≡ 0.
    std::optional<double> alpha_exponent() const;
    /// Exponent k of η^(m) = c/m^k; a constant counts as k = 0.
    double eta_exponent() const;
};

/// Σα < ∞ and ΣΣ α^(m)η^(n) < ∞ for power schedules: h > 1 and k >= 1.
bool check_theorem31_rule(double h, double k);

/// The stronger tail conditions on α and αη: h > 2 and k >= 1.
bool check_lemma42_rule(double h, double k);

/// Truncated sums at M:
///   s1 = Σ_{m<=M} α^(m)
///   s2 = Σ_{m<=M} Σ_{n<=m} α^(m) η^(n)
///   s3 = Σ_{m<=M} Σ_{i=m..M} Σ_{n<=i} α^(i) η^(n)
///   s4 = Σ_{m<=M} Σ_{n=m..M} α^(n)
///   eta_sq = Σ_{m<=M} (η^(m))²
struct PartialSums {
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;
    double s4 = 0.0;
    double eta_sq = 0.0;

    bool finite() const;
};

/// O(M) evaluation via running prefix sums of η and reverse tails.
PartialSums partial_sums(const SchedulePair& pair, std::uint64_t truncation);

/// a_m = M1·Σ_{i=m..H} Σ_{j<=i} α^(i)η^(j) + M2·Σ_{i=m..H} α^(i), with H the horizon.
double tail_bound_am(const SchedulePair& pair, std::uint64_t m, double m1, double m2, std::uint64_t horizon);

enum class SeriesVerdict { convergent, divergent, inconclusive };

std::string to_string(SeriesVerdict v);

/// Heuristic convergence evidence for one series from its growth when the
/// truncation doubles.
struct SeriesEvidence {
    std::string name;
    double at_m = 0.0;
    double at_2m = 0.0;
    double growth = 0.0;  // (S(2M) - S(M)) / S(M)
    SeriesVerdict verdict = SeriesVerdict::inconclusive;
};

/// Relative growth below which a series is read as convergent.
inline constexpr double kTailGrowthThreshold = 0.01;

SeriesVerdict judge_growth(double at_m, double at_2m);

struct ConditionReport {
    std::optional<bool> theorem31_symbolic;  // power schedules only
    std::optional<bool> lemma42_symbolic;
    std::vector<std::string> theorem31_trace;
    std::vector<std::string> lemma42_trace;

    std::uint64_t truncation = 0;
    PartialSums sums;                       // at the truncation
    std::vector<SeriesEvidence> evidence;   // s1, s2, eta_sq, s3, s4
    SeriesVerdict theorem31_numeric = SeriesVerdict::inconclusive;
    SeriesVerdict lemma42_numeric = SeriesVerdict::inconclusive;

    /// Authoritative verdicts: symbolic when available, numeric otherwise.
    bool theorem31_ok = false;
    bool lemma42_ok = false;
    /// Both numeric verdicts are conclusive and match the symbolic ones.
    bool agreement = false;
};

/// Symbolic rules plus doubling-truncation evidence. The λ-convergence
/// conditions need s1, s2 and eta_sq to converge; the stationarity conditions
/// additionally need s3 and s4.
ConditionReport classify(const SchedulePair& pair, std::uint64_t truncation);

}  // namespace dbn
