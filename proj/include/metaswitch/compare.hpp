#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metaswitch/instanton.hpp"
#include "metaswitch/linalg.hpp"
#include "metaswitch/qjmc.hpp"

namespace metaswitch {

/// Spectral observables at one detuning across sizes.
struct SpectralSeries {
  double delta = 0.0;
  std::vector<int> sizes;
  std::vector<double> r;     // occupation ratio D+/D-
  std::vector<double> gaps;  // -Re lambda_1
};

struct SpectralExponents {
  std::optional<LinearFit> ln_r;   // ln r = slope N + c
  std::optional<ExpFit> gap;       // gap = b exp(a N)
};

/// Needs two sizes with finite positive values for each fit.
SpectralExponents spectral_exponents(const SpectralSeries& series);

struct QjmcSeries {
  double delta = 0.0;
  SwitchStats stats;
};

struct ComparisonInputs {
  std::vector<SpectralSeries> spectral;
  std::vector<QjmcSeries> qjmc;
  std::vector<Quasipotential> instanton;
};

struct ComparisonRow {
  double delta = 0.0;
  double phi_db_spectral = 0.0;   // slope of ln r in N
  double phi_db_qjmc = 0.0;       // v_d - v_b
  double phi_db_instanton = 0.0;  // phi_d - phi_b
  double tau_exponent_spectral = 0.0;  // -a from gap = b exp(a N)
  double tau_exponent_qjmc = 0.0;      // kappa from tau = b exp(kappa N)
};

struct MissingRow {
  double delta = 0.0;
  std::string reason;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;     // ascending delta, complete rows only
  std::vector<MissingRow> missing;     // detunings dropped and why
};

/// Joins the three pipelines on detuning (exact match after rounding to 1e-9).
ComparisonTable compare_methods(const ComparisonInputs& inputs);

/// First sign change of values along ascending x, linearly interpolated.
std::optional<double> zero_crossing(const std::vector<double>& x, const std::vector<double>& values);

/// x at the largest value; a three-point parabola refines interior maxima.
std::optional<double> peak_location(const std::vector<double>& x, const std::vector<double>& values);

}  // namespace metaswitch
