#pragma once

// Transmission-measurement analysis: polynomial rate fits, pair absorption
// rate and the biphoton absorption ratio Gamma.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "json.hpp"
#include "spdclab/counting.hpp"
#include "spdclab/error.hpp"

namespace spdclab::analysis {

enum class Mode { pump, spdc };

inline const char* to_string(Mode m) { return m == Mode::pump ? "pump" : "spdc"; }

struct RateRow {
  double p_spdc_pw = 0;
  double r_s1 = 0, r_s1_err = 0;
  double r_s2 = 0, r_s2_err = 0;
  double r_coin = 0, r_coin_err = 0;
  Mode mode = Mode::pump;
  std::string label;
  std::size_t line = 0;  // source line, 0 if built in code
};

struct RateTable {
  std::vector<RateRow> rows;

  RateTable select(Mode m) const {
    RateTable t;
    for (const auto& r : rows) {
      if (r.mode == m) t.rows.push_back(r);
    }
    return t;
  }
};

inline const char* rate_table_header = "P_SPDC_pW,R_s1,R_s1_err,R_s2,R_s2_err,R_coin,R_coin_err,mode,label";

inline RateTable ingest_rate_table(std::istream& in) {
  RateTable t;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != rate_table_header) {
        throw ParseError(std::string("rate table: header must be '") + rate_table_header + "'", line_no);
      }
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) {
      throw ParseError("rate table: expected 9 fields, got " + std::to_string(f.size()), line_no);
    }
    double v[7];
    for (int k = 0; k < 7; ++k) {
      try {
        std::size_t used = 0;
        v[k] = std::stod(f[k], &used);
        if (used != f[k].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("rate table: field " + std::to_string(k + 1) + " is not a number: '" + f[k] + "'",
                         line_no);
      }
      if (!std::isfinite(v[k])) throw ParseError("rate table: non-finite value", line_no);
      if (v[k] < 0) throw ParseError("rate table: negative value in field " + std::to_string(k + 1), line_no);
    }
    RateRow r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], Mode::pump, f[8], line_no};
    if (f[7] == "pump") {
      r.mode = Mode::pump;
    } else if (f[7] == "spdc") {
      r.mode = Mode::spdc;
    } else {
      throw ParseError("rate table: mode must be 'pump' or 'spdc', got '" + f[7] + "'", line_no);
    }
    if (r.label.empty()) throw ParseError("rate table: empty label", line_no);
    t.rows.push_back(r);
  }
  if (t.rows.empty()) throw ParseError("rate table: no data rows");
  return t;
}

// Table row from a two-channel count summary (channels 0 and 1).
inline RateRow row_from_summary(const counting::CountSummary& s, double p_spdc_pw, Mode mode,
                                std::string label) {
  if (s.singles.size() < 2) throw DomainError("rate row: summary needs two channels");
  const auto& c = s.pair(0, 1);
  return {p_spdc_pw,  s.singles[0], s.singles_err[0], s.singles[1], s.singles_err[1],
          c.rate,     c.rate_err,   mode,            std::move(label), 0};
}

inline void write_rate_table(std::ostream& out, const RateTable& t) {
  out << rate_table_header << '\n';
  out.precision(10);
  for (const auto& r : t.rows) {
    out << r.p_spdc_pw << ',' << r.r_s1 << ',' << r.r_s1_err << ',' << r.r_s2 << ',' << r.r_s2_err << ','
        << r.r_coin << ',' << r.r_coin_err << ',' << to_string(r.mode) << ',' << r.label << '\n';
  }
}

// ---- fits ------------------------------------------------------------------

enum class Model { linear, quadratic };

inline const char* to_string(Model m) { return m == Model::linear ? "linear" : "quadratic"; }

enum class Quantity { coincidences, singles1, singles2 };

struct FitResult {
  Model model = Model::linear;
  std::vector<double> coefficients;  // c0 + c1 P + c2 P^2
  std::vector<double> std_errors;
  double chi2 = 0;
  double reduced_chi2 = 0;
  std::size_t dof = 0;
  bool weighted = true;
  std::vector<double> residuals;
};

inline std::pair<double, double> value_of(const RateRow& r, Quantity q) {
  switch (q) {
    case Quantity::singles1: return {r.r_s1, r.r_s1_err};
    case Quantity::singles2: return {r.r_s2, r.r_s2_err};
    case Quantity::coincidences: break;
  }
  return {r.r_coin, r.r_coin_err};
}

// Least squares in P_SPDC with free intercept, weighted by 1/err^2. If any
// row has zero uncertainty the fit is unweighted and the coefficient errors
// come from the residual scatter.
inline FitResult fit_rate_curve(const RateTable& tbl, Model model,
                                Quantity q = Quantity::coincidences) {
  const std::size_t p = model == Model::linear ? 2 : 3;
  const std::size_t n = tbl.rows.size();
  if (n < p + 1) {
    throw RankDeficientError(std::string(to_string(model)) + " fit needs at least " +
                             std::to_string(p + 1) + " rows, got " + std::to_string(n));
  }
  bool weighted = true;
  for (const auto& r : tbl.rows) {
    if (!(value_of(r, q).second > 0)) weighted = false;
  }
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = tbl.rows[i].p_spdc_pw;
    const auto [v, e] = value_of(tbl.rows[i], q);
    for (std::size_t k = 0; k < p; ++k) X(i, k) = std::pow(x, static_cast<double>(k));
    y(i) = v;
    w(i) = weighted ? 1.0 / (e * e) : 1.0;
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd A = sw.asDiagonal() * X;
  const Eigen::VectorXd b = sw.asDiagonal() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (static_cast<std::size_t>(qr.rank()) < p) {
    throw RankDeficientError(std::string(to_string(model)) + " fit: design matrix has rank " +
                             std::to_string(qr.rank()) + " < " + std::to_string(p) +
                             " (too few distinct P_SPDC values)");
  }
  const Eigen::VectorXd c = qr.solve(b);
  const Eigen::MatrixXd cov_unit = (A.transpose() * A).inverse();

  FitResult f;
  f.model = model;
  f.weighted = weighted;
  f.dof = n - p;
  const Eigen::VectorXd res = y - X * c;
  f.residuals.assign(res.data(), res.data() + n);
  f.chi2 = (res.array().square() * w.array()).sum();
  f.reduced_chi2 = f.dof ? f.chi2 / static_cast<double>(f.dof) : 0.0;
  const double scale = weighted ? 1.0 : f.reduced_chi2;
  for (std::size_t k = 0; k < p; ++k) {
    f.coefficients.push_back(c(k));
    f.std_errors.push_back(std::sqrt(scale * cov_unit(k, k)));
  }
  return f;
}

// ---- two-table statistics ----------------------------------------------------

struct AlignedRow {
  const RateRow* solv;
  const RateRow* samp;
};

inline std::string row_key(const RateRow& r) {
  std::ostringstream s;
  s.precision(12);
  s << to_string(r.mode) << '@' << r.p_spdc_pw << "pW";
  return s.str();
}

// Pairs rows by (P_SPDC, mode), in solvent order. Duplicates pair up in order
// of appearance.
inline std::vector<AlignedRow> align(const RateTable& solv, const RateTable& samp) {
  std::multimap<std::string, const RateRow*> pool;
  for (const auto& r : samp.rows) pool.emplace(row_key(r), &r);
  std::vector<AlignedRow> out;
  std::vector<std::string> unmatched;
  for (const auto& r : solv.rows) {
    auto it = pool.find(row_key(r));
    if (it == pool.end()) {
      unmatched.push_back("solvent " + row_key(r));
      continue;
    }
    out.push_back({&r, it->second});
    pool.erase(it);
  }
  for (const auto& [key, row] : pool) unmatched.push_back("sample " + key);
  if (!unmatched.empty()) {
    std::string msg = "tables are not row aligned; unmatched:";
    for (const auto& u : unmatched) msg += " " + u;
    throw AlignmentError(msg, unmatched);
  }
  return out;
}

struct AbsorptionPoint {
  double p_spdc_pw;
  Mode mode;
  double r_abs;
  double r_abs_err;
};

// R_abs = R_coin(solvent) - R_coin(sample), errors in quadrature.
inline std::vector<AbsorptionPoint> absorption_rate(const RateTable& solv, const RateTable& samp) {
  std::vector<AbsorptionPoint> out;
  for (const auto& a : align(solv, samp)) {
    out.push_back({a.solv->p_spdc_pw, a.solv->mode, a.solv->r_coin - a.samp->r_coin,
                   std::hypot(a.solv->r_coin_err, a.samp->r_coin_err)});
  }
  return out;
}

struct GammaPoint {
  double p_spdc_pw;
  Mode mode;
  bool skipped = false;
  std::string skip_reason;
  double gamma = 0;
  double gamma_err = 0;
};

// Gamma = 1 - (S1 S2 / C)_sample / (S1 S2 / C)_solvent, delta-method errors.
inline std::vector<GammaPoint> biphoton_ratio(const RateTable& solv, const RateTable& samp) {
  std::vector<GammaPoint> out;
  for (const auto& a : align(solv, samp)) {
    GammaPoint g;
    g.p_spdc_pw = a.solv->p_spdc_pw;
    g.mode = a.solv->mode;
    const RateRow* rows[2] = {a.samp, a.solv};
    for (const RateRow* r : rows) {
      if (!(r->r_s1 > 0 && r->r_s2 > 0 && r->r_coin > 0)) {
        g.skipped = true;
        g.skip_reason = std::string(r == a.samp ? "sample" : "solvent") +
                        (r->r_coin > 0 ? " singles rate is zero" : " coincidence rate is zero");
        break;
      }
    }
    if (!g.skipped) {
      const double q_samp = a.samp->r_s1 * a.samp->r_s2 / a.samp->r_coin;
      const double q_solv = a.solv->r_s1 * a.solv->r_s2 / a.solv->r_coin;
      const double ratio = q_samp / q_solv;
      g.gamma = 1.0 - ratio;
      double rel2 = 0;
      for (const RateRow* r : rows) {
        rel2 += std::pow(r->r_s1_err / r->r_s1, 2) + std::pow(r->r_s2_err / r->r_s2, 2) +
                std::pow(r->r_coin_err / r->r_coin, 2);
      }
      g.gamma_err = ratio * std::sqrt(rel2);
    }
    out.push_back(g);
  }
  return out;
}

// Monte Carlo cross-check of the Gamma errors: Gaussian resampling of all six
// rates per row. Skipped rows are passed through.
inline std::vector<GammaPoint> biphoton_ratio_mc(const RateTable& solv, const RateTable& samp,
                                                 std::size_t samples, std::uint64_t seed) {
  auto out = biphoton_ratio(solv, samp);
  const auto rows = align(solv, samp);
  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> z;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (out[k].skipped || samples < 2) continue;
    const RateRow& a = *rows[k].samp;
    const RateRow& b = *rows[k].solv;
    double sum = 0, sum2 = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      const double s1a = a.r_s1 + a.r_s1_err * z(rng), s2a = a.r_s2 + a.r_s2_err * z(rng);
      const double ca = a.r_coin + a.r_coin_err * z(rng);
      const double s1b = b.r_s1 + b.r_s1_err * z(rng), s2b = b.r_s2 + b.r_s2_err * z(rng);
      const double cb = b.r_coin + b.r_coin_err * z(rng);
      const double g = 1.0 - (s1a * s2a / ca) / (s1b * s2b / cb);
      sum += g;
      sum2 += g * g;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    out[k].gamma = mean;
    out[k].gamma_err = std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1)));
  }
  return out;
}

inline constexpr double flag_relative_singles_error = 0.05;

struct FlaggedRow {
  std::size_t index;
  std::size_t line;
  std::string reason;
};

// Rows whose singles carry more than 5 % relative error.
inline std::vector<FlaggedRow> flag_rows(const RateTable& t,
                                         double threshold = flag_relative_singles_error) {
  std::vector<FlaggedRow> out;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& r = t.rows[k];
    const double e1 = r.r_s1 > 0 ? r.r_s1_err / r.r_s1 : 0.0;
    const double e2 = r.r_s2 > 0 ? r.r_s2_err / r.r_s2 : 0.0;
    const double worst = std::max(e1, e2);
    if (worst > threshold) {
      std::ostringstream s;
      s.precision(3);
      s << "relative singles error " << worst * 100.0 << " % exceeds " << threshold * 100.0 << " %";
      out.push_back({k, r.line, s.str()});
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const FitResult& f) {
  return {{"model", to_string(f.model)},
          {"coefficients", f.coefficients},
          {"std_errors", f.std_errors},
          {"chi2", f.chi2},
          {"reduced_chi2", f.reduced_chi2},
          {"dof", f.dof},
          {"weighted", f.weighted},
          {"residuals", f.residuals}};
}

}  // namespace spdclab::analysis
