#pragma once

// Detection-chain model, Monte Carlo time-tag simulation and coincidence
// estimators.
//
// Timestamps are integer picoseconds. Channel 0 is the first detector (the
// herald in the three-channel arrangement).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "json.hpp"
#include "spdclab/error.hpp"
#include "spdclab/parallel.hpp"
#include "spdclab/units.hpp"

namespace spdclab::counting {

using Timestamp = std::int64_t;  // ps
inline constexpr double ps_per_s = 1e12;

enum class Topology {
  pair,      // coupler -> two detectors
  heralded,  // herald detector plus a second coupler -> two detectors
};

inline const char* to_string(Topology t) { return t == Topology::pair ? "pair" : "heralded"; }

struct DetectionChain {
  double eta_coup = 0.9;
  double eta_inser = 0.43;
  double eta_det = 0.6;
  double dark_rate_per_s = 0.0;  // every channel
  units::Time window = 1.0 * units::ns;
  units::Time integration = 100.0 * units::ms;
  units::Time jitter_fwhm = 0.35 * units::ns;  // Gaussian, per click
  Topology topology = Topology::pair;

  std::size_t channels() const { return topology == Topology::pair ? 2 : 3; }

  void validate() const {
    for (double e : {eta_coup, eta_inser, eta_det}) {
      if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("detection chain: efficiencies must lie in [0, 1]");
    }
    if (!(dark_rate_per_s >= 0.0)) throw ConfigError("detection chain: dark rate must be >= 0");
    if (!(window.si() > 0)) throw ConfigError("detection chain: coincidence window must be > 0");
    if (!(integration.si() > 0)) throw ConfigError("detection chain: integration time must be > 0");
    if (!(jitter_fwhm.si() >= 0)) throw ConfigError("detection chain: jitter must be >= 0");
  }
};

struct Efficiencies {
  double singles;
  double coincidences;
};

// Singles: eta_coup eta_inser eta_det. Coincidences: the pair is coupled once,
// each photon then passes its own splitter arm and detector.
inline Efficiencies chain_efficiencies(const DetectionChain& c) {
  return {c.eta_coup * c.eta_inser * c.eta_det,
          c.eta_coup * c.eta_inser * c.eta_inser * c.eta_det * c.eta_det};
}

struct SourceRates {
  double pairs_per_s_per_uW = 4.5e5;
  double pump_uW = 0.0;

  double pair_rate() const { return pairs_per_s_per_uW * pump_uW; }
  void validate() const {
    if (!(pairs_per_s_per_uW >= 0.0) || !(pump_uW >= 0.0)) {
      throw ConfigError("source: rates and pump power must be >= 0");
    }
  }
};

// Optional sample between source and coupler.
struct SampleInteraction {
  double photon_transmission = 1.0;  // independent per-photon loss
  double pair_removal = 0.0;         // probability that a pair is absorbed as a whole

  void validate() const {
    if (!(photon_transmission >= 0.0 && photon_transmission <= 1.0) ||
        !(pair_removal >= 0.0 && pair_removal <= 1.0)) {
      throw ConfigError("sample: probabilities must lie in [0, 1]");
    }
  }
};

struct TagStream {
  std::vector<std::vector<Timestamp>> channels;
  units::Time integration = 100.0 * units::ms;
  std::uint64_t seed = 0;
};

struct Coincidence {
  std::size_t a = 0, b = 0;
  std::uint64_t counts = 0;
  double rate = 0.0;        // 1/s
  double rate_err = 0.0;
  double accidental = 0.0;  // 1/s, estimate
  double accidental_err = 0.0;
};

struct CountSummary {
  double integration_s = 0.0;
  double window_s = 0.0;
  std::vector<std::uint64_t> singles_counts;
  std::vector<double> singles;  // 1/s
  std::vector<double> singles_err;
  std::vector<Coincidence> coincidences;  // (0,1), then (0,2), (1,2) for three channels
  bool has_triples = false;
  std::uint64_t triple_counts = 0;
  double triples = 0.0;
  double triples_err = 0.0;
  bool corrected = false;
  bool clamped = false;
  std::vector<std::string> warnings;

  const Coincidence& pair(std::size_t a, std::size_t b) const {
    for (const auto& c : coincidences) {
      if ((c.a == a && c.b == b) || (c.a == b && c.b == a)) return c;
    }
    throw DomainError("count summary: no coincidence entry for channels " + std::to_string(a) +
                      "," + std::to_string(b));
  }
};

// ---- seeding ---------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent seed for sub-run `index` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

// ---- simulation ------------------------------------------------------------

inline constexpr double max_expected_clicks = 1e8;

// One integration window of clicks. The random draws happen in a fixed order
// so a seed fully determines the stream.
inline TagStream simulate_tags(const SourceRates& src, const DetectionChain& chain,
                               std::uint64_t seed, const SampleInteraction& sample = {}) {
  src.validate();
  chain.validate();
  sample.validate();
  const double T = chain.integration.si();
  const std::size_t nch = chain.channels();
  const double expected = (2.0 * src.pair_rate() + chain.dark_rate_per_s * nch) * T;
  if (expected >= max_expected_clicks) {
    throw GuardError("simulation guard: " + std::to_string(expected) +
                     " expected events per window exceeds the limit of 1e8");
  }

  boost::random::mt19937_64 rng(seed);
  boost::random::uniform_01<double> uni;
  const double sigma_ps = chain.jitter_fwhm.si() * ps_per_s / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  boost::random::normal_distribution<double> jitter(0.0, sigma_ps > 0 ? sigma_ps : 1.0);
  const double arm = chain.eta_inser * chain.eta_det;
  const double t = sample.photon_transmission;

  TagStream ts;
  ts.integration = chain.integration;
  ts.seed = seed;
  ts.channels.assign(nch, {});

  auto emit = [&](std::size_t ch, double time_s) {
    double ps = time_s * ps_per_s;
    if (sigma_ps > 0) ps += jitter(rng);
    ts.channels[ch].push_back(static_cast<Timestamp>(std::llround(ps)));
  };

  const double mean_pairs = src.pair_rate() * T;
  if (mean_pairs > 0) {
    const auto n = boost::random::poisson_distribution<std::uint64_t, double>(mean_pairs)(rng);
    for (std::uint64_t k = 0; k < n; ++k) {
      const double time = uni(rng) * T;
      // Draws are always consumed so that every pair costs the same number
      // of variates regardless of its fate.
      const bool removed = uni(rng) < sample.pair_removal;
      const bool s_through = uni(rng) < t;
      const bool i_through = uni(rng) < t;
      const bool coupled = uni(rng) < chain.eta_coup;
      const bool s_det = uni(rng) < arm;
      const bool i_det = uni(rng) < arm;
      const bool route_2 = uni(rng) < 0.5;
      if (removed || !coupled) continue;
      if (s_through && s_det) emit(0, time);
      if (i_through && i_det) emit(chain.topology == Topology::heralded && route_2 ? 2 : 1, time);
    }
  }
  const double mean_dark = chain.dark_rate_per_s * T;
  for (std::size_t ch = 0; ch < nch; ++ch) {
    if (mean_dark <= 0) break;
    const auto n = boost::random::poisson_distribution<std::uint64_t, double>(mean_dark)(rng);
    for (std::uint64_t k = 0; k < n; ++k) {
      ts.channels[ch].push_back(static_cast<Timestamp>(std::floor(uni(rng) * T * ps_per_s)));
    }
  }

  // Clicks pushed outside the window by jitter are dropped; a second click
  // in the same picosecond bin is merged.
  const Timestamp end = static_cast<Timestamp>(std::llround(T * ps_per_s));
  for (auto& c : ts.channels) {
    std::sort(c.begin(), c.end());
    c.erase(std::remove_if(c.begin(), c.end(), [&](Timestamp x) { return x < 0 || x >= end; }),
            c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  return ts;
}

// ---- estimators ------------------------------------------------------------

inline void check_sorted(const std::vector<Timestamp>& c, std::size_t ch) {
  for (std::size_t k = 1; k < c.size(); ++k) {
    if (c[k] <= c[k - 1]) {
      throw UnsortedStreamError("channel " + std::to_string(ch) +
                                ": timestamps not strictly increasing at index " +
                                std::to_string(k));
    }
  }
}

// Greedy earliest-match pairing: each click of `a`, in time order, takes the
// earliest unused click of `b` with |tb - ta| <= window.
inline std::uint64_t match_pairs(const std::vector<Timestamp>& a, const std::vector<Timestamp>& b,
                                 Timestamp window) {
  std::uint64_t n = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const Timestamp d = b[j] - a[i];
    if (d < -window) {
      ++j;
    } else if (d > window) {
      ++i;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

// Herald clicks with at least one click on each of the other two channels
// within the window.
inline std::uint64_t match_triples(const std::vector<Timestamp>& h, const std::vector<Timestamp>& c1,
                                   const std::vector<Timestamp>& c2, Timestamp window) {
  auto near = [window](const std::vector<Timestamp>& c, Timestamp x) {
    auto it = std::lower_bound(c.begin(), c.end(), x - window);
    return it != c.end() && *it <= x + window;
  };
  std::uint64_t n = 0;
  for (Timestamp x : h) n += near(c1, x) && near(c2, x);
  return n;
}

// Accidental rate for a coincidence condition |dt| <= window: 2 R_a R_b window.
inline double accidental_rate(double ra, double rb, double window_s) {
  return 2.0 * ra * rb * window_s;
}

inline CountSummary count_coincidences(const TagStream& tags, units::Time window) {
  if (!(window.si() > 0)) throw ConfigError("coincidence window must be > 0");
  if (tags.channels.size() < 2) throw DomainError("coincidence counting needs at least two channels");
  for (std::size_t ch = 0; ch < tags.channels.size(); ++ch) check_sorted(tags.channels[ch], ch);

  const double T = tags.integration.si();
  const Timestamp w = static_cast<Timestamp>(std::llround(window.si() * ps_per_s));
  CountSummary s;
  s.integration_s = T;
  s.window_s = window.si();
  for (const auto& c : tags.channels) {
    s.singles_counts.push_back(c.size());
    s.singles.push_back(static_cast<double>(c.size()) / T);
    s.singles_err.push_back(std::sqrt(static_cast<double>(c.size())) / T);
  }
  auto add_pair = [&](std::size_t a, std::size_t b) {
    Coincidence c;
    c.a = a;
    c.b = b;
    c.counts = match_pairs(tags.channels[a], tags.channels[b], w);
    c.rate = static_cast<double>(c.counts) / T;
    c.rate_err = std::sqrt(static_cast<double>(c.counts)) / T;
    c.accidental = accidental_rate(s.singles[a], s.singles[b], s.window_s);
    c.accidental_err = accidental_rate(1.0, 1.0, s.window_s) *
                       std::hypot(s.singles_err[a] * s.singles[b], s.singles[a] * s.singles_err[b]);
    s.coincidences.push_back(c);
  };
  add_pair(0, 1);
  if (tags.channels.size() >= 3) {
    add_pair(0, 2);
    add_pair(1, 2);
    s.has_triples = true;
    s.triple_counts = match_triples(tags.channels[0], tags.channels[1], tags.channels[2], w);
    s.triples = static_cast<double>(s.triple_counts) / T;
    s.triples_err = std::sqrt(static_cast<double>(s.triple_counts)) / T;
  }
  return s;
}

// Sum of counts over consecutive windows of equal setup.
inline CountSummary aggregate(const std::vector<CountSummary>& parts) {
  if (parts.empty()) throw DomainError("aggregate: no windows");
  CountSummary s = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto& p = parts[k];
    if (p.singles_counts.size() != s.singles_counts.size() || p.window_s != s.window_s) {
      throw DomainError("aggregate: windows differ in layout");
    }
    s.integration_s += p.integration_s;
    for (std::size_t ch = 0; ch < s.singles_counts.size(); ++ch) s.singles_counts[ch] += p.singles_counts[ch];
    for (std::size_t c = 0; c < s.coincidences.size(); ++c) s.coincidences[c].counts += p.coincidences[c].counts;
    s.triple_counts += p.triple_counts;
  }
  const double T = s.integration_s;
  for (std::size_t ch = 0; ch < s.singles_counts.size(); ++ch) {
    const double n = static_cast<double>(s.singles_counts[ch]);
    s.singles[ch] = n / T;
    s.singles_err[ch] = std::sqrt(n) / T;
  }
  for (auto& c : s.coincidences) {
    const double n = static_cast<double>(c.counts);
    c.rate = n / T;
    c.rate_err = std::sqrt(n) / T;
    c.accidental = accidental_rate(s.singles[c.a], s.singles[c.b], s.window_s);
    c.accidental_err = accidental_rate(1.0, 1.0, s.window_s) *
                       std::hypot(s.singles_err[c.a] * s.singles[c.b], s.singles[c.a] * s.singles_err[c.b]);
  }
  s.triples = static_cast<double>(s.triple_counts) / T;
  s.triples_err = std::sqrt(static_cast<double>(s.triple_counts)) / T;
  return s;
}

// `windows` independent integration windows, window w seeded with
// derive_seed(seed, w). Identical output for any thread count.
inline std::vector<CountSummary> simulate_windows(const SourceRates& src, const DetectionChain& chain,
                                                  std::uint64_t seed, std::size_t windows,
                                                  unsigned threads = 1,
                                                  const SampleInteraction& sample = {}) {
  std::vector<CountSummary> out(windows);
  parallel_for(windows, threads, [&](std::size_t w) {
    out[w] = count_coincidences(simulate_tags(src, chain, derive_seed(seed, w), sample), chain.window);
  });
  return out;
}

struct Estimate {
  double value = 0.0;
  double err = 0.0;
};

// g2(0) = R_h R_h12 / (R_h1 R_h2), first-order propagation of the Poisson
// errors of the four counts. A zero triple count enters with an error of one
// count.
inline Estimate heralded_g2(const CountSummary& s) {
  if (!s.has_triples) throw DomainError("heralded g2 needs a three-channel summary");
  const auto& h1 = s.pair(0, 1);
  const auto& h2 = s.pair(0, 2);
  const std::vector<std::uint64_t> raw{s.singles_counts[0], s.triple_counts, h1.counts, h2.counts};
  if (h1.rate <= 0 || h2.rate <= 0) {
    throw UndefinedEstimateError("heralded g2 undefined: herald coincidence rate is zero", raw);
  }
  const double rh = s.singles[0], r12 = s.triples, r1 = h1.rate, r2 = h2.rate;
  const double T = s.integration_s;
  const double e_h = s.singles_err[0];
  const double e_12 = s.triple_counts ? s.triples_err : 1.0 / T;
  Estimate g;
  g.value = rh * r12 / (r1 * r2);
  const double d_h = r12 / (r1 * r2);
  const double d_12 = rh / (r1 * r2);
  const double d_1 = g.value / r1;
  const double d_2 = g.value / r2;
  g.err = std::sqrt(d_h * d_h * e_h * e_h + d_12 * d_12 * e_12 * e_12 +
                    d_1 * d_1 * h1.rate_err * h1.rate_err + d_2 * d_2 * h2.rate_err * h2.rate_err);
  return g;
}

// Singles minus dark rates, coincidences minus the accidental estimate.
// Negative results are clamped to zero and flagged.
inline CountSummary correct_rates(const CountSummary& in, const std::vector<double>& dark_per_s) {
  if (dark_per_s.size() != in.singles.size()) {
    throw ConfigError("correct_rates: need one dark rate per channel");
  }
  CountSummary s = in;
  const double T = s.integration_s;
  for (std::size_t ch = 0; ch < s.singles.size(); ++ch) {
    const double d = dark_per_s[ch];
    if (d < 0) throw ConfigError("correct_rates: dark rate must be >= 0");
    s.singles[ch] = in.singles[ch] - d;
    s.singles_err[ch] = std::sqrt(static_cast<double>(in.singles_counts[ch]) + d * T) / T;
    if (s.singles[ch] < 0) {
      s.singles[ch] = 0;
      s.clamped = true;
      s.warnings.push_back("channel " + std::to_string(ch) + ": dark rate exceeds measured singles");
    }
  }
  for (auto& c : s.coincidences) {
    c.rate = c.rate - c.accidental;
    c.rate_err = std::hypot(c.rate_err, c.accidental_err);
    if (c.rate < 0) {
      c.rate = 0;
      s.clamped = true;
      s.warnings.push_back("coincidence " + std::to_string(c.a) + "-" + std::to_string(c.b) +
                           ": accidental estimate exceeds measured rate");
    }
  }
  s.corrected = true;
  return s;
}

// ---- I/O -------------------------------------------------------------------

// `channel,timestamp_ns`, sorted by channel then time.
inline void write_tags_csv(std::ostream& out, const TagStream& ts) {
  out << "channel,timestamp_ns\n";
  for (std::size_t ch = 0; ch < ts.channels.size(); ++ch) {
    for (Timestamp t : ts.channels[ch]) {
      const Timestamp whole = t / 1000, frac = t % 1000;
      out << ch << ',' << whole << '.' << (frac < 100 ? (frac < 10 ? "00" : "0") : "") << frac << '\n';
    }
  }
}

inline TagStream read_tags_csv(std::istream& in, units::Time integration) {
  TagStream ts;
  ts.integration = integration;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("tag stream: empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "channel,timestamp_ns") throw ParseError("tag stream: bad header", line_no);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("tag stream: expected two fields", line_no);
    std::size_t ch = 0;
    double ns = 0;
    try {
      std::size_t used = 0;
      const long long c = std::stoll(line.substr(0, comma), &used);
      if (used != comma || c < 0) throw std::invalid_argument("channel");
      ch = static_cast<std::size_t>(c);
      const std::string rest = line.substr(comma + 1);
      ns = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("time");
    } catch (const std::exception&) {
      throw ParseError("tag stream: malformed row", line_no);
    }
    if (ch >= 16) throw ParseError("tag stream: channel id out of range", line_no);
    if (ts.channels.size() <= ch) ts.channels.resize(ch + 1);
    ts.channels[ch].push_back(static_cast<Timestamp>(std::llround(ns * 1000.0)));
  }
  for (std::size_t ch = 0; ch < ts.channels.size(); ++ch) check_sorted(ts.channels[ch], ch);
  return ts;
}

inline nlohmann::ordered_json to_json(const CountSummary& s) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["integration_s"] = s.integration_s;
  j["coincidence_window_ns"] = s.window_s * 1e9;
  j["corrected"] = s.corrected;
  ordered_json singles = ordered_json::array();
  for (std::size_t ch = 0; ch < s.singles.size(); ++ch) {
    singles.push_back({{"channel", ch},
                       {"counts", s.singles_counts[ch]},
                       {"rate_per_s", s.singles[ch]},
                       {"rate_err_per_s", s.singles_err[ch]}});
  }
  j["singles"] = singles;
  ordered_json coin = ordered_json::array();
  for (const auto& c : s.coincidences) {
    coin.push_back({{"channels", {c.a, c.b}},
                    {"counts", c.counts},
                    {"rate_per_s", c.rate},
                    {"rate_err_per_s", c.rate_err},
                    {"accidental_per_s", c.accidental},
                    {"accidental_err_per_s", c.accidental_err}});
  }
  j["coincidences"] = coin;
  if (s.has_triples) {
    j["triples"] = {{"counts", s.triple_counts},
                    {"rate_per_s", s.triples},
                    {"rate_err_per_s", s.triples_err}};
  } else {
    j["triples"] = nullptr;
  }
  j["clamped"] = s.clamped;
  j["warnings"] = s.warnings;
  return j;
}

}  // namespace spdclab::counting
