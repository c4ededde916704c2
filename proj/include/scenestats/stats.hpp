#pragma once

// Summary statistics measured on the frontend outputs, and their assembly
// into a fixed-layout feature vector.
//
// Conventions used throughout:
//  * population (1/N) moments;
//  * any statistic that would divide by a zero variance is defined as 0,
//    so silent segments still produce finite vectors;
//  * correlation entries are clamped to [-1, 1] against rounding overshoot.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scenestats/frontend.hpp"
#include "scenestats/serialize.hpp"

namespace scenestats {

/// Machine-readable index map of the statistic groups inside an assembled
/// feature vector. Group order and sizes are fixed by the construction
/// parameters; the hash ties serialized features and models to the layout
/// they were computed with.
struct FeatureLayout {
  struct Group {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    std::size_t size() const { return end - begin; }
  };

  int num_channels = 32;
  int num_bands = 20;
  std::vector<int> env_corr_offsets;        // channel lags for envelope correlations
  std::vector<int> mod_corr_channel_offsets;  // channel offsets for modulation correlations
  std::vector<int> mod_corr_band_indices;   // 0-based modulation band indices
  std::vector<Group> groups;
  std::size_t total_dim = 0;

  static FeatureLayout make(int num_channels = 32, int num_bands = 20,
                            std::vector<int> env_corr_offsets = {1, 2, 3, 5, 8, 11, 16, 21},
                            std::vector<int> mod_corr_channel_offsets = {1, 2},
                            std::vector<int> mod_corr_band_indices = {1, 2, 3, 4, 5, 6}) {
    FeatureLayout layout;
    layout.num_channels = num_channels;
    layout.num_bands = num_bands;
    layout.env_corr_offsets = std::move(env_corr_offsets);
    layout.mod_corr_channel_offsets = std::move(mod_corr_channel_offsets);
    layout.mod_corr_band_indices = std::move(mod_corr_band_indices);
    std::sort(layout.env_corr_offsets.begin(), layout.env_corr_offsets.end());
    std::sort(layout.mod_corr_channel_offsets.begin(), layout.mod_corr_channel_offsets.end());
    std::sort(layout.mod_corr_band_indices.begin(), layout.mod_corr_band_indices.end());

    for (int d : layout.env_corr_offsets)
      if (d < 1 || d >= num_channels)
        throw std::invalid_argument("layout: envelope correlation lag out of range");
    for (int d : layout.mod_corr_channel_offsets)
      if (d < 1 || d >= num_channels)
        throw std::invalid_argument("layout: modulation correlation channel offset out of range");
    for (int b : layout.mod_corr_band_indices)
      if (b < 0 || b >= num_bands)
        throw std::invalid_argument("layout: modulation correlation band index out of range");

    const auto nc = static_cast<std::size_t>(num_channels);
    std::size_t env_corr_dim = 0;
    for (int d : layout.env_corr_offsets) env_corr_dim += nc - static_cast<std::size_t>(d);
    std::size_t mod_corr_dim = 0;
    for ([[maybe_unused]] int b : layout.mod_corr_band_indices)
      for (int d : layout.mod_corr_channel_offsets) mod_corr_dim += nc - static_cast<std::size_t>(d);

    std::size_t at = 0;
    auto add = [&](std::string name, std::size_t size) {
      layout.groups.push_back({std::move(name), at, at + size});
      at += size;
    };
    add("subband_variance", nc);
    add("env_mean", nc);
    add("env_variance", nc);
    add("env_skew", nc);
    add("modulation_power", nc * static_cast<std::size_t>(num_bands));
    add("env_correlation", env_corr_dim);
    add("modulation_correlation", mod_corr_dim);
    layout.total_dim = at;
    return layout;
  }

  const Group& group(std::string_view name) const {
    for (const auto& g : groups)
      if (g.name == name) return g;
    throw std::invalid_argument("layout: unknown group '" + std::string(name) + "'");
  }

  /// Stable content hash; embedded in every serialized feature record and
  /// model so that stale artifacts are rejected.
  std::uint64_t hash() const {
    std::ostringstream os;
    os << "layout/v1;" << num_channels << ';' << num_bands << ";env_off";
    for (int d : env_corr_offsets) os << ',' << d;
    os << ";mod_off";
    for (int d : mod_corr_channel_offsets) os << ',' << d;
    os << ";mod_bands";
    for (int b : mod_corr_band_indices) os << ',' << b;
    os << ";groups";
    for (const auto& g : groups) os << ',' << g.name << ':' << g.begin << '-' << g.end;
    return io::fnv1a(os.str());
  }
};

/// One segment's assembled statistics plus provenance.
struct AssVector {
  std::vector<double> values;
  std::string source_id;
  int channel_index = 0;
  double start_time = 0.0;
  std::string label;
};

namespace moments {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Population (1/N) variance.
inline double variance(std::span<const double> x, double m) {
  double s = 0.0;
  for (double v : x) {
    const double d = v - m;
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) { return variance(x, mean(x)); }

/// Standardized third moment; 0 when the variance is 0.
inline double skewness(std::span<const double> x, double m, double var) {
  if (var <= 0.0) return 0.0;
  double s = 0.0;
  for (double v : x) {
    const double d = v - m;
    s += d * d * d;
  }
  s /= static_cast<double>(x.size());
  return s / (var * std::sqrt(var));
}

/// Pearson correlation; 0 when either side has zero variance, clamped to
/// [-1, 1] against rounding overshoot.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace moments

/// Subband variance plus envelope mean / squared coefficient of variation /
/// skew, one value per channel per group (4 x num_channels total).
inline std::vector<double> marginal_moments(const std::vector<std::vector<double>>& subbands,
                                            const EnvelopeSet& env) {
  const std::size_t nc = subbands.size();
  if (env.num_channels() != nc)
    throw std::invalid_argument("marginal_moments: channel count mismatch");
  std::vector<double> out(4 * nc);
  for (std::size_t c = 0; c < nc; ++c) {
    out[c] = moments::variance(subbands[c]);
    const auto& e = env.envelopes[c];
    const double m = moments::mean(e);
    const double var = moments::variance(e, m);
    out[nc + c] = m;
    out[2 * nc + c] = (m == 0.0 || var <= 0.0) ? 0.0 : var / (m * m);
    out[3 * nc + c] = moments::skewness(e, m, var);
  }
  return out;
}

/// Modulation power: Var(mod signal) / Var(envelope) per (channel, band),
/// channel-major; 0 where the envelope variance is 0.
inline std::vector<double> modulation_power(const ModulationSet& mods, const EnvelopeSet& env) {
  if (static_cast<std::size_t>(mods.channels) != env.num_channels())
    throw std::invalid_argument("modulation_power: channel count mismatch");
  if (mods.frames != env.frames())
    throw std::invalid_argument("modulation_power: frame count mismatch");
  std::vector<double> out(static_cast<std::size_t>(mods.channels) * mods.bands);
  for (int c = 0; c < mods.channels; ++c) {
    const double env_var = moments::variance(env.envelopes[c]);
    for (int b = 0; b < mods.bands; ++b) {
      const double mv = env_var <= 0.0 ? 0.0 : moments::variance(mods.at(c, b)) / env_var;
      out[static_cast<std::size_t>(c) * mods.bands + b] = mv;
    }
  }
  return out;
}

/// Cross-channel envelope correlations for the requested channel lags,
/// ordered by lag ascending then channel ascending.
inline std::vector<double> envelope_correlations(const EnvelopeSet& env,
                                                 std::span<const int> offsets) {
  const int nc = static_cast<int>(env.num_channels());
  std::vector<double> out;
  for (int d : offsets) {
    if (d < 1 || d >= nc) throw std::invalid_argument("envelope_correlations: lag out of range");
    for (int i = 0; i + d < nc; ++i)
      out.push_back(moments::pearson(env.envelopes[i], env.envelopes[i + d]));
  }
  return out;
}

/// Same-band modulation correlations across nearby channels, ordered by
/// band ascending, then channel offset, then channel.
inline std::vector<double> modulation_correlations(const ModulationSet& mods,
                                                   std::span<const int> channel_offsets,
                                                   std::span<const int> band_indices) {
  std::vector<double> out;
  for (int b : band_indices) {
    if (b < 0 || b >= mods.bands)
      throw std::invalid_argument("modulation_correlations: band index out of range");
    for (int d : channel_offsets) {
      if (d < 1 || d >= mods.channels)
        throw std::invalid_argument("modulation_correlations: channel offset out of range");
      for (int i = 0; i + d < mods.channels; ++i)
        out.push_back(moments::pearson(mods.at(i, b), mods.at(i + d, b)));
    }
  }
  return out;
}

/// Concatenates the statistic groups in layout order. Sizes must match the
/// layout exactly.
inline std::vector<double> assemble_ass_vector(const FeatureLayout& layout,
                                               std::span<const double> marginals,
                                               std::span<const double> mod_power,
                                               std::span<const double> env_corr,
                                               std::span<const double> mod_corr) {
  const auto nc = static_cast<std::size_t>(layout.num_channels);
  auto check = [](std::string_view what, std::size_t got, std::size_t want) {
    if (got != want)
      throw std::invalid_argument("assemble: " + std::string(what) + " group has " +
                                  std::to_string(got) + " values, layout expects " +
                                  std::to_string(want));
  };
  check("marginal moments", marginals.size(), 4 * nc);
  check("modulation power", mod_power.size(), layout.group("modulation_power").size());
  check("envelope correlation", env_corr.size(), layout.group("env_correlation").size());
  check("modulation correlation", mod_corr.size(), layout.group("modulation_correlation").size());

  std::vector<double> v;
  v.reserve(layout.total_dim);
  v.insert(v.end(), marginals.begin(), marginals.end());
  v.insert(v.end(), mod_power.begin(), mod_power.end());
  v.insert(v.end(), env_corr.begin(), env_corr.end());
  v.insert(v.end(), mod_corr.begin(), mod_corr.end());
  return v;
}

/// All statistics of one frontend output, assembled in layout order.
inline std::vector<double> compute_statistics(const FrontendOutput& fo,
                                              const FeatureLayout& layout) {
  if (static_cast<int>(fo.subbands.size()) != layout.num_channels)
    throw std::invalid_argument("compute_statistics: channel count differs from layout");
  if (fo.modulation.bands != layout.num_bands)
    throw std::invalid_argument("compute_statistics: band count differs from layout");
  const auto marginals = marginal_moments(fo.subbands, fo.envelopes);
  const auto power = modulation_power(fo.modulation, fo.envelopes);
  const auto ecorr = envelope_correlations(fo.envelopes, layout.env_corr_offsets);
  const auto mcorr = modulation_correlations(fo.modulation, layout.mod_corr_channel_offsets,
                                             layout.mod_corr_band_indices);
  return assemble_ass_vector(layout, marginals, power, ecorr, mcorr);
}

}  // namespace scenestats
