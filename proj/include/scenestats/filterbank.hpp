#pragma once

// Half-cosine filterbanks on a log-frequency axis. Channel centers sit on a
// uniform log-frequency grid strictly inside the span; each magnitude
// response is a single half-cosine lobe whose support reaches exactly to the
// neighboring centers, so squared responses tile to unity between the first
// and last center. Designs are deterministic: the same parameters always
// produce bit-identical responses.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace scenestats {

class CosineLogFilterbank {
 public:
  CosineLogFilterbank(int num_channels, double lo_hz, double hi_hz)
      : num_channels_(num_channels), lo_hz_(lo_hz), hi_hz_(hi_hz) {
    if (num_channels < 1) throw std::invalid_argument("filterbank: need at least one channel");
    if (!(lo_hz > 0.0) || !(hi_hz > lo_hz))
      throw std::invalid_argument("filterbank: require 0 < lo < hi");
    // num_channels + 2 knots spanning [lo, hi]; centers are the interior knots.
    log_step_ = (std::log(hi_hz) - std::log(lo_hz)) / (num_channels + 1);
    log_centers_.resize(num_channels);
    for (int c = 0; c < num_channels; ++c) log_centers_[c] = std::log(lo_hz) + (c + 1) * log_step_;
  }

  int num_channels() const { return num_channels_; }
  double lo_hz() const { return lo_hz_; }
  double hi_hz() const { return hi_hz_; }
  double log_step() const { return log_step_; }
  double center(int c) const { return std::exp(log_centers_[c]); }

  std::vector<double> centers() const {
    std::vector<double> out(num_channels_);
    for (int c = 0; c < num_channels_; ++c) out[c] = center(c);
    return out;
  }

  /// Magnitude response of channel c at frequency f (Hz).
  double response(int c, double f) const {
    if (f <= 0.0) return 0.0;
    const double d = std::abs(std::log(f) - log_centers_[c]);
    if (d >= log_step_) return 0.0;
    return std::cos(0.5 * std::numbers::pi * d / log_step_);
  }

  /// 3 dB quality factor of the lobes (center / half-power bandwidth);
  /// identical for every channel since the lobes are constant width in
  /// log frequency.
  double quality_factor() const { return 1.0 / (2.0 * std::sinh(0.5 * log_step_)); }

  /// Response sampled over a full-length FFT grid (bins 0..fft_size-1 at
  /// sample_rate). The upper half mirrors the lower so that multiplying a
  /// complex spectrum leaves a real signal real (zero-phase filtering).
  std::vector<double> sample_response(int c, int fft_size, double sample_rate) const {
    std::vector<double> h(fft_size, 0.0);
    const double df = sample_rate / fft_size;
    for (int k = 0; k <= fft_size / 2; ++k) {
      const double v = response(c, k * df);
      h[k] = v;
      if (k > 0 && k < fft_size - k) h[fft_size - k] = v;
    }
    return h;
  }

 private:
  int num_channels_;
  double lo_hz_, hi_hz_;
  double log_step_ = 0.0;
  std::vector<double> log_centers_;
};

/// Cochlear filterbank: per-channel magnitude responses sampled on the FFT
/// grid of one analysis segment.
struct CochlearFilterbank {
  CosineLogFilterbank bank;
  double sample_rate = 0.0;
  int fft_size = 0;
  std::vector<std::vector<double>> freq_responses;  // [channel][bin]

  static CochlearFilterbank design(double sample_rate, int fft_size, int num_channels = 32,
                                   double lo_hz = 20.0, double hi_hz = 10000.0) {
    if (sample_rate < 2.0 * hi_hz)
      throw std::invalid_argument("cochlear filterbank: sample rate too low for the " +
                                  std::to_string(hi_hz) + " Hz edge");
    CochlearFilterbank fb{CosineLogFilterbank(num_channels, lo_hz, hi_hz), sample_rate, fft_size,
                          {}};
    fb.freq_responses.reserve(num_channels);
    for (int c = 0; c < num_channels; ++c)
      fb.freq_responses.push_back(fb.bank.sample_response(c, fft_size, sample_rate));
    return fb;
  }

  int num_channels() const { return bank.num_channels(); }
  double center(int c) const { return bank.center(c); }
};

/// Modulation filterbank on the envelope-rate FFT grid.
struct ModulationFilterbank {
  CosineLogFilterbank bank;
  double env_rate = 0.0;
  int fft_size = 0;
  std::vector<std::vector<double>> freq_responses;  // [band][bin]

  static ModulationFilterbank design(double env_rate, int fft_size, int num_bands = 20,
                                     double lo_hz = 0.5, double hi_hz = 200.0) {
    ModulationFilterbank fb{CosineLogFilterbank(num_bands, lo_hz, hi_hz), env_rate, fft_size, {}};
    fb.freq_responses.reserve(num_bands);
    for (int b = 0; b < num_bands; ++b)
      fb.freq_responses.push_back(fb.bank.sample_response(b, fft_size, env_rate));
    return fb;
  }

  int num_bands() const { return bank.num_channels(); }
  double center(int b) const { return bank.center(b); }
  double quality_factor() const { return bank.quality_factor(); }
};

}  // namespace scenestats
