#pragma once

// Auditory frontend: decomposes a segment into subband signals, compressed
// subband envelopes and modulation-band signals.
//
// Filtering is zero-phase: one FFT of the whole segment, multiplication by
// the sampled magnitude response, inverse FFT. Envelopes come from the
// magnitude of the analytic signal (computed directly from the one-sided
// masked spectrum), are compressed by a fixed power law, low-pass filtered
// below the envelope Nyquist and decimated to the envelope rate.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "scenestats/audio.hpp"
#include "scenestats/fft.hpp"
#include "scenestats/filterbank.hpp"

namespace scenestats {

struct FrontendConfig {
  int sample_rate = 22050;
  int num_cochlear_channels = 32;
  double cochlear_lo_hz = 20.0;
  double cochlear_hi_hz = 10000.0;
  int num_modulation_bands = 20;
  double modulation_lo_hz = 0.5;
  double modulation_hi_hz = 200.0;
  int envelope_rate = 400;
  double compression_exponent = 0.3;
};

struct EnvelopeSet {
  std::vector<std::vector<double>> envelopes;  // [channel][frame], non-negative
  double env_rate = 0.0;
  double compression_exponent = 0.3;

  std::size_t num_channels() const { return envelopes.size(); }
  std::size_t frames() const { return envelopes.empty() ? 0 : envelopes.front().size(); }
};

struct ModulationSet {
  std::vector<double> data;  // [channel][band][frame], contiguous
  int channels = 0;
  int bands = 0;
  std::size_t frames = 0;

  std::span<const double> at(int channel, int band) const {
    return {data.data() + (static_cast<std::size_t>(channel) * bands + band) * frames, frames};
  }
  std::span<double> at(int channel, int band) {
    return {data.data() + (static_cast<std::size_t>(channel) * bands + band) * frames, frames};
  }
};

struct FrontendOutput {
  std::vector<std::vector<double>> subbands;  // at the frontend sample rate
  EnvelopeSet envelopes;
  ModulationSet modulation;
};

class AuditoryFrontend {
 public:
  explicit AuditoryFrontend(FrontendConfig cfg = {})
      : cfg_(cfg), env_resampler_(cfg.sample_rate, cfg.envelope_rate) {
    if (cfg.sample_rate < 2.0 * cfg.cochlear_hi_hz)
      throw std::invalid_argument("frontend: sample rate below twice the cochlear upper edge");
  }

  const FrontendConfig& config() const { return cfg_; }

  std::shared_ptr<const CochlearFilterbank> cochlear_bank(int fft_size) const {
    std::lock_guard lock(mu_);
    auto it = cochlear_cache_.find(fft_size);
    if (it != cochlear_cache_.end()) return it->second;
    auto fb = std::make_shared<const CochlearFilterbank>(
        CochlearFilterbank::design(cfg_.sample_rate, fft_size, cfg_.num_cochlear_channels,
                                   cfg_.cochlear_lo_hz, cfg_.cochlear_hi_hz));
    cochlear_cache_.emplace(fft_size, fb);
    return fb;
  }

  std::shared_ptr<const ModulationFilterbank> modulation_bank(int fft_size) const {
    std::lock_guard lock(mu_);
    auto it = modulation_cache_.find(fft_size);
    if (it != modulation_cache_.end()) return it->second;
    auto fb = std::make_shared<const ModulationFilterbank>(
        ModulationFilterbank::design(cfg_.envelope_rate, fft_size, cfg_.num_modulation_bands,
                                     cfg_.modulation_lo_hz, cfg_.modulation_hi_hz));
    modulation_cache_.emplace(fft_size, fb);
    return fb;
  }

  /// Zero-phase subband decomposition of a signal at the frontend rate.
  std::vector<std::vector<double>> apply_filterbank(std::span<const double> x) const {
    const auto n = x.size();
    auto fb = cochlear_bank(static_cast<int>(n));
    auto plan = fft::plan_for(n);
    const std::vector<fft::cplx> spectrum = fft::real_forward(x);

    std::vector<std::vector<double>> subbands(fb->num_channels());
    std::vector<fft::cplx> masked(n), analytic(n);
    for (int c = 0; c < fb->num_channels(); ++c) {
      one_sided_product(spectrum, fb->freq_responses[c], masked);
      plan->inverse(masked.data(), analytic.data());
      auto& sb = subbands[c];
      sb.resize(n);
      for (std::size_t i = 0; i < n; ++i) sb[i] = analytic[i].real();
    }
    return subbands;
  }

  /// Hilbert-magnitude envelopes of the subbands, compressed and decimated
  /// to the envelope rate. Negative decimation ripple is clamped to zero.
  EnvelopeSet extract_envelopes(const std::vector<std::vector<double>>& subbands) const {
    EnvelopeSet env;
    env.env_rate = cfg_.envelope_rate;
    env.compression_exponent = cfg_.compression_exponent;
    env.envelopes.reserve(subbands.size());
    for (const auto& sb : subbands) {
      const auto n = sb.size();
      auto plan = fft::plan_for(n);
      const std::vector<fft::cplx> spectrum = fft::real_forward(sb);
      std::vector<fft::cplx> masked(n), analytic(n);
      one_sided_product(spectrum, {}, masked);
      plan->inverse(masked.data(), analytic.data());
      env.envelopes.push_back(compress_and_decimate(analytic));
    }
    return env;
  }

  /// Modulation decomposition of each envelope: the mean is removed, then
  /// each band's zero-phase response is applied on the envelope FFT grid.
  ModulationSet apply_modulation_filterbank(const EnvelopeSet& env) const {
    const auto frames = env.frames();
    auto mfb = modulation_bank(static_cast<int>(frames));
    auto plan = fft::plan_for(frames);

    ModulationSet mods;
    mods.channels = static_cast<int>(env.num_channels());
    mods.bands = mfb->num_bands();
    mods.frames = frames;
    mods.data.assign(static_cast<std::size_t>(mods.channels) * mods.bands * frames, 0.0);

    std::vector<double> centered(frames);
    std::vector<fft::cplx> spec(frames), shaped(frames), band(frames);
    for (int c = 0; c < mods.channels; ++c) {
      const auto& e = env.envelopes[c];
      double mean = 0.0;
      for (double v : e) mean += v;
      mean /= static_cast<double>(frames);
      for (std::size_t i = 0; i < frames; ++i) centered[i] = e[i] - mean;

      for (std::size_t i = 0; i < frames; ++i) spec[i] = {centered[i], 0.0};
      plan->forward(spec.data(), shaped.data());
      std::swap(spec, shaped);
      for (int b = 0; b < mods.bands; ++b) {
        const auto& h = mfb->freq_responses[b];
        for (std::size_t i = 0; i < frames; ++i) shaped[i] = spec[i] * h[i];
        plan->inverse(shaped.data(), band.data());
        auto out = mods.at(c, b);
        for (std::size_t i = 0; i < frames; ++i) out[i] = band[i].real();
      }
    }
    return mods;
  }

  FrontendOutput process(const Segment& seg) const {
    if (seg.sample_rate != cfg_.sample_rate)
      throw std::invalid_argument("frontend: segment not at the frontend sample rate");
    return process(seg.samples);
  }

  /// Full chain on one segment. Fuses the subband and analytic-signal
  /// transforms (one inverse FFT per channel yields both), which is
  /// numerically identical to running the stages separately.
  FrontendOutput process(std::span<const double> x) const {
    const auto n = x.size();
    auto fb = cochlear_bank(static_cast<int>(n));
    auto plan = fft::plan_for(n);
    const std::vector<fft::cplx> spectrum = fft::real_forward(x);

    FrontendOutput out;
    out.subbands.resize(fb->num_channels());
    out.envelopes.env_rate = cfg_.envelope_rate;
    out.envelopes.compression_exponent = cfg_.compression_exponent;
    out.envelopes.envelopes.resize(fb->num_channels());

    std::vector<fft::cplx> masked(n), analytic(n);
    for (int c = 0; c < fb->num_channels(); ++c) {
      one_sided_product(spectrum, fb->freq_responses[c], masked);
      plan->inverse(masked.data(), analytic.data());
      auto& sb = out.subbands[c];
      sb.resize(n);
      for (std::size_t i = 0; i < n; ++i) sb[i] = analytic[i].real();
      out.envelopes.envelopes[c] = compress_and_decimate(analytic);
    }
    out.modulation = apply_modulation_filterbank(out.envelopes);
    return out;
  }

 private:
  // masked[k] = spectrum[k] * response[k] * analytic mask (2 on strictly
  // positive frequencies, 1 at DC and Nyquist, 0 on negatives). An empty
  // response means all-pass (plain Hilbert analytic signal).
  static void one_sided_product(const std::vector<fft::cplx>& spectrum,
                                std::span<const double> response, std::vector<fft::cplx>& masked) {
    const std::size_t n = spectrum.size();
    auto h = [&](std::size_t k) { return response.empty() ? 1.0 : response[k]; };
    std::fill(masked.begin(), masked.end(), fft::cplx{0.0, 0.0});
    masked[0] = spectrum[0] * h(0);
    for (std::size_t k = 1; k < (n + 1) / 2; ++k) masked[k] = spectrum[k] * (2.0 * h(k));
    if (n % 2 == 0) masked[n / 2] = spectrum[n / 2] * h(n / 2);
    return;
  }

  std::vector<double> compress_and_decimate(const std::vector<fft::cplx>& analytic) const {
    const std::size_t n = analytic.size();
    std::vector<double> full(n);
    const double chi = cfg_.compression_exponent;
    for (std::size_t i = 0; i < n; ++i) full[i] = std::pow(std::abs(analytic[i]), chi);
    std::vector<double> env = env_resampler_.process(full);
    for (double& v : env) v = std::max(v, 0.0);
    return env;
  }

  FrontendConfig cfg_;
  Resampler env_resampler_;
  mutable std::mutex mu_;
  mutable std::unordered_map<int, std::shared_ptr<const CochlearFilterbank>> cochlear_cache_;
  mutable std::unordered_map<int, std::shared_ptr<const ModulationFilterbank>> modulation_cache_;
};

}  // namespace scenestats
