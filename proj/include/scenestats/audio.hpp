#pragma once

// Audio decoding, band-limited resampling and fixed-length segmentation.
// All values are immutable after construction and safe to share across
// workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenestats/wav.hpp"

namespace scenestats {

struct AudioClip {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 0;
  std::string source_id;
  int channel_index = 0;
  std::string label;  // empty when unlabeled

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

struct Segment {
  std::vector<double> samples;
  int sample_rate = 0;
  double start_time = 0.0;  // seconds from clip start
  std::string source_id;
  int channel_index = 0;
  std::string label;
};

/// Decodes a WAV file into one clip per channel (file order).
inline std::vector<AudioClip> decode(const std::filesystem::path& path,
                                     const std::string& label = {}) {
  wav::WavData data = wav::read_wav(path);
  std::vector<AudioClip> clips;
  clips.reserve(data.channels.size());
  for (std::size_t c = 0; c < data.channels.size(); ++c) {
    AudioClip clip;
    clip.samples = std::move(data.channels[c]);
    clip.sample_rate = static_cast<int>(data.sample_rate);
    clip.source_id = path.string();
    clip.channel_index = static_cast<int>(c);
    clip.label = label;
    clips.push_back(std::move(clip));
  }
  return clips;
}

/// Polyphase windowed-sinc rational resampler. The prototype low-pass is a
/// Kaiser-windowed sinc; each polyphase branch is normalized to unit DC gain
/// so constant signals pass through exactly.
class Resampler {
 public:
  Resampler(int source_rate, int target_rate, int zero_crossings = 16, double beta = 10.0,
            double rolloff = 0.945) {
    if (source_rate <= 0 || target_rate <= 0)
      throw std::invalid_argument("resampler: rates must be positive");
    const int g = std::gcd(source_rate, target_rate);
    up_ = target_rate / g;
    down_ = source_rate / g;
    beta_ = beta;

    // Cutoff in cycles per input sample; narrowed when decimating.
    const double ratio = static_cast<double>(up_) / static_cast<double>(down_);
    cutoff_ = 0.5 * std::min(1.0, ratio) * rolloff;
    half_width_ = static_cast<int>(std::ceil(zero_crossings / (2.0 * cutoff_)));
    taps_per_phase_ = 2 * half_width_;

    taps_.resize(static_cast<std::size_t>(up_) * taps_per_phase_);
    for (int phase = 0; phase < up_; ++phase) {
      const double frac = static_cast<double>(phase) / up_;
      double sum = 0.0;
      for (int k = 0; k < taps_per_phase_; ++k) {
        const double t = static_cast<double>(k - half_width_ + 1) - frac;
        const double h = kernel(t);
        taps_[static_cast<std::size_t>(phase) * taps_per_phase_ + k] = h;
        sum += h;
      }
      // Unit DC gain per branch.
      for (int k = 0; k < taps_per_phase_; ++k)
        taps_[static_cast<std::size_t>(phase) * taps_per_phase_ + k] /= sum;
    }
  }

  int up() const { return up_; }
  int down() const { return down_; }

  std::size_t output_length(std::size_t input_length) const {
    return static_cast<std::size_t>(
        (input_length * static_cast<std::uint64_t>(up_) + down_ / 2) / down_);
  }

  /// Resamples the whole signal; boundaries are treated as zero-padded.
  std::vector<double> process(std::span<const double> in) const {
    const std::size_t n_out = output_length(in.size());
    std::vector<double> out(n_out);
    const auto n_in = static_cast<std::int64_t>(in.size());
    for (std::size_t t = 0; t < n_out; ++t) {
      // Input position of output sample t is t*down/up; split into the
      // base index and the polyphase branch.
      const std::uint64_t num = t * static_cast<std::uint64_t>(down_);
      const auto base = static_cast<std::int64_t>(num / up_);
      const int phase = static_cast<int>(num % up_);
      const double* h = taps_.data() + static_cast<std::size_t>(phase) * taps_per_phase_;
      const std::int64_t first = base - half_width_ + 1;
      double acc = 0.0;
      const std::int64_t k_lo = std::max<std::int64_t>(0, -first);
      const std::int64_t k_hi = std::min<std::int64_t>(taps_per_phase_, n_in - first);
      for (std::int64_t k = k_lo; k < k_hi; ++k)
        acc += h[k] * in[static_cast<std::size_t>(first + k)];
      out[t] = acc;
    }
    return out;
  }

 private:
  double kernel(double t) const {
    const double x = 2.0 * cutoff_ * t;
    double sinc;
    if (std::abs(x) < 1e-12) {
      sinc = 1.0;
    } else {
      const double px = std::numbers::pi * x;
      sinc = std::sin(px) / px;
    }
    const double u = t / half_width_;
    if (std::abs(u) >= 1.0) return 0.0;
    return sinc * kaiser(u);
  }

  double kaiser(double u) const {
    return bessel_i0(beta_ * std::sqrt(1.0 - u * u)) / bessel_i0(beta_);
  }

  static double bessel_i0(double x) {
    // Power series; converges quickly for the argument range used here.
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return sum;
  }

  int up_ = 1;
  int down_ = 1;
  double cutoff_ = 0.5;
  double beta_ = 10.0;
  int half_width_ = 0;
  int taps_per_phase_ = 0;
  std::vector<double> taps_;
};

/// Band-limited resampling of a raw signal.
inline std::vector<double> resample_signal(std::span<const double> in, int source_rate,
                                           int target_rate) {
  if (source_rate == target_rate) return std::vector<double>(in.begin(), in.end());
  Resampler rs(source_rate, target_rate);
  return rs.process(in);
}

/// Band-limited resampling of a clip, preserving provenance.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
  AudioClip out;
  out.samples = resample_signal(clip.samples, clip.sample_rate, target_rate);
  out.sample_rate = target_rate;
  out.source_id = clip.source_id;
  out.channel_index = clip.channel_index;
  out.label = clip.label;
  return out;
}

/// Slices a clip into segments of seg_len seconds every hop seconds.
/// Start times are multiples of hop; a half-sample tolerance absorbs rates
/// where seg_len * rate is non-integral. Throws if the clip is shorter than
/// one segment.
inline std::vector<Segment> segment(const AudioClip& clip, double seg_len, double hop) {
  if (seg_len <= 0.0 || hop <= 0.0)
    throw std::invalid_argument("segment: seg_len and hop must be positive");
  const auto n = static_cast<std::int64_t>(clip.samples.size());
  const double rate = clip.sample_rate;
  const auto seg_samples = static_cast<std::int64_t>(std::llround(seg_len * rate));
  if (seg_samples > n)
    throw std::runtime_error("segment: clip '" + clip.source_id + "' shorter than seg_len (" +
                             std::to_string(clip.duration()) + " s < " + std::to_string(seg_len) +
                             " s)");

  std::vector<Segment> segments;
  const double hop_samples = hop * rate;
  for (std::int64_t k = 0;; ++k) {
    const auto start = static_cast<std::int64_t>(std::llround(static_cast<double>(k) * hop_samples));
    if (static_cast<double>(start + seg_samples) > static_cast<double>(n) + 0.5) break;
    Segment s;
    s.samples.assign(clip.samples.begin() + start, clip.samples.begin() + start + seg_samples);
    s.sample_rate = clip.sample_rate;
    s.start_time = static_cast<double>(k) * hop;
    s.source_id = clip.source_id;
    s.channel_index = clip.channel_index;
    s.label = clip.label;
    segments.push_back(std::move(s));
  }
  return segments;
}

}  // namespace scenestats
