#pragma once

// Mixed-radix complex FFT with Bluestein fallback.
//
// Sizes whose prime factors are all <= 7 run on a recursive
// decimation-in-time path with specialized radix-2/4 butterflies and a
// symmetry-folded kernel for odd radices. Any other size falls back to
// Bluestein's chirp-z algorithm over a power-of-two convolution, so every
// length is supported. Plans are immutable after construction and safe to
// share across threads; per-call scratch lives in thread_local buffers.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace scenestats::fft {

using cplx = std::complex<double>;

class Plan {
 public:
  explicit Plan(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("fft: size must be positive");
    std::size_t rem = factorize(n, factors_);
    if (rem == 1 && n > 1) {
      build_twiddles();
      build_odd_tables();
    } else if (rem != 1) {
      factors_.clear();
      build_bluestein();
    }
  }

  std::size_t size() const { return n_; }

  /// Unscaled forward transform, out-of-place. `in` and `out` must not alias.
  void forward(const cplx* in, cplx* out) const {
    if (n_ == 1) {
      out[0] = in[0];
      return;
    }
    if (bluestein_) {
      bluestein_transform(in, out);
    } else {
      recurse(in, 1, out, n_, 0);
    }
  }

  /// Inverse transform scaled by 1/n, out-of-place.
  void inverse(const cplx* in, cplx* out) const {
    // Scratch role 2 is reused by a nested Bluestein convolution, but only
    // after the conjugated copy has been fully consumed; see
    // bluestein_transform for the ordering that makes this safe.
    std::vector<cplx>& tmp = scratch(2);
    tmp.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) tmp[i] = std::conj(in[i]);
    forward(tmp.data(), out);
    const double s = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = std::conj(out[i]) * s;
  }

  std::vector<cplx> forward(std::span<const cplx> in) const {
    expect_size(in.size());
    std::vector<cplx> out(n_);
    forward(in.data(), out.data());
    return out;
  }

  std::vector<cplx> inverse(std::span<const cplx> in) const {
    expect_size(in.size());
    std::vector<cplx> out(n_);
    inverse(in.data(), out.data());
    return out;
  }

 private:
  // Role-separated per-thread scratch: 0/1 belong to the Bluestein driver,
  // 2 to inverse(). A Bluestein plan's internal convolution plan is always a
  // smooth power of two, so nesting never goes deeper than one level.
  static std::vector<cplx>& scratch(int role) {
    thread_local std::vector<cplx> buf[3];
    return buf[role];
  }

  void expect_size(std::size_t n) const {
    if (n != n_) throw std::invalid_argument("fft: input length does not match plan size");
  }

  // Pull out factors, largest-stride radices first: 4s, then 2, 3, 5, 7.
  static std::size_t factorize(std::size_t n, std::vector<std::uint32_t>& out) {
    while (n % 4 == 0) {
      out.push_back(4);
      n /= 4;
    }
    for (std::uint32_t r : {2u, 3u, 5u, 7u}) {
      while (n % r == 0) {
        out.push_back(r);
        n /= r;
      }
    }
    return n;
  }

  void build_twiddles() {
    tw_.resize(n_);
    const double step = -2.0 * std::numbers::pi / static_cast<double>(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      const double a = step * static_cast<double>(j);
      tw_[j] = {std::cos(a), std::sin(a)};
    }
  }

  void build_odd_tables() {
    for (std::uint32_t r : factors_) {
      if (r % 2 == 0 || odd_cos_.count(r)) continue;
      const std::uint32_t h = (r - 1) / 2;
      std::vector<double> cs(h * h), sn(h * h);
      for (std::uint32_t s = 1; s <= h; ++s) {
        for (std::uint32_t p = 1; p <= h; ++p) {
          const double a =
              2.0 * std::numbers::pi * static_cast<double>(p) * static_cast<double>(s) / r;
          cs[(s - 1) * h + (p - 1)] = std::cos(a);
          sn[(s - 1) * h + (p - 1)] = std::sin(a);
        }
      }
      odd_cos_[r] = std::move(cs);
      odd_sin_[r] = std::move(sn);
    }
  }

  // in: strided input; out: contiguous, length n. depth indexes factors_.
  void recurse(const cplx* in, std::size_t in_stride, cplx* out, std::size_t n,
               std::size_t depth) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const std::uint32_t r = factors_[depth];
    const std::size_t m = n / r;
    for (std::uint32_t p = 0; p < r; ++p)
      recurse(in + p * in_stride, in_stride * r, out + p * m, m, depth + 1);

    const std::size_t tstride = n_ / n;  // twiddle index scale for W_n^(pq)
    switch (r) {
      case 2:
        combine2(out, m, tstride);
        break;
      case 4:
        combine4(out, m, tstride);
        break;
      default:
        combine_odd(out, r, m, tstride);
        break;
    }
  }

  void combine2(cplx* out, std::size_t m, std::size_t tstride) const {
    for (std::size_t q = 0; q < m; ++q) {
      const cplx a = out[q];
      const cplx b = out[m + q] * tw_[q * tstride];
      out[q] = a + b;
      out[m + q] = a - b;
    }
  }

  void combine4(cplx* out, std::size_t m, std::size_t tstride) const {
    for (std::size_t q = 0; q < m; ++q) {
      const cplx a = out[q];
      const cplx b = out[m + q] * tw_[q * tstride];
      const cplx c = out[2 * m + q] * tw_[2 * q * tstride];
      const cplx d = out[3 * m + q] * tw_[3 * q * tstride];
      const cplx ac0 = a + c, ac1 = a - c;
      const cplx bd0 = b + d, bd1 = b - d;
      const cplx jbd1(bd1.imag(), -bd1.real());  // -i * bd1
      out[q] = ac0 + bd0;
      out[m + q] = ac1 + jbd1;
      out[2 * m + q] = ac0 - bd0;
      out[3 * m + q] = ac1 - jbd1;
    }
  }

  // Odd radix via conjugate-pair folding:
  //   X_s = x0 + sum_p [(x_p + x_{r-p}) cos(2pi ps/r) - i (x_p - x_{r-p}) sin(2pi ps/r)]
  // and X_{r-s} is the same with the sine term negated.
  void combine_odd(cplx* out, std::uint32_t r, std::size_t m, std::size_t tstride) const {
    const std::uint32_t h = (r - 1) / 2;
    const double* cs = odd_cos_.at(r).data();
    const double* sn = odd_sin_.at(r).data();
    cplx t[7], ev[3], od[3], res[7];
    for (std::size_t q = 0; q < m; ++q) {
      t[0] = out[q];
      for (std::uint32_t p = 1; p < r; ++p) t[p] = out[p * m + q] * tw_[p * q * tstride];
      cplx sum = t[0];
      for (std::uint32_t p = 1; p <= h; ++p) {
        ev[p - 1] = t[p] + t[r - p];
        od[p - 1] = t[p] - t[r - p];
        sum += ev[p - 1];
      }
      res[0] = sum;
      for (std::uint32_t s = 1; s <= h; ++s) {
        cplx even_acc = t[0];
        cplx odd_acc = 0.0;
        const double* csrow = cs + (s - 1) * h;
        const double* snrow = sn + (s - 1) * h;
        for (std::uint32_t p = 1; p <= h; ++p) {
          even_acc += ev[p - 1] * csrow[p - 1];
          odd_acc += od[p - 1] * snrow[p - 1];
        }
        const cplx rot(odd_acc.imag(), -odd_acc.real());  // -i * odd_acc
        res[s] = even_acc + rot;
        res[r - s] = even_acc - rot;
      }
      for (std::uint32_t s = 0; s < r; ++s) out[s * m + q] = res[s];
    }
  }

  // ---- Bluestein ----

  void build_bluestein() {
    bluestein_ = true;
    std::size_t m = 1;
    while (m < 2 * n_ - 1) m <<= 1;
    conv_size_ = m;
    conv_plan_ = std::make_unique<Plan>(m);

    chirp_.resize(n_);
    const std::uint64_t mod = 2 * static_cast<std::uint64_t>(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      // angle = -pi * j^2 / n, with j^2 reduced mod 2n to keep precision
      const std::uint64_t j2 = (static_cast<std::uint64_t>(j) * j) % mod;
      const double a = -std::numbers::pi * static_cast<double>(j2) / static_cast<double>(n_);
      chirp_[j] = {std::cos(a), std::sin(a)};
    }
    std::vector<cplx> b(m, cplx{0.0, 0.0});
    b[0] = std::conj(chirp_[0]);
    for (std::size_t j = 1; j < n_; ++j) {
      b[j] = std::conj(chirp_[j]);
      b[m - j] = std::conj(chirp_[j]);
    }
    chirp_spectrum_.resize(m);
    conv_plan_->forward(b.data(), chirp_spectrum_.data());
  }

  void bluestein_transform(const cplx* in, cplx* out) const {
    const std::size_t m = conv_size_;
    std::vector<cplx>& a = scratch(0);
    std::vector<cplx>& freq = scratch(1);
    a.assign(m, cplx{0.0, 0.0});
    // `in` may point at scratch(2) when called from inverse(); it is fully
    // consumed here, before conv_plan_->inverse touches that buffer again.
    for (std::size_t j = 0; j < n_; ++j) a[j] = in[j] * chirp_[j];

    freq.resize(m);
    conv_plan_->forward(a.data(), freq.data());
    for (std::size_t j = 0; j < m; ++j) freq[j] *= chirp_spectrum_[j];
    conv_plan_->inverse(freq.data(), a.data());

    for (std::size_t k = 0; k < n_; ++k) out[k] = a[k] * chirp_[k];
  }

  std::size_t n_;
  std::vector<std::uint32_t> factors_;
  std::vector<cplx> tw_;
  std::unordered_map<std::uint32_t, std::vector<double>> odd_cos_;
  std::unordered_map<std::uint32_t, std::vector<double>> odd_sin_;

  bool bluestein_ = false;
  std::size_t conv_size_ = 0;
  std::unique_ptr<Plan> conv_plan_;
  std::vector<cplx> chirp_;
  std::vector<cplx> chirp_spectrum_;
};

/// Process-wide plan cache. Returned plans are immutable and shareable.
inline std::shared_ptr<const Plan> plan_for(std::size_t n) {
  static std::mutex mu;
  static std::unordered_map<std::size_t, std::shared_ptr<const Plan>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto plan = std::make_shared<const Plan>(n);
  cache.emplace(n, plan);
  return plan;
}

/// Full-length complex spectrum of a real signal.
inline std::vector<cplx> real_forward(std::span<const double> x) {
  std::vector<cplx> in(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = cplx{x[i], 0.0};
  return plan_for(x.size())->forward(in);
}

/// Band-limited downsampling by spectral truncation (Fourier resampling):
/// keeps the n_out lowest DFT bins, which is an ideal brickwall low-pass at
/// the output Nyquist plus resampling in one step. Requires n_out <= n_in.
inline std::vector<double> spectral_resample(std::span<const double> x, std::size_t n_out) {
  const std::size_t n = x.size();
  if (n_out > n) throw std::invalid_argument("spectral_resample: upsampling not supported");
  if (n_out == n) return std::vector<double>(x.begin(), x.end());
  if (n_out == 0) return {};

  std::vector<cplx> spec = real_forward(x);
  const double scale = static_cast<double>(n_out) / static_cast<double>(n);
  std::vector<cplx> out_spec(n_out, cplx{0.0, 0.0});
  out_spec[0] = spec[0] * scale;
  const std::size_t half = n_out / 2;
  for (std::size_t k = 1; k < (n_out + 1) / 2; ++k) {
    out_spec[k] = spec[k] * scale;
    out_spec[n_out - k] = spec[n - k] * scale;
  }
  if (n_out % 2 == 0) out_spec[half] = (spec[half] + spec[n - half]) * scale;

  std::vector<cplx> t = plan_for(n_out)->inverse(out_spec);
  std::vector<double> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out[i] = t[i].real();
  return out;
}

}  // namespace scenestats::fft
