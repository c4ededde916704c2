#pragma once

// One-vs-one RBF-kernel SVM trained by sequential minimal optimization,
// plus the [-1, 1] feature scaler and file-level majority voting.
//
// The solver is the classic two-variable SMO with maximal-violating-pair
// working-set selection and a bounded kernel row cache. Training is fully
// deterministic: zero-initialized duals, fixed tie-breaking, no randomness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <list>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "scenestats/serialize.hpp"

namespace scenestats {

/// Per-dimension affine map of training range onto [-1, 1]. Constant
/// dimensions map to 0; out-of-range values are clamped.
struct FeatureScaler {
  std::vector<double> min_v;
  std::vector<double> max_v;

  std::size_t dim() const { return min_v.size(); }

  static FeatureScaler fit(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw std::invalid_argument("scaler: no training vectors");
    const std::size_t d = rows.front().size();
    FeatureScaler s;
    s.min_v.assign(d, std::numeric_limits<double>::infinity());
    s.max_v.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& r : rows) {
      if (r.size() != d) throw std::invalid_argument("scaler: inconsistent dimensions");
      for (std::size_t k = 0; k < d; ++k) {
        s.min_v[k] = std::min(s.min_v[k], r[k]);
        s.max_v[k] = std::max(s.max_v[k], r[k]);
      }
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != dim())
      throw std::invalid_argument("scaler: dimension mismatch (" + std::to_string(x.size()) +
                                  " vs " + std::to_string(dim()) + ")");
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double range = max_v[k] - min_v[k];
      if (range <= 0.0) {
        out[k] = 0.0;
      } else {
        out[k] = std::clamp(2.0 * (x[k] - min_v[k]) / range - 1.0, -1.0, 1.0);
      }
    }
    return out;
  }
};

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace detail {

/// Bounded LRU cache of kernel matrix rows.
class KernelCache {
 public:
  KernelCache(const std::vector<std::vector<double>>& points, double gamma,
              std::size_t budget_bytes)
      : points_(points), gamma_(gamma) {
    const std::size_t n = points.size();
    capacity_ = std::max<std::size_t>(2, budget_bytes / (sizeof(double) * std::max<std::size_t>(n, 1)));
  }

  std::span<const double> row(std::size_t i) {
    auto it = rows_.find(i);
    if (it != rows_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
    if (rows_.size() >= capacity_) {
      rows_.erase(lru_.back());
      lru_.pop_back();
    }
    const std::size_t n = points_.size();
    std::vector<double> vals(n);
    for (std::size_t j = 0; j < n; ++j) vals[j] = rbf_kernel(points_[i], points_[j], gamma_);
    lru_.push_front(i);
    auto [pos, ok] = rows_.emplace(i, std::make_pair(std::move(vals), lru_.begin()));
    return pos->second.first;
  }

 private:
  const std::vector<std::vector<double>>& points_;
  double gamma_;
  std::size_t capacity_;
  std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>>
      rows_;
  std::list<std::size_t> lru_;
};

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
};

/// Two-variable SMO for the soft-margin dual with labels in {-1, +1}.
/// Stops when the maximal KKT violation m(alpha) - M(alpha) drops below tol.
inline SmoResult solve_smo(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           double c_penalty, double gamma, double tol, std::size_t cache_bytes) {
  const std::size_t n = x.size();
  SmoResult res;
  res.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of the dual at alpha = 0
  KernelCache cache(x, gamma, cache_bytes);

  const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * n);
  double m_up = 0.0, m_low = 0.0;
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    // Maximal violating pair over -y_t * grad_t.
    int i = -1, j = -1;
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      const bool in_up = (y[t] > 0 && res.alpha[t] < c_penalty) || (y[t] < 0 && res.alpha[t] > 0);
      const bool in_low = (y[t] > 0 && res.alpha[t] > 0) || (y[t] < 0 && res.alpha[t] < c_penalty);
      if (in_up && v > m_up) {
        m_up = v;
        i = static_cast<int>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j = static_cast<int>(t);
      }
    }
    if (i < 0 || j < 0 || m_up - m_low <= tol) break;

    const auto ki = cache.row(static_cast<std::size_t>(i));
    const auto kj = cache.row(static_cast<std::size_t>(j));
    const double s = static_cast<double>(y[i]) * y[j];
    double eta = ki[i] + kj[j] - 2.0 * ki[j];
    if (eta <= 0.0) eta = 1e-12;

    // Step on alpha_j along the equality constraint; alpha_i moves by -s*t.
    double step = -(grad[j] - s * grad[i]) / eta * y[j];
    // Feasible interval for the step.
    double lo = -res.alpha[j], hi = c_penalty - res.alpha[j];
    if (s > 0) {
      lo = std::max(lo, res.alpha[i] - c_penalty);
      hi = std::min(hi, res.alpha[i]);
    } else {
      lo = std::max(lo, -res.alpha[i]);
      hi = std::min(hi, c_penalty - res.alpha[i]);
    }
    step = std::clamp(step, lo, hi);
    if (step == 0.0) break;  // numerically stuck; KKT gap is within noise

    const double delta_j = step;
    const double delta_i = -s * step;
    res.alpha[static_cast<std::size_t>(i)] += delta_i;
    res.alpha[static_cast<std::size_t>(j)] += delta_j;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += y[t] * (y[i] * ki[t] * delta_i + y[j] * kj[t] * delta_j);
  }

  // Bias from free support vectors, falling back to the bound midpoint.
  double sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (res.alpha[t] > 0.0 && res.alpha[t] < c_penalty) {
      sum += -y[t] * grad[t];
      ++free_count;
    }
  }
  res.bias = free_count > 0 ? sum / static_cast<double>(free_count) : 0.5 * (m_up + m_low);
  return res;
}

}  // namespace detail

/// One binary machine of the one-vs-one ensemble. A positive decision value
/// favors `positive_class`.
struct BinarySvm {
  int positive_class = 0;
  int negative_class = 0;
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> dual_coefs;  // alpha_i * y_i
  double bias = 0.0;

  double decision(std::span<const double> x, double gamma) const {
    double f = bias;
    for (std::size_t s = 0; s < support_vectors.size(); ++s)
      f += dual_coefs[s] * rbf_kernel(support_vectors[s], x, gamma);
    return f;
  }
};

struct SvmPrediction {
  int label_index = 0;
  bool tie_broken = false;
  std::vector<int> votes;          // per class
  std::vector<double> margins;     // per class, sum of signed decision values
  std::vector<double> pairwise;    // decision value per machine, machine order
};

struct SvmModel {
  double c_penalty = 4.0;
  double gamma = 2.0;
  std::vector<std::string> classes;  // sorted
  std::vector<BinarySvm> machines;   // pair order (0,1), (0,2), ..., (1,2), ...
  FeatureScaler scaler;
  std::uint64_t layout_hash = 0;

  std::size_t dim() const { return scaler.dim(); }

  /// Prediction on an already scaled vector.
  SvmPrediction predict_scaled(std::span<const double> v) const {
    SvmPrediction p;
    p.votes.assign(classes.size(), 0);
    p.margins.assign(classes.size(), 0.0);
    p.pairwise.reserve(machines.size());
    for (const auto& m : machines) {
      const double dec = m.decision(v, gamma);
      p.pairwise.push_back(dec);
      p.votes[dec > 0.0 ? m.positive_class : m.negative_class] += 1;
      p.margins[m.positive_class] += dec;
      p.margins[m.negative_class] -= dec;
    }
    int best = 0;
    for (std::size_t k = 1; k < classes.size(); ++k) {
      if (p.votes[k] > p.votes[best]) best = static_cast<int>(k);
    }
    // Tie-break by larger aggregate margin, then class order.
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (static_cast<int>(k) != best && p.votes[k] == p.votes[best]) {
        p.tie_broken = true;
        if (p.margins[k] > p.margins[best] && static_cast<int>(k) < best) best = static_cast<int>(k);
        if (p.margins[k] > p.margins[best] && static_cast<int>(k) > best) best = static_cast<int>(k);
      }
    }
    p.label_index = best;
    return p;
  }

  /// Scales then predicts.
  SvmPrediction predict(std::span<const double> v) const { return predict_scaled(scaler.apply(v)); }

  void save(std::ostream& os) const {
    io::BinaryWriter w(os);
    w.magic("SSVM");
    w.u32(1);
    w.u64(layout_hash);
    w.f64(c_penalty);
    w.f64(gamma);
    w.u32(static_cast<std::uint32_t>(classes.size()));
    for (const auto& s : classes) w.str(s);
    w.f64_span(scaler.min_v);
    w.f64_span(scaler.max_v);
    w.u32(static_cast<std::uint32_t>(machines.size()));
    for (const auto& m : machines) {
      w.i32(m.positive_class);
      w.i32(m.negative_class);
      w.f64(m.bias);
      w.u32(static_cast<std::uint32_t>(m.support_vectors.size()));
      w.f64_span(m.dual_coefs);
      for (const auto& sv : m.support_vectors) w.f64_span(sv);
    }
  }

  static SvmModel load(std::istream& is) {
    io::BinaryReader r(is);
    r.expect_magic("SSVM");
    if (const auto ver = r.u32(); ver != 1)
      throw std::runtime_error("svm: unsupported model version " + std::to_string(ver));
    SvmModel m;
    m.layout_hash = r.u64();
    m.c_penalty = r.f64();
    m.gamma = r.f64();
    m.classes.resize(r.u32());
    for (auto& s : m.classes) s = r.str();
    m.scaler.min_v = r.f64_vec();
    m.scaler.max_v = r.f64_vec();
    m.machines.resize(r.u32());
    for (auto& bm : m.machines) {
      bm.positive_class = r.i32();
      bm.negative_class = r.i32();
      bm.bias = r.f64();
      const auto n_sv = r.u32();
      bm.dual_coefs = r.f64_vec();
      bm.support_vectors.resize(n_sv);
      for (auto& sv : bm.support_vectors) sv = r.f64_vec();
      if (bm.dual_coefs.size() != bm.support_vectors.size())
        throw std::runtime_error("svm: corrupt model record");
    }
    return m;
  }
};

struct SvmTrainOptions {
  double c_penalty = 4.0;
  double gamma = 2.0;
  double kkt_tol = 1e-3;
  std::size_t cache_bytes = 64ull << 20;
};

/// Trains the one-vs-one ensemble on already scaled vectors. Class order is
/// lexicographic; the lower-indexed class of each pair is the positive side.
inline SvmModel train_svm(const std::vector<std::vector<double>>& rows,
                          const std::vector<std::string>& labels, const SvmTrainOptions& opt,
                          FeatureScaler scaler = {}) {
  if (rows.size() != labels.size()) throw std::invalid_argument("svm: row/label count mismatch");
  if (rows.empty()) throw std::invalid_argument("svm: no training data");
  if (opt.c_penalty <= 0.0 || opt.gamma <= 0.0)
    throw std::invalid_argument("svm: C and gamma must be positive");

  SvmModel model;
  model.c_penalty = opt.c_penalty;
  model.gamma = opt.gamma;
  model.scaler = std::move(scaler);
  model.classes = labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()),
                      model.classes.end());
  if (model.classes.size() < 2) throw std::invalid_argument("svm: need at least two classes");

  std::vector<int> class_of(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = std::lower_bound(model.classes.begin(), model.classes.end(), labels[i]);
    class_of[i] = static_cast<int>(it - model.classes.begin());
  }

  const int n_classes = static_cast<int>(model.classes.size());
  for (int a = 0; a < n_classes; ++a) {
    for (int b = a + 1; b < n_classes; ++b) {
      std::vector<std::vector<double>> x;
      std::vector<int> y;
      std::vector<std::size_t> origin;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (class_of[i] == a || class_of[i] == b) {
          x.push_back(rows[i]);
          y.push_back(class_of[i] == a ? +1 : -1);
          origin.push_back(i);
        }
      }
      if (x.empty() || std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); }))
        throw std::invalid_argument("svm: class pair with an empty side");

      const auto sol = detail::solve_smo(x, y, opt.c_penalty, opt.gamma, opt.kkt_tol,
                                         opt.cache_bytes);
      BinarySvm machine;
      machine.positive_class = a;
      machine.negative_class = b;
      machine.bias = sol.bias;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (sol.alpha[i] > 0.0) {
          machine.support_vectors.push_back(x[i]);
          machine.dual_coefs.push_back(sol.alpha[i] * y[i]);
        }
      }
      model.machines.push_back(std::move(machine));
    }
  }
  return model;
}

/// Aggregated per-file decision over segment predictions.
struct VoteResult {
  std::vector<int> votes;       // per class
  std::vector<double> margins;  // per class, summed over segments
  int winning_class = 0;
  bool tie_broken = false;
};

/// Majority vote over segment predictions; ties fall back to the larger
/// summed decision margin, then class order. Order-invariant by
/// construction (sums only).
inline VoteResult vote_file(std::span<const SvmPrediction> predictions, std::size_t num_classes) {
  if (predictions.empty()) throw std::invalid_argument("vote: empty prediction list");
  VoteResult r;
  r.votes.assign(num_classes, 0);
  r.margins.assign(num_classes, 0.0);
  for (const auto& p : predictions) {
    r.votes[static_cast<std::size_t>(p.label_index)] += 1;
    for (std::size_t k = 0; k < num_classes; ++k) r.margins[k] += p.margins[k];
  }
  int best = 0;
  for (std::size_t k = 1; k < num_classes; ++k)
    if (r.votes[k] > r.votes[best]) best = static_cast<int>(k);
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (static_cast<int>(k) != best && r.votes[k] == r.votes[best]) {
      r.tie_broken = true;
      if (r.margins[k] > r.margins[best]) best = static_cast<int>(k);
    }
  }
  r.winning_class = best;
  return r;
}

}  // namespace scenestats
