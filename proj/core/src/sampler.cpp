#include "bagp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "bagp/error.hpp"
#include "bagp/log.hpp"

namespace bagp {

Vector SampleBatch::mean() const {
  if (draws.rows() == 0) throw ArgumentError("empty sample batch");
  return draws.colwise().mean().transpose();
}

double truncated_standard_normal(double lo, double hi, std::mt19937_64& rng) {
  if (!(lo <= hi)) return 0.5 * (lo + hi);
  if (lo == hi) return lo;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Mirror left tails onto the right.
  const bool flip = hi <= 0.0 && lo < -0.5;
  double a = flip ? -hi : lo;
  double c = flip ? -lo : hi;
  auto out = [flip](double z) { return flip ? -z : z; };

  if (a >= 0.5) {
    const double width = c - a;
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    if (width < 1.0 / alpha) {
      // Narrow interval far in the tail: uniform proposal, density peaks at a.
      for (;;) {
        const double z = a + width * unif(rng);
        if (std::log(unif(rng)) <= 0.5 * (a * a - z * z)) return out(z);
      }
    }
    std::exponential_distribution<double> expo(alpha);
    for (;;) {
      const double z = a + expo(rng);
      if (z > c) continue;
      if (std::log(unif(rng)) <= -0.5 * (z - alpha) * (z - alpha)) return out(z);
    }
  }

  if (c - a > 2.5) {
    for (;;) {
      const double z = normal(rng);
      if (z >= a && z <= c) return out(z);
    }
  }
  const double peak = (a <= 0.0 && c >= 0.0) ? 0.0 : (a > 0.0 ? a : c);
  for (;;) {
    const double z = a + (c - a) * unif(rng);
    if (std::log(unif(rng)) <= 0.5 * (peak * peak - z * z)) return out(z);
  }
}

namespace {

// Whitened problem: z ~ N(0, I) subject to F z + g >= 0.
struct Whitened {
  Matrix F;
  Vector g;
  Vector row_norm2;
};

class Chain {
 public:
  Chain(const Whitened& w, Vector z, std::mt19937_64& rng, const SamplerOptions& options)
      : w_(w), z_(std::move(z)), rng_(rng), options_(options) {}

  const Vector& state() const { return z_; }
  void reset(Vector z) { z_ = std::move(z); }

  // One exact HMC step; false when the trajectory could not be resolved.
  bool hmc_step(SamplerDiagnostics& diag) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index n = z_.size();
    Vector a(n);
    for (Eigen::Index i = 0; i < n; ++i) a[i] = normal(rng_);
    Vector b = z_;
    double remaining = options_.travel_time;
    const Eigen::Index p = w_.F.rows();
    Eigen::Index last = -1;
    for (std::size_t bounce = 0;; ++bounce) {
      if (bounce > options_.max_bounces) return false;
      double t_hit = remaining;
      Eigen::Index wall = -1;
      if (p > 0) {
        const Vector fa = w_.F * a;
        const Vector fb = w_.F * b;
        for (Eigen::Index j = 0; j < p; ++j) {
          const double u = std::hypot(fa[j], fb[j]);
          if (u <= w_.g[j] || u == 0.0) continue;
          const double ratio = std::clamp(-w_.g[j] / u, -1.0, 1.0);
          const double phi = std::atan2(fa[j], fb[j]);
          double t = phi + std::acos(ratio);
          t = std::fmod(t, 2.0 * std::numbers::pi);
          if (t < 0.0) t += 2.0 * std::numbers::pi;
          if (j == last && t < 1e-9) t += 2.0 * std::numbers::pi;
          if (t <= 1e-12) continue;
          if (t < t_hit) {
            t_hit = t;
            wall = j;
          }
        }
      }
      const double st = std::sin(t_hit);
      const double ct = std::cos(t_hit);
      Vector pos = a * st + b * ct;
      if (wall < 0) {
        z_ = std::move(pos);
        return true;
      }
      Vector vel = a * ct - b * st;
      const auto f = w_.F.row(wall);
      vel -= (2.0 * f.dot(vel) / w_.row_norm2[wall]) * f.transpose();
      a = std::move(vel);
      b = std::move(pos);
      remaining -= t_hit;
      last = wall;
      ++diag.bounces;
    }
  }

  void gibbs_sweep() {
    const Eigen::Index n = z_.size();
    const Eigen::Index p = w_.F.rows();
    Vector c = w_.F * z_ + w_.g;
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      double lo = -inf;
      double hi = inf;
      for (Eigen::Index j = 0; j < p; ++j) {
        const double fjk = w_.F(j, k);
        if (fjk == 0.0) continue;
        const double rest = c[j] - fjk * z_[k];
        const double bound = -rest / fjk;
        if (fjk > 0.0) {
          lo = std::max(lo, bound);
        } else {
          hi = std::min(hi, bound);
        }
      }
      // Keep the current value admissible despite rounding.
      lo = std::min(lo, z_[k]);
      hi = std::max(hi, z_[k]);
      const double next = truncated_standard_normal(lo, hi, rng_);
      if (p > 0) c += w_.F.col(k) * (next - z_[k]);
      z_[k] = next;
    }
  }

 private:
  const Whitened& w_;
  Vector z_;
  std::mt19937_64& rng_;
  const SamplerOptions& options_;
};

}  // namespace

SampleBatch sample_truncated(const Vector& mu, const Eigen::LLT<Matrix>& precision_llt,
                             const Matrix& A, const Vector& b, const Vector& start, std::size_t N,
                             std::uint64_t seed, const SamplerOptions& options) {
  if (N == 0) throw ArgumentError("sample count must be at least 1");
  const Eigen::Index n = mu.size();
  if (A.cols() != n || A.rows() != b.size() || start.size() != n) {
    throw ArgumentError("sampler: inconsistent problem dimensions");
  }
  if (precision_llt.info() != Eigen::Success || precision_llt.matrixLLT().rows() != n) {
    throw ArgumentError("sampler: Cholesky factor of the precision is not available");
  }
  const Vector start_slack = A * start - b;
  if (A.rows() > 0 && start_slack.maxCoeff() > options.feasibility_tol) {
    throw ArgumentError("sampler: starting point violates the constraints");
  }

  // Q = L L^T, xi = mu + L^-T z  =>  z ~ N(0, I).
  Whitened w;
  const auto& L = precision_llt.matrixL();
  if (A.rows() > 0) {
    w.F = -(L.solve(A.transpose())).transpose();
    w.g = b - A * mu;
    w.row_norm2 = w.F.rowwise().squaredNorm();
  } else {
    w.F = Matrix::Zero(0, n);
    w.g = Vector::Zero(0);
    w.row_norm2 = Vector::Zero(0);
  }
  const Matrix U = precision_llt.matrixU();  // L^T
  auto to_xi = [&](const Vector& z) -> Vector {
    return mu + U.triangularView<Eigen::Upper>().solve(z);
  };

  SampleBatch batch;
  batch.seed = seed;
  batch.burn_in = options.burn_in.value_or(std::min<std::size_t>(100, N / 10));
  batch.draws.resize(static_cast<Eigen::Index>(N), n);
  batch.diagnostics.used_gibbs = options.kind == SamplerKind::gibbs;

  std::mt19937_64 rng(seed);
  Chain chain(w, U * (start - mu), rng, options);
  const std::size_t total = batch.burn_in + N;
  for (std::size_t it = 0; it < total; ++it) {
    ++batch.diagnostics.iterations;
    if (options.kind == SamplerKind::hmc) {
      const Vector before = chain.state();
      bool ok = chain.hmc_step(batch.diagnostics);
      if (ok && A.rows() > 0) {
        const double viol = (A * to_xi(chain.state()) - b).maxCoeff();
        ok = viol <= options.feasibility_tol;
      }
      if (!ok) {
        chain.reset(before);
        chain.gibbs_sweep();
        ++batch.diagnostics.gibbs_fallbacks;
        batch.diagnostics.used_gibbs = true;
      }
    } else {
      chain.gibbs_sweep();
    }
    if (it >= batch.burn_in) {
      const Vector xi = to_xi(chain.state());
      if (A.rows() > 0) {
        batch.diagnostics.max_violation =
            std::max(batch.diagnostics.max_violation, std::max(0.0, (A * xi - b).maxCoeff()));
      }
      batch.draws.row(static_cast<Eigen::Index>(it - batch.burn_in)) = xi.transpose();
    }
  }
  if (batch.diagnostics.gibbs_fallbacks > 0) {
    log::info("sampler: " + std::to_string(batch.diagnostics.gibbs_fallbacks) +
              " trajectories replaced by Gibbs sweeps");
  }
  return batch;
}

Vector interior_start(const ConstraintSystem& cons, const Vector& map, double delta) {
  if (static_cast<std::size_t>(map.size()) != cons.columns()) {
    throw ArgumentError("starting point does not match the constraint system");
  }
  Vector d = Vector::Zero(map.size());
  for (const auto& chain : cons.chains()) {
    for (std::size_t t = 0; t < chain.size(); ++t) d[static_cast<Eigen::Index>(chain[t])] += static_cast<double>(t);
  }
  return map + delta * d;
}

SampleBatch sample_truncated(const Posterior& post, const ConstraintSystem& cons, const Vector& map,
                             std::size_t N, std::uint64_t seed, const SamplerOptions& options) {
  if (cons.columns() != post.size()) throw ArgumentError("constraint system does not match the posterior");
  const double scale = std::max(1.0, map.size() ? map.cwiseAbs().maxCoeff() : 0.0);
  Vector start = interior_start(cons, map, 1e-7 * scale);
  if (cons.max_violation(start) > 0.0) start = interior_start(cons, map, 1e-5 * scale);
  return sample_truncated(post.mu, post.sigma_inv_llt, Matrix(cons.matrix()),
                          Vector::Zero(static_cast<Eigen::Index>(cons.size())), start, N, seed,
                          options);
}

double posterior_mean_predict(const BasisStructure& basis, const SampleBatch& batch,
                              std::span<const double> x) {
  const Vector mean = batch.mean();
  return basis.evaluate(std::span<const double>(mean.data(), static_cast<std::size_t>(mean.size())), x);
}

void write_samples_csv(std::ostream& out, const SampleBatch& batch) {
  const auto cols = batch.draws.cols();
  for (Eigen::Index c = 0; c < cols; ++c) out << (c ? "," : "") << "xi" << c + 1;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (Eigen::Index r = 0; r < batch.draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out << (c ? "," : "") << batch.draws(r, c);
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace bagp
