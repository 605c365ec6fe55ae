#include "kkstab/product_oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace kkstab {

FullGridWave3::FullGridWave3(const FullGridConfig& cfg, double t_start, const ProductProfile& h0,
                             const ProductProfile& h1, double support)
    : cfg_(cfg), t_(t_start), t0_(t_start), support_(support) {
  if (!(cfg.dr > 0.0) || !(cfg.dt > 0.0) || !(cfg.r_max > support))
    throw std::invalid_argument("full-grid solver needs dr, dt > 0 and r_max beyond the support");
  if (cfg.torus_points < 2 || cfg.torus_points % 2)
    throw std::invalid_argument("full-grid solver needs an even number of torus points");
  if (cfg.dt > 0.5 * cfg.dr) throw std::invalid_argument("full-grid time step exceeds dr / 2");
  K_ = static_cast<int>(std::lround(cfg.r_max / cfg.dr)) + 1;
  N_ = cfg.torus_points;

  // Spectral second derivative on N equispaced points of a circle of length L.
  const double h = 2.0 * M_PI / N_;
  const double scale = std::pow(2.0 * M_PI / cfg.period, 2);
  d2theta_.assign(N_ * N_, 0.0);
  for (int i = 0; i < N_; ++i)
    for (int j = 0; j < N_; ++j) {
      if (i == j) {
        d2theta_[i * N_ + j] = scale * (-M_PI * M_PI / (3.0 * h * h) - 1.0 / 6.0);
      } else {
        const double s = std::sin((i - j) * h / 2.0);
        d2theta_[i * N_ + j] = scale * (((i - j) % 2 == 0) ? -0.5 : 0.5) / (s * s);
      }
    }

  w_.assign(K_ * N_, 0.0);
  v_.assign(K_ * N_, 0.0);
  for (int k = 0; k < K_; ++k) {
    const double r = k * cfg.dr;
    for (int m = 0; m < N_; ++m) {
      const double th = m * cfg.period / N_;
      w_[k * N_ + m] = r * h0(r, th);
      v_[k * N_ + m] = r * h1(r, th);
    }
  }
}

int FullGridWave3::active_nodes() const {
  const double reach = support_ + std::abs(t_ - t0_) + cfg_.causal_margin;
  return std::min(K_, static_cast<int>(reach / cfg_.dr) + 4);
}

void FullGridWave3::rhs(const std::vector<double>& w, const std::vector<double>& v, std::vector<double>& dw,
                        std::vector<double>& dv, int kmax) const {
  static constexpr double c[4] = {-49.0 / 18.0, 1.5, -0.15, 1.0 / 90.0};
  const double inv_h2 = 1.0 / (cfg_.dr * cfg_.dr);
  auto at = [&](int k, int m) {
    if (k < 0) return -w[(-k) * N_ + m];
    if (k >= K_) return 0.0;
    return w[k * N_ + m];
  };
  for (int k = 0; k < kmax; ++k) {
    for (int m = 0; m < N_; ++m) {
      double lap = c[0] * w[k * N_ + m];
      for (int j = 1; j <= 3; ++j) lap += c[j] * (at(k + j, m) + at(k - j, m));
      lap *= inv_h2;
      const double* row = &d2theta_[m * N_];
      for (int q = 0; q < N_; ++q) lap += row[q] * w[k * N_ + q];
      dw[k * N_ + m] = v[k * N_ + m];
      dv[k * N_ + m] = k == 0 ? 0.0 : lap;
    }
  }
}

void FullGridWave3::advance_to(double t) {
  const double steps_real = (t - t_) / cfg_.dt;
  const long long steps = std::llround(steps_real);
  if (steps < 0 || std::abs(steps_real - steps) > 1e-9)
    throw std::invalid_argument("full-grid target time is not a whole number of steps ahead");
  const double t_begin = t_;
  const std::size_t size = w_.size();
  std::vector<double> kw[4], kv[4], tw(size), tv(size);
  for (int s = 0; s < 4; ++s) {
    kw[s].assign(size, 0.0);
    kv[s].assign(size, 0.0);
  }
  for (long long i = 0; i < steps; ++i) {
    const int kmax = active_nodes();
    const std::size_t used = static_cast<std::size_t>(kmax) * N_;
    const double dt = cfg_.dt;
    rhs(w_, v_, kw[0], kv[0], kmax);
    for (std::size_t j = 0; j < used; ++j) {
      tw[j] = w_[j] + 0.5 * dt * kw[0][j];
      tv[j] = v_[j] + 0.5 * dt * kv[0][j];
    }
    rhs(tw, tv, kw[1], kv[1], kmax);
    for (std::size_t j = 0; j < used; ++j) {
      tw[j] = w_[j] + 0.5 * dt * kw[1][j];
      tv[j] = v_[j] + 0.5 * dt * kv[1][j];
    }
    rhs(tw, tv, kw[2], kv[2], kmax);
    for (std::size_t j = 0; j < used; ++j) {
      tw[j] = w_[j] + dt * kw[2][j];
      tv[j] = v_[j] + dt * kv[2][j];
    }
    rhs(tw, tv, kw[3], kv[3], kmax);
    for (std::size_t j = 0; j < used; ++j) {
      w_[j] += dt / 6.0 * (kw[0][j] + 2.0 * kw[1][j] + 2.0 * kw[2][j] + kw[3][j]);
      v_[j] += dt / 6.0 * (kv[0][j] + 2.0 * kv[1][j] + 2.0 * kv[2][j] + kv[3][j]);
    }
    t_ = t_begin + static_cast<double>(i + 1) * dt;
  }
}

TinyProductGrid FullGridWave3::snapshot() const {
  TinyProductGrid out;
  out.torus = FlatTorus::cube(1, cfg_.period);
  out.points = N_;
  out.r.resize(K_);
  out.values.assign(K_, std::vector<double>(N_, 0.0));
  const double h = cfg_.dr;
  for (int k = 0; k < K_; ++k) {
    out.r[k] = k * h;
    for (int m = 0; m < N_; ++m) {
      if (k == 0) {
        // h(0) = w'(0); odd symmetry turns the centred sixth-order stencil one sided.
        out.values[0][m] = (90.0 * w_[N_ + m] - 18.0 * w_[2 * N_ + m] + 2.0 * w_[3 * N_ + m]) / (60.0 * h);
      } else {
        out.values[k][m] = w_[k * N_ + m] / out.r[k];
      }
    }
  }
  return out;
}

}  // namespace kkstab
