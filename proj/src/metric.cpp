// geoflow - conformal metric engine: bumps, curvature certificate, RK45 geodesics,
// framed shooting BVP
#include "geoflow/metric.hpp"

#include <algorithm>
#include <cstdio>

namespace geoflow {

namespace {

// Local region: the integrator reduces the frame once d0(0,z) exceeds kReduceAt, so
// field evaluations only ever see d0(0,z) <= kReduceAt + one step.
constexpr double kReduceAt = 3.4;
constexpr double kRegionD = 4.2;

// Bump profile f(r) = A (1 - (r/w)^2)^3 on r < w; C^2 at the support edge.
struct BumpEval {
  double f = 0, df = 0;    // value and radial derivative
  double lap0 = 0;         // hyperbolic Laplacian contribution
};

BumpEval eval_bump(double r, double amplitude, double w) {
  BumpEval out;
  if (r >= w) return out;
  double q = (r / w) * (r / w);
  double omq = 1.0 - q;
  out.f = amplitude * omq * omq * omq;
  out.df = -6.0 * amplitude * (r / (w * w)) * omq * omq;
  double fpp = (6.0 * amplitude / (w * w)) * omq * (5.0 * q - 1.0);
  // coth(r) f'(r) -> f''(0) as r -> 0
  double cf = (r < 1e-8) ? -6.0 * amplitude / (w * w) : (out.df / std::tanh(r));
  out.lap0 = fpp + cf;
  return out;
}

}  // namespace

FramedPoint framed(DiskPoint p) { return FramedPoint{Deck{}, p.z}; }
FramedPoint base_of(const FramedVector& v) { return FramedPoint{v.frame, v.z}; }
FramedVector reverse(const FramedVector& v) {
  return FramedVector{v.frame, v.z, std::remainder(v.theta + kPi, 2 * kPi)};
}

void apply_letter_local(int letter, cplx& z, double& theta) {
  const Mobius& g = bolza_generators_mobius()[letter];
  theta += g.direction_shift(z);
  z = g.apply(z);
}

//--------------------------------------------------------------------------------------

ConformalMetric::ConformalMetric(MetricParams params) : params_(std::move(params)) {
  bool trivial = params_.epsilon == 0.0 || params_.bumps.empty();
  if (!trivial) {
    bool all_zero = true;
    for (const auto& b : params_.bumps) all_zero = all_zero && b.amplitude == 0.0;
    trivial = all_zero;
  }
  exact_ = trivial && params_.exact_background_shortcut;

  if (!trivial) {
    double wmin = 1e9;
    for (const auto& b : params_.bumps) {
      if (b.width <= 0 || b.width > bolza::kInRadius)
        throw config_error("bump width must lie in (0, in-radius]");
      if (!in_domain(b.center, 1e-6))
        throw config_error("bump center must lie in the fundamental domain");
      wmin = std::min(wmin, b.width);
    }
    // orbit copies of each center that can reach the local region
    GroupBall b3 = enumerate_ball(3);
    for (const auto& bump : params_.bumps) {
      for (const auto& e : b3.elements) {
        cplx c = e.m.apply(bump.center);
        if (dist0(cplx(0, 0), c) <= kRegionD + bump.width) {
          copies_.push_back({c, params_.epsilon * bump.amplitude, bump.width});
        }
      }
    }
    if (params_.cert_grid_step <= 0) params_.cert_grid_step = wmin / 8.0;
  } else if (params_.cert_grid_step <= 0) {
    params_.cert_grid_step = 0.05;
  }
  certify();
}

double ConformalMetric::phi_local(cplx z) const {
  double s = 0;
  for (const auto& c : copies_) {
    // cheap Euclidean prefilter: the hyperbolic ball of radius w about c only
    // contains points with |z - c| < w (the hyperbolic metric dominates)
    if (std::norm(z - c.center) > c.width * c.width) continue;
    double r = dist0(z, c.center);
    s += eval_bump(r, c.amplitude, c.width).f;
  }
  return s;
}

cplx ConformalMetric::grad_phi_local(cplx z) const {
  cplx g(0, 0);
  for (const auto& c : copies_) {
    if (std::norm(z - c.center) > c.width * c.width) continue;
    cplx m = (z - c.center) / (1.0 - std::conj(c.center) * z);
    double am = std::abs(m);
    if (am < 1e-14) continue;  // radial symmetry: zero gradient at the center
    double r = 2.0 * std::atanh(am);
    BumpEval be = eval_bump(r, c.amplitude, c.width);
    if (be.df == 0) continue;
    cplx mp = (1.0 - std::norm(c.center)) / std::pow(1.0 - std::conj(c.center) * z, 2);
    cplx grad_r = (2.0 / (1.0 - am * am)) * (m * std::conj(mp)) / am;
    g += be.df * grad_r;
  }
  return g;
}

double ConformalMetric::lap0_phi_local(cplx z) const {
  double s = 0;
  for (const auto& c : copies_) {
    if (std::norm(z - c.center) > c.width * c.width) continue;
    double r = dist0(z, c.center);
    s += eval_bump(r, c.amplitude, c.width).lap0;
  }
  return s;
}

double ConformalMetric::phi(cplx z) const {
  if (exact_ || copies_.empty()) return 0.0;
  if (dist0(cplx(0, 0), z) > kRegionD) {
    auto [zr, deck] = reduce_local(z);
    return phi_local(zr);
  }
  return phi_local(z);
}

double ConformalMetric::conformal_factor(cplx z) const {
  double lam0 = 2.0 / (1.0 - std::norm(z));
  return exact_ ? lam0 : std::exp(phi_local(z)) * lam0;
}

double ConformalMetric::curvature(cplx z) const {
  if (dist0(cplx(0, 0), z) > kRegionD) {
    auto [zr, deck] = reduce_local(z);
    z = zr;
  }
  if (exact_) return -1.0;
  return std::exp(-2.0 * phi_local(z)) * (-1.0 - lap0_phi_local(z));
}

void ConformalMetric::certify() {
  double h = params_.cert_grid_step;
  double kmin = 1e300, kmax = -1e300;
  int n = 0;
  double phimax = 0.0;
  double lim = std::tanh(0.5 * (bolza::kCircumRadius + 0.05));
  for (double x = -lim; x <= lim; x += h) {
    for (double y = -lim; y <= lim; y += h) {
      cplx z(x, y);
      if (std::abs(z) > lim) continue;
      if (dist0(cplx(0, 0), z) > bolza::kCircumRadius + 0.05) continue;
      double k = exact_ ? -1.0
                        : std::exp(-2.0 * phi_local(z)) * (-1.0 - lap0_phi_local(z));
      kmin = std::min(kmin, k);
      kmax = std::max(kmax, k);
      if (!exact_) phimax = std::max(phimax, std::abs(phi_local(z)));
      ++n;
      if (k >= 0)
        throw config_error("metric rejected: K_g >= 0 at grid point (" +
                           std::to_string(x) + ", " + std::to_string(y) + ")");
    }
  }
  for (const auto& c : copies_) phimax = std::max(phimax, std::abs(phi_local(c.center)));
  cert_ = {kmin, kmax, h, n};
  equiv_A_ = std::exp(phimax);
}

//--------------------------------------------------------------------------------------
// RK45 (Dormand-Prince) on state (x, y, theta), t = g-arclength.  Unit g-speed is
// built into the chart; the recorded drift comes from the reconstructed velocity.

namespace {

struct State {
  double x, y, th;
};

struct Deriv {
  double dx, dy, dth;
};

}  // namespace

double ConformalMetric::raw_speed(cplx z, double theta) const {
  (void)theta;
  return 1.0 / conformal_factor(z);
}

GeodesicSegment ConformalMetric::integrate(const TangentVector& v, double t) const {
  return integrate(FramedVector{Deck{}, v.base.z, v.angle}, t);
}

GeodesicSegment ConformalMetric::integrate(const FramedVector& v0, double t_total) const {
  FramedVector v = v0;
  if (t_total < 0) {
    v = reverse(v);
    t_total = -t_total;
  }

  GeodesicSegment seg;
  seg.initial = v;
  seg.duration = t_total;
  seg.frames.push_back(v.frame);

  auto rhs = [this](const State& s) -> Deriv {
    cplx z(s.x, s.y);
    double omr2 = 1.0 - std::norm(z);
    double lam_inv;
    double ux, uy;
    if (exact_) {
      lam_inv = 0.5 * omr2;
      ux = 2.0 * s.x / omr2;
      uy = 2.0 * s.y / omr2;
    } else {
      double p = phi_local(z);
      cplx gp = grad_phi_local(z);
      lam_inv = 0.5 * omr2 * std::exp(-p);
      ux = gp.real() + 2.0 * s.x / omr2;
      uy = gp.imag() + 2.0 * s.y / omr2;
    }
    double c = std::cos(s.th), sn = std::sin(s.th);
    return {lam_inv * c, lam_inv * sn, lam_inv * (uy * c - ux * sn)};
  };

  // Dormand-Prince coefficients
  static const double A21 = 1.0 / 5;
  static const double A31 = 3.0 / 40, A32 = 9.0 / 40;
  static const double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
  static const double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                      A54 = -212.0 / 729;
  static const double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                      A64 = 49.0 / 176, A65 = -5103.0 / 18656;
  static const double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                      B5 = -2187.0 / 6784, B6 = 11.0 / 84;
  static const double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                      E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;

  State s{v.z.real(), v.z.imag(), v.theta};
  double t = 0;
  double h = std::min(0.02, t_total > 0 ? t_total : 0.02);
  const double atol = params_.ode_tol;
  const double hmax = 0.05;

  int cur_frame = 0;
  auto push_sample = [&](double tt, const State& st) {
    seg.samples.push_back({tt, cplx(st.x, st.y), st.th, cur_frame});
  };
  push_sample(0.0, s);

  if (t_total == 0) return seg;

  Deriv k1 = rhs(s);
  int guard = 0;
  while (t < t_total) {
    if (++guard > 4000000) throw solver_error("integrate: step guard exceeded");
    bool last = false;
    if (t + h >= t_total) {
      h = t_total - t;
      last = true;
    }
    auto stage = [&](double a1, double a2, double a3, double a4, double a5, double a6,
                     const Deriv& d1, const Deriv& d2, const Deriv& d3, const Deriv& d4,
                     const Deriv& d5, const Deriv& d6) -> State {
      return {s.x + h * (a1 * d1.dx + a2 * d2.dx + a3 * d3.dx + a4 * d4.dx + a5 * d5.dx +
                         a6 * d6.dx),
              s.y + h * (a1 * d1.dy + a2 * d2.dy + a3 * d3.dy + a4 * d4.dy + a5 * d5.dy +
                         a6 * d6.dy),
              s.th + h * (a1 * d1.dth + a2 * d2.dth + a3 * d3.dth + a4 * d4.dth +
                          a5 * d5.dth + a6 * d6.dth)};
    };
    Deriv z0{0, 0, 0};
    Deriv k2 = rhs(stage(A21, 0, 0, 0, 0, 0, k1, z0, z0, z0, z0, z0));
    Deriv k3 = rhs(stage(A31, A32, 0, 0, 0, 0, k1, k2, z0, z0, z0, z0));
    Deriv k4 = rhs(stage(A41, A42, A43, 0, 0, 0, k1, k2, k3, z0, z0, z0));
    Deriv k5 = rhs(stage(A51, A52, A53, A54, 0, 0, k1, k2, k3, k4, z0, z0));
    Deriv k6 = rhs(stage(A61, A62, A63, A64, A65, 0, k1, k2, k3, k4, k5, z0));
    State y5 = stage(B1, 0, B3, B4, B5, B6, k1, z0, k3, k4, k5, k6);
    Deriv k7 = rhs(y5);
    double ex = h * (E1 * k1.dx + E3 * k3.dx + E4 * k4.dx + E5 * k5.dx + E6 * k6.dx +
                     E7 * k7.dx);
    double ey = h * (E1 * k1.dy + E3 * k3.dy + E4 * k4.dy + E5 * k5.dy + E6 * k6.dy +
                     E7 * k7.dy);
    double eth = h * (E1 * k1.dth + E3 * k3.dth + E4 * k4.dth + E5 * k5.dth +
                      E6 * k6.dth + E7 * k7.dth);
    double err = std::max({std::abs(ex), std::abs(ey), std::abs(eth)});
    double tol_step = atol * h;
    if (err <= tol_step) {
      t += h;
      s = y5;
      k1 = k7;  // first-same-as-last
      cplx z(s.x, s.y);
      if (dist0(cplx(0, 0), z) > kReduceAt) {
        double th = s.th;
        Deck f = seg.frames[size_t(cur_frame)];
        const auto& gens = bolza_generators_mobius();
        for (int it = 0; it < 16; ++it) {
          double cur = dist0(cplx(0, 0), z);
          int best = -1;
          double bd = cur - 1e-13;
          for (int k = 0; k < 8; ++k) {
            double d = dist0(cplx(0, 0), gens[k].apply(z));
            if (d < bd) {
              bd = d;
              best = k;
            }
          }
          if (best < 0 || cur <= 1.6) break;
          apply_letter_local(best, z, th);
          f.push(Word::inverse_letter(best));
        }
        s = {z.real(), z.imag(), th};
        seg.frames.push_back(f);
        cur_frame = int(seg.frames.size()) - 1;
        k1 = rhs(s);  // derivative in the new chart
      }
      push_sample(t, s);
      if (last) break;
    }
    double fac = err > 0 ? 0.9 * std::pow(tol_step / err, 0.2) : 4.0;
    h *= std::clamp(fac, 0.2, 4.0);
    h = std::min(h, hmax);
    if (h < 1e-10)
      throw solver_error("integrate: step-size underflow at t = " + std::to_string(t));
  }

  double drift = 0;
  for (const auto& sp : seg.samples) {
    double sp_speed = conformal_factor(sp.z) * raw_speed(sp.z, sp.theta);
    drift = std::max(drift, std::abs(sp_speed - 1.0));
  }
  seg.speed_drift = drift;
  return seg;
}

//--------------------------------------------------------------------------------------

FramedVector GeodesicSegment::front() const {
  const auto& sp = samples.front();
  return {frames[size_t(sp.frame)], sp.z, sp.theta};
}

FramedVector GeodesicSegment::back() const {
  const auto& sp = samples.back();
  return {frames[size_t(sp.frame)], sp.z, sp.theta};
}

FramedVector GeodesicSegment::at_time(double t) const {
  if (samples.empty()) throw solver_error("at_time on empty segment");
  t = std::clamp(t, 0.0, duration);
  size_t lo = 0, hi = samples.size() - 1;
  while (lo + 1 < hi) {
    size_t mid = (lo + hi) / 2;
    if (samples[mid].t <= t)
      lo = mid;
    else
      hi = mid;
  }
  const SamplePoint& a = samples[lo];
  SamplePoint b = samples[hi];
  if (b.frame != a.frame) {
    // express b in a's frame (the relative word is a few letters)
    Deck rel = frames[size_t(a.frame)].relative_to(frames[size_t(b.frame)]);
    Mobius m = deck_matrix(rel);
    b.theta += m.direction_shift(b.z);
    b.z = m.apply(b.z);
  }
  double dt = b.t - a.t;
  if (dt <= 0) return {frames[size_t(a.frame)], a.z, a.theta};
  double u = (t - a.t) / dt;
  // Hermite on position; endpoint velocities from the direction angles at chord speed
  cplx va = std::polar(std::abs(b.z - a.z) / dt, a.theta);
  cplx vb = std::polar(std::abs(b.z - a.z) / dt, b.theta);
  double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  cplx z = h00 * a.z + h10 * dt * va + h01 * b.z + h11 * dt * vb;
  double dth = std::remainder(b.theta - a.theta, 2 * kPi);
  double theta = a.theta + u * dth;
  return {frames[size_t(a.frame)], z, theta};
}

//--------------------------------------------------------------------------------------
// Framed shooting.

namespace {

// Direction at p (local z, frame) toward the framed point q, background metric.
double initial_direction(const FramedPoint& p, const FramedPoint& q) {
  Deck rel = p.frame.relative_to(q.frame);
  Mobius m = deck_matrix(rel);
  double d = dist0_framed(p.z, m, q.z);
  if (d < 25.0) {
    cplx qz = m.apply(q.z);
    if (std::abs(qz) < 1.0 - 1e-14) return direction_to_point0(p.z, qz);
  }
  // beyond raw representation: aim at the boundary angle of the image
  cplx num = m.a * q.z + m.b;
  cplx den = std::conj(m.b) * q.z + std::conj(m.a);
  double ang = std::arg(num) - std::arg(den);
  return direction_to_boundary0(p.z, ang);
}

}  // namespace

double ConformalMetric::dist0_frames(const FramedPoint& p, const FramedPoint& q) {
  Deck rel = p.frame.relative_to(q.frame);
  if (rel.size() > 400) throw solver_error("dist0_frames: relative word too long");
  return dist0_framed(p.z, deck_matrix(rel), q.z);
}

GeodesicSegment ConformalMetric::connect(DiskPoint p, DiskPoint q) const {
  auto [pz, pd] = reduce_local(p.z);
  auto [qz, qd] = reduce_local(q.z);
  return connect(FramedPoint{pd.inverse(), pz}, FramedPoint{qd.inverse(), qz});
}

GeodesicSegment ConformalMetric::connect_short(const FramedPoint& p,
                                               const FramedPoint& q) const {
  // Single shooting; valid while the endpoint-miss linearization holds, i.e. the
  // transversal separation at the far end stays of order 1 (d0 a few units).
  double d0 = dist0_frames(p, q);
  double theta = initial_direction(p, q);
  double t = d0;
  double tol = std::max(params_.bvp_tol, 50.0 * 2.2e-16 * std::exp(0.5 * d0));
  GeodesicSegment seg;
  double prev_miss = 1e300;
  int stall = 0;
  for (int it = 0;; ++it) {
    if (it >= 120) throw solver_error("connect: no convergence");
    seg = integrate(FramedVector{p.frame, p.z, theta}, t);
    FramedVector e = seg.back();
    Deck rel = e.frame.relative_to(q.frame);
    if (rel.size() > 64)
      throw solver_error("connect: shooting diverged (relative word too long)");
    Mobius m = deck_matrix(rel);
    double dmiss0 = dist0_framed(e.z, m, q.z);
    double gscale = std::exp(phi_local(e.z));
    double miss = dmiss0 * gscale;
    if (miss < tol) break;
    cplx q_in_e = m.apply(q.z);
    double psi = direction_to_point0(e.z, q_in_e);
    double alpha = std::remainder(psi - e.theta, 2 * kPi);
    double longi = miss * std::cos(alpha);
    double trans = miss * std::sin(alpha);
    // transversal Jacobian ~ sinh(t) in curvature near -1
    double J = std::max(std::sinh(std::min(t, 300.0)), 1e-3);
    double damp = 1.0;
    if (miss > prev_miss && it > 0) {
      ++stall;
      damp = 1.0 / double(1 << std::min(stall, 4));
    } else {
      stall = 0;
    }
    theta += damp * std::clamp(trans / J, -0.3, 0.3);
    t += damp * std::clamp(longi, -0.4 * t, 0.4 * t);
    if (t < 0.05 * d0) t = 0.05 * d0;
    if (t > 3.0 * d0 + 5.0) throw solver_error("connect: shooting diverged (length)");
    prev_miss = miss;
  }
  return seg;
}

namespace {

// Framed node on the multiple-shooting chain.
struct ChainNode {
  FramedPoint pt;
  double cross_dir = 0.0;  // local direction of the transversal cross-section
};

}  // namespace

GeodesicSegment ConformalMetric::connect_chain(const FramedPoint& p,
                                               const FramedPoint& q) const {
  // Nodes along the g0 geodesic from p to q, every ~2 units; Newton iteration on the
  // transversal node offsets driving the inter-node angle mismatches to zero.  Each
  // local connect stays inside the single-shooting basin.
  double d0 = dist0_frames(p, q);
  int n_seg = std::max(2, int(std::ceil(d0 / 2.0)));
  int n_int = n_seg - 1;  // interior nodes

  // initial nodes on the background geodesic, frame-reduced while walking
  std::vector<ChainNode> nodes(size_t(n_seg) + 1);
  nodes.front().pt = p;
  nodes.back().pt = q;
  {
    cplx z = p.z;
    double th = initial_direction(p, q);
    Deck f = p.frame;
    const auto& gens = bolza_generators_mobius();
    for (int i = 1; i < n_seg; ++i) {
      flow0(z, th, d0 / n_seg);
      for (int it = 0; it < 16 && dist0(cplx(0, 0), z) > kReduceAt; ++it) {
        double cur = dist0(cplx(0, 0), z);
        int best = -1;
        double bd = cur - 1e-13;
        for (int k = 0; k < 8; ++k) {
          double dd = dist0(cplx(0, 0), gens[k].apply(z));
          if (dd < bd) {
            bd = dd;
            best = k;
          }
        }
        if (best < 0) break;
        apply_letter_local(best, z, th);
        f.push(Word::inverse_letter(best));
      }
      nodes[size_t(i)].pt = FramedPoint{f, z};
      nodes[size_t(i)].cross_dir = th + 0.5 * kPi;
    }
  }

  // local connect between consecutive nodes; returns (start angle, end angle, length)
  struct Leg {
    double th_start, th_end, len;
  };
  auto solve_leg = [&](const FramedPoint& a, const FramedPoint& b) -> Leg {
    GeodesicSegment s = connect_short(a, b);
    FramedVector e = s.back();
    // express the end direction in b's frame
    Deck rel = b.frame.relative_to(e.frame);
    double shift = deck_matrix(rel).direction_shift(e.z);
    return {s.initial.theta, e.theta + shift, s.duration};
  };

  auto node_at = [&](int i, double s) -> FramedPoint {
    if (s == 0.0 || i == 0 || i == n_seg) return nodes[size_t(i)].pt;
    cplx z = nodes[size_t(i)].pt.z;
    double th = nodes[size_t(i)].cross_dir;
    flow0(z, th, s);
    return FramedPoint{nodes[size_t(i)].pt.frame, z};
  };

  if (n_int > 0) {
    std::vector<double> r(size_t(n_int), 0.0);
    auto residuals = [&](const std::vector<double>& s, std::vector<double>& out) {
      std::vector<FramedPoint> pts(size_t(n_seg) + 1);
      for (int i = 0; i <= n_seg; ++i)
        pts[size_t(i)] = node_at(i, (i >= 1 && i <= n_int) ? s[size_t(i - 1)] : 0.0);
      for (int i = 1; i <= n_int; ++i) {
        Leg in = solve_leg(pts[size_t(i - 1)], pts[size_t(i)]);
        Leg out_leg = solve_leg(pts[size_t(i)], pts[size_t(i + 1)]);
        out[size_t(i - 1)] = std::remainder(out_leg.th_start - in.th_end, 2 * kPi);
      }
    };

    std::vector<double> s(size_t(n_int), 0.0);
    const double fd = 1e-6;
    for (int iter = 0; iter < 30; ++iter) {
      residuals(s, r);
      double rmax = 0;
      for (double v : r) rmax = std::max(rmax, std::abs(v));
      if (rmax < 1e-8) break;
      if (iter == 29)
        throw solver_error("connect: chain Newton did not converge (residual " +
                           std::to_string(rmax) + ")");
      // tridiagonal Jacobian by finite differences
      std::vector<double> dl(size_t(n_int), 0), dm(size_t(n_int), 0), du(size_t(n_int), 0);
      std::vector<double> rp(size_t(n_int), 0.0);
      for (int j = 0; j < n_int; ++j) {
        std::vector<double> sp = s;
        sp[size_t(j)] += fd;
        residuals(sp, rp);
        for (int i = std::max(0, j - 1); i <= std::min(n_int - 1, j + 1); ++i) {
          double der = (rp[size_t(i)] - r[size_t(i)]) / fd;
          if (i == j)
            dm[size_t(j)] = der;
          else if (i == j - 1)
            du[size_t(j - 1)] = der;  // d r_{j-1} / d s_j
          else
            dl[size_t(j)] = der;  // d r_{j+1} / d s_j  (sub-diagonal entry at row j+1)
        }
      }
      // Thomas algorithm on J ds = -r  (J rows: [dl_i, dm_i, du_i])
      std::vector<double> c(size_t(n_int), 0.0), dvec(size_t(n_int), 0.0);
      double m0 = dm[0];
      if (std::abs(m0) < 1e-14) throw solver_error("connect: singular chain Jacobian");
      c[0] = (n_int > 1) ? du[0] / m0 : 0.0;
      dvec[0] = -r[0] / m0;
      for (int i = 1; i < n_int; ++i) {
        double denom = dm[size_t(i)] - dl[size_t(i)] * c[size_t(i - 1)];
        if (std::abs(denom) < 1e-14) throw solver_error("connect: singular chain Jacobian");
        c[size_t(i)] = (i + 1 < n_int) ? du[size_t(i)] / denom : 0.0;
        dvec[size_t(i)] = (-r[size_t(i)] - dl[size_t(i)] * dvec[size_t(i - 1)]) / denom;
      }
      std::vector<double> ds(size_t(n_int), 0.0);
      ds[size_t(n_int - 1)] = dvec[size_t(n_int - 1)];
      for (int i = n_int - 2; i >= 0; --i)
        ds[size_t(i)] = dvec[size_t(i)] - c[size_t(i)] * ds[size_t(i + 1)];
      for (int i = 0; i < n_int; ++i)
        s[size_t(i)] += std::clamp(ds[size_t(i)], -0.4, 0.4);
    }

    // bake the solved offsets into the node positions
    for (int i = 1; i <= n_int; ++i) nodes[size_t(i)].pt = node_at(i, s[size_t(i - 1)]);
  }

  // Stitch the legs into one segment.  Re-shooting from the initial vector would
  // amplify the residual junction kinks by sinh(d0), so the polyline itself is the
  // answer; its kinks are below 1e-8 rad and contribute O(kink^2) to the length.
  GeodesicSegment out;
  double t_off = 0.0;
  for (int i = 0; i < n_seg; ++i) {
    GeodesicSegment leg = connect_short(nodes[size_t(i)].pt, nodes[size_t(i + 1)].pt);
    if (i == 0) {
      out.initial = leg.initial;
      out.frames = leg.frames;
      out.samples = leg.samples;
      for (auto& sp : out.samples) sp.t += t_off;
    } else {
      int base = int(out.frames.size());
      out.frames.insert(out.frames.end(), leg.frames.begin(), leg.frames.end());
      for (size_t k = 1; k < leg.samples.size(); ++k) {  // skip duplicate junction
        SamplePoint sp = leg.samples[k];
        sp.t += t_off;
        sp.frame += base;
        out.samples.push_back(sp);
      }
    }
    out.speed_drift = std::max(out.speed_drift, leg.speed_drift);
    t_off += leg.duration;
  }
  out.duration = t_off;
  return out;
}

GeodesicSegment ConformalMetric::connect(const FramedPoint& p,
                                         const FramedPoint& q) const {
  double d0 = dist0_frames(p, q);
  if (d0 < 1e-14) {
    GeodesicSegment seg;  // zero-length by convention
    seg.initial = FramedVector{p.frame, p.z, 0.0};
    seg.duration = 0.0;
    seg.frames.push_back(p.frame);
    seg.samples.push_back({0.0, p.z, 0.0, 0});
    return seg;
  }
  if (exact_) {
    double theta0 = initial_direction(p, q);
    return integrate(FramedVector{p.frame, p.z, theta0}, d0);
  }
  if (d0 <= 3.0) return connect_short(p, q);
  return connect_chain(p, q);
}

double ConformalMetric::dist(DiskPoint p, DiskPoint q) const {
  if (exact_) return dist0(p, q);
  return connect(p, q).duration;
}

double ConformalMetric::dist(const FramedPoint& p, const FramedPoint& q) const {
  if (exact_) return dist0_frames(p, q);
  return connect(p, q).duration;
}

}  // namespace geoflow
