// geoflow - conformally perturbed metric g = e^{2 phi} g0: curvature certificate,
// geodesic integration, boundary-value connection, distance
#pragma once

#include "geoflow/common.hpp"
#include "geoflow/fuchsian.hpp"

namespace geoflow {

struct Bump {
  cplx center;       // in the fundamental domain
  double amplitude;  // multiplied by the global epsilon
  double width;      // support radius in g0 units
};

struct MetricParams {
  std::vector<Bump> bumps;
  double epsilon = 0.0;
  double ode_tol = 1e-9;   // local error per unit arclength
  double bvp_tol = 1e-9;   // endpoint miss, g units (depth-aware floor applies)
  double cert_grid_step = 0.0;       // 0 = min bump width / 8
  bool exact_background_shortcut = true;  // closed forms when epsilon == 0 / no bumps
};

struct CurvatureCertificate {
  double k_min = -1.0;
  double k_max = -1.0;
  double grid_step = 0.0;
  int grid_points = 0;
};

struct TangentVector {
  DiskPoint base;
  double angle = 0.0;  // Euclidean direction of the velocity; unit g-speed implied
};

struct SamplePoint {
  double t;      // g-arclength from the start
  cplx z;        // local coordinates
  double theta;  // local direction angle
  int frame;     // index into GeodesicSegment::frames
};

struct GeodesicSegment {
  FramedVector initial;
  double duration = 0.0;
  std::vector<SamplePoint> samples;  // first at t=0, last at t=duration
  std::vector<Deck> frames;          // frames[0] is the initial frame
  double speed_drift = 0.0;          // max |lambda |dz/dt| - 1| over samples

  FramedVector at_time(double t) const;  // Hermite interpolation between samples
  FramedVector front() const;
  FramedVector back() const;
};

class ConformalMetric {
 public:
  explicit ConformalMetric(MetricParams params);

  const MetricParams& params() const { return params_; }
  const CurvatureCertificate& certificate() const { return cert_; }
  bool exact_background() const { return exact_; }
  double equivalence_constant() const { return equiv_A_; }

  // Gamma-invariant conformal exponent; z anywhere in the disk.
  double phi(cplx z) const;
  // Metric density lambda = e^{phi} 2/(1-|z|^2); z within the local region.
  double conformal_factor(cplx z) const;
  double curvature(cplx z) const;

  // Geodesic flow (initial value problem).  Negative t reverses the vector.
  GeodesicSegment integrate(const TangentVector& v, double t) const;
  GeodesicSegment integrate(const FramedVector& v, double t) const;

  // Unique geodesic from p to q by framed angle/length shooting.
  GeodesicSegment connect(DiskPoint p, DiskPoint q) const;
  GeodesicSegment connect(const FramedPoint& p, const FramedPoint& q) const;

  double dist(DiskPoint p, DiskPoint q) const;
  double dist(const FramedPoint& p, const FramedPoint& q) const;

  // g0 distance between framed points (closed form, any depth).
  static double dist0_frames(const FramedPoint& p, const FramedPoint& q);

  // phi and derivatives in local coordinates (|z| within the precomputed region;
  // no reduction performed).
  double phi_local(cplx z) const;
  cplx grad_phi_local(cplx z) const;     // (d/dx, d/dy) as a complex number
  double lap0_phi_local(cplx z) const;   // hyperbolic Laplacian of phi

 private:
  struct BumpCopy {
    cplx center;
    double amplitude;  // epsilon * amplitude
    double width;
  };

  void certify();
  double raw_speed(cplx z, double theta) const;
  GeodesicSegment connect_short(const FramedPoint& p, const FramedPoint& q) const;
  GeodesicSegment connect_chain(const FramedPoint& p, const FramedPoint& q) const;

  MetricParams params_;
  std::vector<BumpCopy> copies_;  // orbit copies reaching the local region
  CurvatureCertificate cert_;
  double equiv_A_ = 1.0;
  bool exact_ = false;
};

// Free helpers used across modules.
FramedPoint framed(DiskPoint p);
FramedPoint base_of(const FramedVector& v);
FramedVector reverse(const FramedVector& v);
// Transform (z, theta) by one generator letter, in place.
void apply_letter_local(int letter, cplx& z, double& theta);

}  // namespace geoflow
