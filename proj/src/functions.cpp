#include "mdfn/functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mdfn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double central_difference(const std::function<double(double)>& f, double xi) {
  const double h = kDerivativeStep;
  if (xi < h) return (f(xi + h) - f(xi)) / h;
  return (f(xi + h) - f(xi - h)) / (2.0 * h);
}

}  // namespace

double PiecewiseLinear::operator()(double x) const {
  if (xs.empty()) return 0.0;
  if (xs.size() == 1) return ys.front();
  if (x <= xs.front()) return ys.front();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  if (hi >= xs.size()) hi = xs.size() - 1;
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

double PiecewiseLinear::slope_at(double x) const {
  if (xs.size() < 2) return 0.0;
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  hi = std::clamp<std::size_t>(hi, 1, xs.size() - 1);
  return (ys[hi] - ys[hi - 1]) / (xs[hi] - xs[hi - 1]);
}

double DemandFunction::operator()(double xi) const {
  return std::visit(
      overloaded{
          [&](const LinearDemand& d) { return d.slope * xi; },
          [&](const SaturatingDemand& d) { return d.vmax * xi / (d.half + xi); },
          [&](const TabulatedDemand& d) {
            const auto& t = d.table;
            if (!t.xs.empty() && xi > t.xs.back())
              return t.ys.back() + t.slope_at(t.xs.back()) * (xi - t.xs.back());
            return t(xi);
          },
          [&](const CustomDemand& d) { return d.value(xi); },
      },
      kind_);
}

double DemandFunction::derivative(double xi) const {
  return std::visit(
      overloaded{
          [&](const LinearDemand& d) { return d.slope; },
          [&](const SaturatingDemand& d) {
            const double denom = d.half + xi;
            return d.vmax * d.half / (denom * denom);
          },
          [&](const TabulatedDemand&) {
            return central_difference([this](double v) { return (*this)(v); }, xi);
          },
          [&](const CustomDemand& d) {
            if (d.derivative) return d.derivative(xi);
            return central_difference(d.value, xi);
          },
      },
      kind_);
}

double DemandFunction::supremum() const {
  if (const auto* lin = std::get_if<LinearDemand>(&kind_))
    return lin->slope > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  return (*this)(kInverseBracket);
}

double DemandFunction::inverse(double flow) const {
  if (flow < 0.0 || std::isnan(flow)) {
    std::ostringstream msg;
    msg << "demand inverse: negative flow " << flow;
    throw DemandRangeError(msg.str());
  }
  if (flow == 0.0) return 0.0;
  if (const auto* lin = std::get_if<LinearDemand>(&kind_)) return flow / lin->slope;

  double lo = 0.0;
  double hi = kInverseBracket;
  if ((*this)(hi) < flow) {
    std::ostringstream msg;
    msg << "demand inverse: flow " << flow << " exceeds demand range (sup "
        << (*this)(hi) << " on [0, " << kInverseBracket << "])";
    throw DemandRangeError(msg.str());
  }
  // Bisection until the bracket or the residual is below tolerance.
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double value = (*this)(mid);
    if (std::abs(value - flow) <= 0.1 * kInverseTolerance) return mid;
    if (value < flow)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

double SupplyFunction::operator()(double xi) const {
  return std::visit(
      overloaded{
          [&](const AffineSupply& s) { return std::max(s.intercept - s.slope * xi, 0.0); },
          [&](const TabulatedSupply& s) { return std::max(s.table(xi), 0.0); },
          [&](const CustomSupply& s) { return std::max(s.value(xi), 0.0); },
      },
      kind_);
}

double SupplyFunction::infimum() const {
  if (const auto* aff = std::get_if<AffineSupply>(&kind_))
    return aff->slope > 0 ? 0.0 : std::max(aff->intercept, 0.0);
  return (*this)(kInverseBracket);
}

std::string check_demand(const DemandFunction& d, const GridCheck& grid) {
  std::ostringstream msg;
  const double at_zero = d(0.0);
  if (at_zero != 0.0) {
    msg << "d(0) = " << at_zero << ", expected 0";
    return msg.str();
  }
  const int n = std::max(grid.points, 2);
  double prev = at_zero;
  for (int p = 0; p < n; ++p) {
    const double xi = grid.xi_max * p / (n - 1);
    const double slope = d.derivative(xi);
    if (!(slope > 0.0)) {
      msg << "d'(" << xi << ") = " << slope << ", expected > 0";
      return msg.str();
    }
    if (p > 0) {
      const double value = d(xi);
      if (!(value > prev)) {
        msg << "d not strictly increasing near xi = " << xi;
        return msg.str();
      }
      prev = value;
    }
  }
  return {};
}

std::string check_supply(const SupplyFunction& s, const GridCheck& grid) {
  std::ostringstream msg;
  const double at_zero = s(0.0);
  if (!(at_zero > 0.0)) {
    msg << "s(0) = " << at_zero << ", expected > 0";
    return msg.str();
  }
  const int n = std::max(grid.points, 2);
  double prev = at_zero;
  for (int p = 1; p < n; ++p) {
    const double xi = grid.xi_max * p / (n - 1);
    const double value = s(xi);
    if (value > prev) {
      msg << "s increases near xi = " << xi;
      return msg.str();
    }
    prev = value;
  }
  return {};
}

}  // namespace mdfn
