#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mdfn {

/// Bracket used for numerical inversion and for sup/inf of general functions.
inline constexpr double kInverseBracket = 1e6;
inline constexpr double kInverseTolerance = 1e-10;
/// Step for central differences on tabulated demand curves.
inline constexpr double kDerivativeStep = 1e-6;

/// Raised when a requested flow exceeds the range of a demand function.
class DemandRangeError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Piecewise-linear curve through (x_0, y_0), ..., (x_n, y_n) with x
/// strictly increasing.
struct PiecewiseLinear {
  std::vector<double> xs;
  std::vector<double> ys;

  double operator()(double x) const;
  double slope_at(double x) const;
};

/// d(xi) = slope * xi.
struct LinearDemand {
  double slope = 1.0;
};

/// d(xi) = vmax * xi / (half + xi); bounded above by vmax.
struct SaturatingDemand {
  double vmax = 1.0;
  double half = 1.0;
};

/// Tabulated curve; beyond the last point it continues with the last slope.
struct TabulatedDemand {
  PiecewiseLinear table;
};

struct CustomDemand {
  std::function<double(double)> value;
  std::function<double(double)> derivative;  // optional; central differences otherwise
  std::string name = "custom";
};

/// Per-commodity demand d_i^(k): maximum outflow as a function of the
/// commodity's own density.
class DemandFunction {
public:
  using Kind = std::variant<LinearDemand, SaturatingDemand, TabulatedDemand, CustomDemand>;

  DemandFunction() = default;
  DemandFunction(Kind kind) : kind_(std::move(kind)) {}  // NOLINT(google-explicit-constructor)

  static DemandFunction linear(double slope) { return {LinearDemand{slope}}; }
  static DemandFunction saturating(double vmax, double half) {
    return {SaturatingDemand{vmax, half}};
  }

  double operator()(double xi) const;
  double derivative(double xi) const;

  /// Smallest xi with d(xi) = flow. Closed form for linear demand,
  /// bisection on [0, 1e6] otherwise. Throws DemandRangeError if flow is
  /// negative or above the supremum.
  double inverse(double flow) const;

  /// sup d over [0, inf) (linear) or [0, 1e6] (general).
  double supremum() const;

  bool is_linear() const { return std::holds_alternative<LinearDemand>(kind_); }
  const Kind& kind() const { return kind_; }

private:
  Kind kind_ = LinearDemand{};
};

/// s(xi) = max(intercept - slope * xi, 0).
struct AffineSupply {
  double intercept = 1.0;
  double slope = 0.0;
};

/// Tabulated curve; constant beyond the last point, clamped at zero.
struct TabulatedSupply {
  PiecewiseLinear table;
};

struct CustomSupply {
  std::function<double(double)> value;
  std::string name = "custom";
};

/// Cell supply s_i: maximum total inflow as a function of aggregate density.
class SupplyFunction {
public:
  using Kind = std::variant<AffineSupply, TabulatedSupply, CustomSupply>;

  SupplyFunction() = default;
  SupplyFunction(Kind kind) : kind_(std::move(kind)) {}  // NOLINT(google-explicit-constructor)

  static SupplyFunction affine(double intercept, double slope) {
    return {AffineSupply{intercept, slope}};
  }

  double operator()(double xi) const;
  /// inf s over [0, inf) (affine) or [0, 1e6] (general).
  double infimum() const;
  bool is_affine() const { return std::holds_alternative<AffineSupply>(kind_); }
  const Kind& kind() const { return kind_; }

private:
  Kind kind_ = AffineSupply{};
};

/// Sample-grid monotonicity checks over [0, xi_max] with `points` samples.
struct GridCheck {
  double xi_max = 100.0;
  int points = 1000;
};

/// Empty string when d(0) = 0 and d is strictly increasing on the grid,
/// otherwise a description of the first failure.
std::string check_demand(const DemandFunction& d, const GridCheck& grid = {});
/// Empty string when s(0) > 0 and s is nonincreasing on the grid.
std::string check_supply(const SupplyFunction& s, const GridCheck& grid = {});

}  // namespace mdfn
