#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affiltest/error.hpp"
#include "affiltest/grid.hpp"

namespace affiltest {

struct AuctionRecord {
  std::string auction_id;
  double engineer_estimate = 0.0;
  std::vector<double> bids;
};

enum class RegressionMethod { kLs, kLad, kKernel };

std::string_view to_string(RegressionMethod m);
RegressionMethod parse_regression_method(std::string_view text);

/// Fitted curve psi(x) for log bid on log engineer's estimate.
struct RegressionFit {
  RegressionMethod method = RegressionMethod::kLs;
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;  // LS only
  int iterations = 0;      // LAD only

  // Nadaraya-Watson data.
  std::vector<double> x;
  std::vector<double> y;
  double bandwidth = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;

  double operator()(double at) const;
};

RegressionFit fit_ls(std::span<const double> x, std::span<const double> y);

struct LadOptions {
  double smoothing = 1e-6;
  double tol = 1e-9;
  int max_iter = 200;
};

class LadNonconvergence : public Error {
 public:
  LadNonconvergence(const std::string& what, RegressionFit best)
      : Error(ErrorCode::kSolverNonconvergence, what), best_(std::move(best)) {}
  const RegressionFit& best() const { return best_; }

 private:
  RegressionFit best_;
};

/// Least absolute deviations by iteratively reweighted least squares with
/// weights 1 / sqrt(r^2 + smoothing^2), started from the LS fit. Stops when
/// the parameters move less than tol, or earlier when a descent over lines
/// through pairs of data points, started at the point nearest the iterate,
/// reaches a line that passes the exact LAD optimality check; that line is
/// then returned.
RegressionFit fit_lad(std::span<const double> x, std::span<const double> y,
                      const LadOptions& opts = {});

/// Gaussian-kernel Nadaraya-Watson regression. The default bandwidth is
/// 1.06 sd(x) n^{-1/5}. Evaluation is defined on [min x, max x].
RegressionFit fit_kernel(std::span<const double> x, std::span<const double> y,
                         std::optional<double> bandwidth = std::nullopt);

RegressionFit fit(RegressionMethod method, std::span<const double> x,
                  std::span<const double> y);

/// One (log estimate, log bid) pair per bid, auctions in input order.
struct LogDesign {
  std::vector<double> x;
  std::vector<double> y;
};
LogDesign log_design(std::span<const AuctionRecord> records);

/// U = log B - psi(log p) per bid, grouped by auction.
std::vector<std::vector<double>> raw_residuals(const RegressionFit& fit,
                                               std::span<const AuctionRecord> records);

/// Raw residuals min-max normalized over all bids and grouped as N-tuples.
std::vector<Tuple> residual_tuples(const RegressionFit& fit,
                                   std::span<const AuctionRecord> records);

void write_scatter_csv(std::ostream& os, std::span<const AuctionRecord> records);

/// Fitted curves on `points` equally spaced log estimates over the observed
/// range, one column per fit.
void write_curves_csv(std::ostream& os, std::span<const RegressionFit> fits,
                      double x_min, double x_max, int points = 200);

void write_residuals_csv(std::ostream& os, std::span<const AuctionRecord> records,
                         std::span<const Tuple> tuples);

}  // namespace affiltest
