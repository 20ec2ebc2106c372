#pragma once

#include <array>
#include <span>
#include <vector>

namespace cogload::signal {

// Descriptive statistics. Standard deviation is the population form everywhere.
double mean(std::span<const double> x);
double population_std(std::span<const double> x);
double median(std::vector<double> x);

/// Least-squares slope of y against t. Returns 0 for fewer than two points
/// or zero spread in t.
double linear_slope(std::span<const double> t, std::span<const double> y);

/// Sampling rate implied by the first and last timestamps.
double estimate_rate(std::span<const double> timestamps);

/// Weights that evaluate a least-squares polynomial fit of `order` over a
/// window of `window` samples at sample position `eval_pos` (0-based within
/// the window).
std::vector<double> savgol_weights(int window, int order, int eval_pos);

/// Local-polynomial smoothing. Interior samples use the centered weights;
/// the first and last half-windows evaluate the fit of the edge window.
std::vector<double> savgol_smooth(std::span<const double> x, int window = 11, int order = 2);

/// Digital Butterworth low-pass built by the bilinear transform with
/// prewarping at the cutoff, stored as cascaded second-order sections.
class ButterworthLowpass {
public:
  ButterworthLowpass(int order, double cutoff_hz, double sample_rate_hz);

  int order() const { return order_; }
  double cutoff() const { return cutoff_; }
  double sample_rate() const { return rate_; }

  /// Causal single pass starting from rest.
  std::vector<double> filter(std::span<const double> x) const;

  /// Forward-backward (zero-phase) application with odd-extension padding and
  /// steady-state initial conditions.
  std::vector<double> filtfilt(std::span<const double> x) const;

  /// |H(e^{jw})| of the single-pass filter at frequency f (Hz).
  double magnitude(double f) const;

private:
  struct Section {
    std::array<double, 3> b{};
    std::array<double, 3> a{1.0, 0.0, 0.0};
  };

  void run(std::vector<double>& x, bool steady_state) const;

  int order_;
  double cutoff_;
  double rate_;
  std::vector<Section> sections_;
};

}  // namespace cogload::signal
