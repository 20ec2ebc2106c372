#include "cogload/signal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace cogload::signal {

double mean(std::span<const double> x) {
  if (x.empty()) {
    return 0.0;
  }
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
  if (x.size() < 2) {
    return 0.0;
  }
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) {
    ss += (v - m) * (v - m);
  }
  return std::sqrt(ss / static_cast<double>(x.size()));
}

double median(std::vector<double> x) {
  if (x.empty()) {
    return 0.0;
  }
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  const double upper = x[mid];
  if (x.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double linear_slope(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = std::min(t.size(), y.size());
  if (n < 2) {
    return 0.0;
  }
  const double mt = mean(t.first(n));
  const double my = mean(y.first(n));
  double sty = 0.0;
  double stt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sty += (t[i] - mt) * (y[i] - my);
    stt += (t[i] - mt) * (t[i] - mt);
  }
  if (stt <= 0.0) {
    return 0.0;
  }
  return sty / stt;
}

double estimate_rate(std::span<const double> timestamps) {
  if (timestamps.size() < 2) {
    return 0.0;
  }
  const double span = timestamps.back() - timestamps.front();
  if (span <= 0.0) {
    return 0.0;
  }
  return static_cast<double>(timestamps.size() - 1) / span;
}

std::vector<double> savgol_weights(int window, int order, int eval_pos) {
  if (window <= order || eval_pos < 0 || eval_pos >= window) {
    throw std::invalid_argument("savgol_weights: invalid window/order/position");
  }
  Eigen::MatrixXd vander(window, order + 1);
  for (int i = 0; i < window; ++i) {
    const double u = static_cast<double>(i - eval_pos);
    double p = 1.0;
    for (int k = 0; k <= order; ++k) {
      vander(i, k) = p;
      p *= u;
    }
  }
  // Row 0 of the pseudo-inverse evaluates the fitted polynomial at u = 0.
  const Eigen::MatrixXd pinv = vander.completeOrthogonalDecomposition().pseudoInverse();
  std::vector<double> w(static_cast<std::size_t>(window));
  for (int i = 0; i < window; ++i) {
    w[static_cast<std::size_t>(i)] = pinv(0, i);
  }
  return w;
}

std::vector<double> savgol_smooth(std::span<const double> x, int window, int order) {
  const int n = static_cast<int>(x.size());
  if (n < window) {
    throw std::invalid_argument("savgol_smooth: series shorter than window");
  }
  const int half = window / 2;
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(window));
  for (int p = 0; p < window; ++p) {
    weights[static_cast<std::size_t>(p)] = savgol_weights(window, order, p);
  }
  std::vector<double> y(x.size());
  auto apply = [&](int start, int pos) {
    const auto& w = weights[static_cast<std::size_t>(pos)];
    double acc = 0.0;
    for (int k = 0; k < window; ++k) {
      acc += w[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(start + k)];
    }
    return acc;
  };
  for (int i = 0; i < n; ++i) {
    if (i < half) {
      y[static_cast<std::size_t>(i)] = apply(0, i);
    } else if (i >= n - half) {
      y[static_cast<std::size_t>(i)] = apply(n - window, i - (n - window));
    } else {
      y[static_cast<std::size_t>(i)] = apply(i - half, half);
    }
  }
  return y;
}

ButterworthLowpass::ButterworthLowpass(int order, double cutoff_hz, double sample_rate_hz)
    : order_(order), cutoff_(cutoff_hz), rate_(sample_rate_hz) {
  if (order < 1 || cutoff_hz <= 0.0 || sample_rate_hz <= 0.0 || cutoff_hz >= 0.5 * sample_rate_hz) {
    throw std::invalid_argument("ButterworthLowpass: invalid design parameters");
  }
  const double k = 2.0 * rate_;
  const double wc = k * std::tan(std::numbers::pi * cutoff_ / rate_);
  const double wc2 = wc * wc;
  // Conjugate pole pairs of the analog prototype.
  for (int m = 1; m <= order_ / 2; ++m) {
    const double theta = std::numbers::pi * static_cast<double>(2 * m + order_ - 1) / (2.0 * order_);
    const double damping = -2.0 * std::cos(theta) * wc;
    const double a0 = k * k + damping * k + wc2;
    Section s;
    s.b = {wc2 / a0, 2.0 * wc2 / a0, wc2 / a0};
    s.a = {1.0, (2.0 * wc2 - 2.0 * k * k) / a0, (k * k - damping * k + wc2) / a0};
    sections_.push_back(s);
  }
  if (order_ % 2 == 1) {
    const double a0 = k + wc;
    Section s;
    s.b = {wc / a0, wc / a0, 0.0};
    s.a = {1.0, (wc - k) / a0, 0.0};
    sections_.push_back(s);
  }
}

void ButterworthLowpass::run(std::vector<double>& x, bool steady_state) const {
  if (x.empty()) {
    return;
  }
  const double level = x.front();
  for (const Section& s : sections_) {
    // Transposed direct form II. DC gain of each section is 1.
    double z1 = 0.0;
    double z2 = 0.0;
    if (steady_state) {
      z1 = (1.0 - s.b[0]) * level;
      z2 = (s.b[2] - s.a[2]) * level;
    }
    for (double& v : x) {
      const double in = v;
      const double out = s.b[0] * in + z1;
      z1 = s.b[1] * in - s.a[1] * out + z2;
      z2 = s.b[2] * in - s.a[2] * out;
      v = out;
    }
  }
}

std::vector<double> ButterworthLowpass::filter(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  run(y, false);
  return y;
}

std::vector<double> ButterworthLowpass::filtfilt(std::span<const double> x) const {
  const std::size_t n = x.size();
  if (n < 2) {
    return {x.begin(), x.end()};
  }
  const auto settle = static_cast<std::size_t>(std::ceil(3.0 * rate_ / cutoff_));
  const std::size_t pad = std::min(n - 1, std::max<std::size_t>(3 * (2 * sections_.size() + 1), settle));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) {
    ext.push_back(2.0 * x[0] - x[i]);
  }
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) {
    ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
  }
  run(ext, true);
  std::reverse(ext.begin(), ext.end());
  run(ext, true);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

double ButterworthLowpass::magnitude(double f) const {
  const double w = 2.0 * std::numbers::pi * f / rate_;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h{1.0, 0.0};
  for (const Section& s : sections_) {
    h *= (s.b[0] + s.b[1] * z1 + s.b[2] * z2) / (s.a[0] + s.a[1] * z1 + s.a[2] * z2);
  }
  return std::abs(h);
}

}  // namespace cogload::signal
