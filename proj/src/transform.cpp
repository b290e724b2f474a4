#include "seriescore/transform.hpp"

#include <cmath>
#include <numbers>


namespace seriescore {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

PaaSummary paa(std::span<const float> s, std::size_t segments) {
  const std::size_t n = s.size();
  if (segments == 0 || n == 0 || n % segments != 0) {
    throw Error(ErrorCode::kBadSegmentation, "segment count must divide the series length");
  }
  const std::size_t width = n / segments;
  PaaSummary out;
  out.source_length = n;
  out.means.resize(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    double sum = 0.0;
    for (std::size_t j = i * width; j < (i + 1) * width; ++j) sum += s[j];
    out.means[i] = sum / static_cast<double>(width);
  }
  return out;
}

EapcaSummary eapca(std::span<const float> s, std::span<const std::size_t> ends) {
  const std::size_t n = s.size();
  if (ends.empty() || ends.back() != n) {
    throw Error(ErrorCode::kBadSegmentation, "segmentation must end at the series length");
  }
  EapcaSummary out;
  out.source_length = n;
  std::size_t begin = 0;
  for (std::size_t end : ends) {
    if (end <= begin) throw Error(ErrorCode::kBadSegmentation, "segment ends must strictly increase");
    const double len = static_cast<double>(end - begin);
    double sum = 0.0;
    for (std::size_t j = begin; j < end; ++j) sum += s[j];
    const double mean = sum / len;
    double var = 0.0;
    for (std::size_t j = begin; j < end; ++j) var += (s[j] - mean) * (s[j] - mean);
    out.segments.push_back({end, mean, std::sqrt(var / len)});
    begin = end;
  }
  return out;
}

namespace {

using cplx = std::complex<double>;

void fft_radix2(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cplx w = std::polar(1.0, angle * static_cast<double>(j));
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

std::vector<cplx> transform(std::vector<cplx> a, bool inverse) {
  const std::size_t n = a.size();
  if (is_power_of_two(n)) {
    fft_radix2(a, inverse);
  } else {
    std::vector<cplx> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      cplx acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const auto m = (k * t) % n;
        acc += a[t] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(m) /
                                          static_cast<double>(n));
      }
      out[k] = acc;
    }
    a = std::move(out);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& v : a) v *= scale;
  return a;
}

}  // namespace

std::vector<cplx> dft_full(std::span<const float> s) {
  if (s.empty()) throw Error(ErrorCode::kBadLength, "empty series");
  std::vector<cplx> a(s.begin(), s.end());
  return transform(std::move(a), false);
}

std::vector<double> inverse_dft(std::span<const cplx> spectrum) {
  auto a = transform(std::vector<cplx>(spectrum.begin(), spectrum.end()), true);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].real();
  return out;
}

namespace {

void check_dft_length(std::size_t l, std::size_t n) {
  if (l == 0 || l % 2 != 0 || l > n) throw Error(ErrorCode::kBadLength, "coefficient count must be even and <= n");
}

}  // namespace

DftSummary dft_truncate(std::span<const cplx> spectrum, std::size_t l) {
  const std::size_t n = spectrum.size();
  check_dft_length(l, n);
  DftSummary out;
  out.source_length = n;
  out.coeffs.resize(l);
  out.coeffs[0] = spectrum[0].real();
  for (std::size_t slot = 1; slot < l; ++slot) {
    const cplx& c = spectrum[(slot + 1) / 2];
    out.coeffs[slot] = (slot % 2 == 1) ? c.real() : c.imag();
  }
  return out;
}

double dft_slot_weight(std::size_t slot, std::size_t n) {
  const std::size_t freq = (slot + 1) / 2;
  return (freq == 0 || 2 * freq == n) ? 1.0 : 2.0;
}

std::vector<double> dft_slot_weights(std::size_t l, std::size_t n) {
  std::vector<double> w(l);
  for (std::size_t i = 0; i < l; ++i) w[i] = dft_slot_weight(i, n);
  return w;
}

DftPlan::DftPlan(std::size_t n, std::size_t l) : n_(n), l_(l) {
  check_dft_length(l, n);
  const std::size_t freqs = l / 2 + 1;
  cos_.resize(freqs * n);
  sin_.resize(freqs * n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < freqs; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      cos_[k * n + t] = std::cos(angle) * scale;
      sin_[k * n + t] = -std::sin(angle) * scale;
    }
  }
}

void DftPlan::apply(std::span<const float> s, std::span<double> out) const {
  if (s.size() != n_ || out.size() != l_) throw Error(ErrorCode::kShapeMismatch, "DFT plan shape mismatch");
  for (std::size_t slot = 0; slot < l_; ++slot) {
    const std::size_t k = (slot + 1) / 2;
    const double* table = (slot % 2 == 1 || slot == 0) ? &cos_[k * n_] : &sin_[k * n_];
    double acc = 0.0;
    for (std::size_t t = 0; t < n_; ++t) acc += table[t] * s[t];
    out[slot] = acc;
  }
}

DftSummary dft_summary(std::span<const float> s, std::size_t l) {
  DftPlan plan(s.size(), l);
  DftSummary out;
  out.source_length = s.size();
  out.coeffs.resize(l);
  plan.apply(s, out.coeffs);
  return out;
}

std::vector<double> haar(std::span<const float> s) {
  const std::size_t n = s.size();
  if (!is_power_of_two(n)) throw Error(ErrorCode::kBadLength, "Haar transform needs a power-of-two length");
  std::vector<double> work(s.begin(), s.end());
  std::vector<double> out(n);
  const double r = std::numbers::sqrt2 / 2.0;
  for (std::size_t len = n; len > 1; len /= 2) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) {
      const double a = work[2 * i];
      const double b = work[2 * i + 1];
      out[half + i] = (a - b) * r;
      work[i] = (a + b) * r;
    }
  }
  out[0] = work[0];
  return out;
}

std::vector<double> inverse_haar(std::span<const double> coeffs) {
  const std::size_t n = coeffs.size();
  if (!is_power_of_two(n)) throw Error(ErrorCode::kBadLength, "Haar transform needs a power-of-two length");
  std::vector<double> work(n);
  work[0] = coeffs[0];
  const double r = std::numbers::sqrt2 / 2.0;
  std::vector<double> next(n);
  for (std::size_t half = 1; half < n; half *= 2) {
    for (std::size_t i = 0; i < half; ++i) {
      const double avg = work[i];
      const double det = coeffs[half + i];
      next[2 * i] = (avg + det) * r;
      next[2 * i + 1] = (avg - det) * r;
    }
    std::copy(next.begin(), next.begin() + 2 * half, work.begin());
  }
  return work;
}

HaarSummary haar_truncate(std::span<const double> coeffs, std::size_t l) {
  if (!is_power_of_two(coeffs.size())) throw Error(ErrorCode::kBadLength, "Haar transform needs a power-of-two length");
  if (l == 0 || l > coeffs.size()) throw Error(ErrorCode::kBadLength, "coefficient count must be in 1..n");
  return {std::vector<double>(coeffs.begin(), coeffs.begin() + static_cast<std::ptrdiff_t>(l)), coeffs.size()};
}

double paa_lower_bound(const PaaSummary& q, const PaaSummary& c) {
  if (q.means.size() != c.means.size() || q.source_length != c.source_length || q.means.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "PAA summaries are not comparable");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < q.means.size(); ++i) sum += (q.means[i] - c.means[i]) * (q.means[i] - c.means[i]);
  return std::sqrt(static_cast<double>(q.source_length) / static_cast<double>(q.means.size()) * sum);
}

double coeff_lower_bound(const DftSummary& q, const DftSummary& c) {
  if (q.coeffs.size() != c.coeffs.size() || q.source_length != c.source_length) {
    throw Error(ErrorCode::kShapeMismatch, "DFT summaries are not comparable");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < q.coeffs.size(); ++i) {
    const double d = q.coeffs[i] - c.coeffs[i];
    sum += dft_slot_weight(i, q.source_length) * d * d;
  }
  return std::sqrt(sum);
}

double coeff_lower_bound(const HaarSummary& q, const HaarSummary& c) {
  if (q.coeffs.size() != c.coeffs.size() || q.source_length != c.source_length) {
    throw Error(ErrorCode::kShapeMismatch, "Haar summaries are not comparable");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < q.coeffs.size(); ++i) sum += (q.coeffs[i] - c.coeffs[i]) * (q.coeffs[i] - c.coeffs[i]);
  return std::sqrt(sum);
}

}  // namespace seriescore
