#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "seriescore/core.hpp"

namespace seriescore {

struct PaaSummary {
  std::vector<double> means;
  std::size_t source_length = 0;
};

struct EapcaSegment {
  std::size_t end = 0;  // exclusive
  double mean = 0.0;
  double stddev = 0.0;

  friend bool operator==(const EapcaSegment&, const EapcaSegment&) = default;
};

struct EapcaSummary {
  std::vector<EapcaSegment> segments;
  std::size_t source_length = 0;
};

/// Truncated orthonormal DFT in half-complex order:
///   [re_0, re_1, im_1, re_2, im_2, ...]
/// i.e. the DC real part followed by (re, im) pairs of increasing frequency.
/// With l = n this is the complete real spectrum (the last slot is the
/// Nyquist real part), so the weighted distance equals the Euclidean one.
struct DftSummary {
  std::vector<double> coeffs;
  std::size_t source_length = 0;
};

struct HaarSummary {
  std::vector<double> coeffs;
  std::size_t source_length = 0;
};

PaaSummary paa(std::span<const float> s, std::size_t segments);

/// `ends` are exclusive segment end indices, strictly increasing, last == length.
EapcaSummary eapca(std::span<const float> s, std::span<const std::size_t> ends);

/// Orthonormal (1/sqrt(n)) spectrum, all n frequencies.
std::vector<std::complex<double>> dft_full(std::span<const float> s);
std::vector<double> inverse_dft(std::span<const std::complex<double>> spectrum);
DftSummary dft_truncate(std::span<const std::complex<double>> spectrum, std::size_t l);

/// Precomputed twiddles for the first l half-complex coefficients of length-n series.
class DftPlan {
 public:
  DftPlan(std::size_t n, std::size_t l);

  std::size_t length() const noexcept { return n_; }
  std::size_t coefficients() const noexcept { return l_; }
  void apply(std::span<const float> s, std::span<double> out) const;

 private:
  std::size_t n_;
  std::size_t l_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/// Computes the first l half-complex coefficients directly.
DftSummary dft_summary(std::span<const float> s, std::size_t l);

/// Multiplicity of half-complex slot `slot` for a real series of length n:
/// 1 for DC and Nyquist, 2 for every other frequency (conjugate symmetry).
double dft_slot_weight(std::size_t slot, std::size_t n);
std::vector<double> dft_slot_weights(std::size_t l, std::size_t n);

/// Full orthonormal Haar transform, coarse-to-fine: [scaling, level 0, level 1 (2), ...].
std::vector<double> haar(std::span<const float> s);
std::vector<double> inverse_haar(std::span<const double> coeffs);
HaarSummary haar_truncate(std::span<const double> coeffs, std::size_t l);

double paa_lower_bound(const PaaSummary& q, const PaaSummary& c);
double coeff_lower_bound(const DftSummary& q, const DftSummary& c);
double coeff_lower_bound(const HaarSummary& q, const HaarSummary& c);

bool is_power_of_two(std::size_t n) noexcept;

}  // namespace seriescore
