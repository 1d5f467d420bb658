#ifndef LSVAR_KERNEL_HPP
#define LSVAR_KERNEL_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "lsvar/common.hpp"

namespace lsvar {

enum class KernelFamily { Gaussian, Epanechnikov };

std::string_view to_string(KernelFamily family);
std::optional<KernelFamily> parse_kernel_family(std::string_view name);

/// Kernel family plus bandwidth h, in rescaled-time units.
struct KernelSpec {
  KernelFamily family = KernelFamily::Gaussian;
  double bandwidth = 0.1;

  KernelSpec() = default;
  KernelSpec(KernelFamily f, double h) : family(f), bandwidth(h) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw Error(ErrorCode::InvalidArgument, "kernel bandwidth must be a positive finite number");
    }
  }
};

/// Weights smaller than this are stored as exact zeros.
inline constexpr double kWeightFloor = 1e-12;

/// Unscaled kernel K(x).
template <typename Scalar = double>
Scalar kernel_eval(KernelFamily family, Scalar x) {
  using std::abs;
  using std::exp;
  using std::sqrt;
  switch (family) {
    case KernelFamily::Gaussian: {
      const Scalar inv_sqrt_2pi = Scalar(1) / sqrt(Scalar(2) * Scalar(std::numbers::pi_v<long double>));
      return inv_sqrt_2pi * exp(Scalar(-0.5) * x * x);
    }
    case KernelFamily::Epanechnikov:
      return abs(x) <= Scalar(1) ? Scalar(0.75) * (Scalar(1) - x * x) : Scalar(0);
  }
  return Scalar(0);
}

/// K_h(x) = K(x / h) / h.
template <typename Scalar = double>
Scalar scaled_kernel(const KernelSpec& spec, Scalar x) {
  const Scalar h(spec.bandwidth);
  return kernel_eval<Scalar>(spec.family, x / h) / h;
}

/// Per-observation kernel weights w_t = K_h(t/T - u) and offsets d_t = t/T - u,
/// t = 1..T (stored zero-based). Stands in for the diagonals of the T x T
/// kernel and offset matrices.
template <typename Scalar = double>
struct WeightVector {
  Scalar u{};
  Vector<Scalar> weights;
  Vector<Scalar> deltas;
  /// Half-open index range [support_begin, support_end) holding every nonzero weight.
  Eigen::Index support_begin = 0;
  Eigen::Index support_end = 0;

  Eigen::Index length() const { return weights.size(); }
  Eigen::Index support_size() const { return support_end - support_begin; }

  /// Builds a weight vector from arbitrary nonnegative weights (offsets still t/T - u).
  static WeightVector from_weights(Vector<Scalar> w, Scalar u) {
    const Eigen::Index T = w.size();
    if (T < 2) throw Error(ErrorCode::InvalidArgument, "weight vector needs length >= 2");
    WeightVector out;
    out.u = u;
    out.deltas.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      if (!(w(t) >= Scalar(0))) throw Error(ErrorCode::InvalidArgument, "weights must be nonnegative");
      out.deltas(t) = (Scalar(t + 1) - u * Scalar(T)) / Scalar(T);
    }
    out.weights = std::move(w);
    out.locate_support();
    return out;
  }

  void locate_support() {
    const Eigen::Index T = weights.size();
    support_begin = 0;
    while (support_begin < T && weights(support_begin) == Scalar(0)) ++support_begin;
    if (support_begin == T) {
      throw Error(ErrorCode::AllWeightsZero, "no observation receives positive kernel weight at u=" +
                                                 std::to_string(static_cast<double>(u)));
    }
    support_end = T;
    while (weights(support_end - 1) == Scalar(0)) --support_end;
  }
};

template <typename Scalar = double>
WeightVector<Scalar> make_weights(const KernelSpec& spec, Eigen::Index T, Scalar u) {
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "T must be >= 2");
  if (!(u > Scalar(0) && u < Scalar(1))) throw Error(ErrorCode::InvalidArgument, "u must lie in (0,1)");
  WeightVector<Scalar> out;
  out.u = u;
  out.weights.resize(T);
  out.deltas.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Scalar d = (Scalar(t + 1) - u * Scalar(T)) / Scalar(T);
    Scalar w = scaled_kernel<Scalar>(spec, d);
    if (w < Scalar(kWeightFloor)) w = Scalar(0);
    out.deltas(t) = d;
    out.weights(t) = w;
  }
  out.locate_support();
  return out;
}

inline std::string_view to_string(KernelFamily family) {
  return family == KernelFamily::Gaussian ? "gaussian" : "epanechnikov";
}

inline std::optional<KernelFamily> parse_kernel_family(std::string_view name) {
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "epanechnikov") return KernelFamily::Epanechnikov;
  return std::nullopt;
}

}  // namespace lsvar

#endif  // LSVAR_KERNEL_HPP
