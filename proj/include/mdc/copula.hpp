#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

// Exchangeable Archimedean copulas C(u) = psi(sum_k phi(u_k)).
namespace mdc::evaluation {

enum class CopulaFamily { kClayton, kFrank };

std::string to_string(CopulaFamily f);
CopulaFamily copula_family_from_string(std::string_view s);

struct CopulaSpec {
  CopulaFamily family = CopulaFamily::kClayton;
  double theta = 1.0;

  // Clayton: theta > 0. Frank: theta != 0, and theta > 0 when dims >= 3.
  void validate(std::size_t dims) const;
};

double copula_cdf(std::span<const double> u, const CopulaSpec& spec);

// P(U_i <= u_i | U_k = u_k for k != i), from the (N-1)-th generator derivative.
double copula_conditional_cdf(std::size_t i, std::span<const double> u, const CopulaSpec& spec);

// Polylogarithm Li_{-n}(w) for n >= 0, via Stirling numbers of the second kind.
double polylog_neg(std::size_t n, double w);

}  // namespace mdc::evaluation
