#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "facetts/common/matrix.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::align {

struct AlignmentPath {
  std::vector<std::size_t> assign;     // frame -> token, length T
  std::vector<std::size_t> durations;  // frames per token, length L
};

/// (j, t) -> log N(x0_t; mu_j, I). mu_tokens: L x D, x0: T x D.
Matrix loglik_matrix(const Matrix& mu_tokens, const Matrix& x0);

/// Maximum-likelihood monotonic surjective alignment. Ties prefer staying on the current token.
/// Throws InfeasibleAlignment when T < L.
AlignmentPath mas(const Matrix& ll);

/// Total log-likelihood of a path.
double path_score(const Matrix& ll, const AlignmentPath& path);

/// Repeats row j of mu durations[j] times.
Matrix expand(const Matrix& mu_tokens, std::span<const std::size_t> durations);
/// Differentiable variant for [L, D] tensors.
dc::Tensor expand(const dc::Tensor& mu_tokens, std::span<const std::size_t> durations);

/// max(1, round(scale * exp(log_dur_j))).
std::vector<std::size_t> predicted_durations(std::span<const double> log_dur, double scale);

/// Checks the AlignmentPath invariants for L tokens; throws ContractViolation on failure.
void validate_path(const AlignmentPath& path, std::size_t tokens);

}  // namespace facetts::align
