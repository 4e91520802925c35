#include "facetts/aligner/mas.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "facetts/common/errors.hpp"
#include "facetts/diffcore/ops.hpp"

namespace facetts::align {

namespace {

std::vector<std::size_t> frame_index(std::span<const std::size_t> durations) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < durations.size(); ++j) {
    if (durations[j] == 0) throw ContractViolation("expand: duration of token " + std::to_string(j) + " is zero");
    idx.insert(idx.end(), durations[j], j);
  }
  return idx;
}

}  // namespace

Matrix loglik_matrix(const Matrix& mu_tokens, const Matrix& x0) {
  if (mu_tokens.cols != x0.cols) {
    throw ContractViolation("loglik_matrix: feature sizes differ (" + std::to_string(mu_tokens.cols) + " vs " +
                            std::to_string(x0.cols) + ")");
  }
  const std::size_t L = mu_tokens.rows, T = x0.rows, D = x0.cols;
  const double norm = 0.5 * static_cast<double>(D) * std::log(2.0 * std::numbers::pi);
  Matrix ll(L, T);
  for (std::size_t j = 0; j < L; ++j) {
    const double* m = &mu_tokens.data[j * D];
    for (std::size_t t = 0; t < T; ++t) {
      const double* x = &x0.data[t * D];
      double sq = 0.0;
      for (std::size_t d = 0; d < D; ++d) sq += (x[d] - m[d]) * (x[d] - m[d]);
      ll(j, t) = -0.5 * sq - norm;
    }
  }
  return ll;
}

AlignmentPath mas(const Matrix& ll) {
  const std::size_t L = ll.rows, T = ll.cols;
  if (L == 0) throw ContractViolation("mas: no tokens");
  if (T < L) {
    throw InfeasibleAlignment("mas: " + std::to_string(T) + " frames cannot cover " + std::to_string(L) + " tokens");
  }
  constexpr double kNeg = -std::numeric_limits<double>::infinity();
  Matrix q(L, T, kNeg);
  q(0, 0) = ll(0, 0);
  for (std::size_t t = 1; t < T; ++t) {
    const std::size_t jmax = std::min(L - 1, t);
    for (std::size_t j = 0; j <= jmax; ++j) {
      const double stay = q(j, t - 1);
      const double move = j > 0 ? q(j - 1, t - 1) : kNeg;
      q(j, t) = ll(j, t) + (move > stay ? move : stay);
    }
  }

  AlignmentPath path;
  path.assign.assign(T, 0);
  path.durations.assign(L, 0);
  std::size_t j = L - 1;
  for (std::size_t t = T - 1; t > 0; --t) {
    path.assign[t] = j;
    ++path.durations[j];
    if (j > 0 && q(j - 1, t - 1) > q(j, t - 1)) --j;
  }
  path.assign[0] = j;
  ++path.durations[j];
  return path;
}

double path_score(const Matrix& ll, const AlignmentPath& path) {
  double s = 0.0;
  for (std::size_t t = 0; t < path.assign.size(); ++t) s += ll(path.assign[t], t);
  return s;
}

Matrix expand(const Matrix& mu_tokens, std::span<const std::size_t> durations) {
  if (durations.size() != mu_tokens.rows) throw ContractViolation("expand: durations length differs from token count");
  const auto idx = frame_index(durations);
  Matrix out(idx.size(), mu_tokens.cols);
  for (std::size_t t = 0; t < idx.size(); ++t) {
    const auto src = mu_tokens.row(idx[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

dc::Tensor expand(const dc::Tensor& mu_tokens, std::span<const std::size_t> durations) {
  if (mu_tokens.rank() != 2 || durations.size() != mu_tokens.dim(0)) {
    throw ContractViolation("expand: durations length differs from token count");
  }
  const auto idx = frame_index(durations);
  return dc::gather_rows(mu_tokens, idx);
}

std::vector<std::size_t> predicted_durations(std::span<const double> log_dur, double scale) {
  if (!(scale > 0.0)) throw ContractViolation("predicted_durations: scale must be positive");
  std::vector<std::size_t> out;
  out.reserve(log_dur.size());
  for (double v : log_dur) {
    const double d = std::round(scale * std::exp(v));
    out.push_back(std::isfinite(d) && d > 1.0 ? static_cast<std::size_t>(d) : 1);
  }
  return out;
}

void validate_path(const AlignmentPath& path, std::size_t tokens) {
  const auto& a = path.assign;
  if (a.empty() || a.front() != 0 || a.back() + 1 != tokens) throw ContractViolation("alignment is not surjective");
  std::vector<std::size_t> counts(tokens, 0);
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (t > 0 && (a[t] < a[t - 1] || a[t] > a[t - 1] + 1)) throw ContractViolation("alignment is not monotonic");
    ++counts[a[t]];
  }
  if (counts != path.durations) throw ContractViolation("alignment durations disagree with assignment");
}

}  // namespace facetts::align
