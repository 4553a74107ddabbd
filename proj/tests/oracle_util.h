// tests/oracle_util.h
//
// Copyright (c)  2026  rnnt-fusion authors
//
// Test-only oracles: central finite differences, exhaustive alignment
// enumeration for the transducer loss, and brute-force edit distance.
// Everything here is independent of the implementation paths it checks.

#ifndef RNNT_TESTS_ORACLE_UTIL_H_
#define RNNT_TESTS_ORACLE_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "rnnt/tensor.h"

namespace rnnt {
namespace testing {

// Central finite difference d f / d x at *x with step eps.
inline double CentralDiff(const std::function<double()> &f, double *x,
                          double eps = 1e-5) {
  double saved = *x;
  *x = saved + eps;
  double fp = f();
  *x = saved - eps;
  double fm = f();
  *x = saved;
  return (fp - fm) / (2.0 * eps);
}

// Relative error with an absolute floor for near-zero pairs.
inline double RelErr(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-6) return std::abs(a - b);
  return std::abs(a - b) / scale;
}

// Sums log-domain terms stably.
inline double LogSumExpAll(const std::vector<double> &xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Exhaustive transducer likelihood: enumerates every monotone alignment of
// `targets` (length U) against T frames. node_logprob(t, u, k) must return
// the log probability of symbol k at lattice node (t, u); `blank` is the
// blank id. Returns log P(targets | lattice).
inline double EnumerateTransducerLogProb(
    int64_t t_count, const std::vector<int64_t> &targets, int64_t blank,
    const std::function<double(int64_t, int64_t, int64_t)> &node_logprob) {
  std::vector<double> path_scores;
  // Depth-first over (t, u) with moves: emit targets[u] (u+1) or blank (t+1).
  std::function<void(int64_t, int64_t, double)> walk = [&](int64_t t,
                                                           int64_t u,
                                                           double acc) {
    if (t == t_count) return;  // ran off the lattice without final blank
    double blank_lp = node_logprob(t, u, blank);
    if (t == t_count - 1 && u == static_cast<int64_t>(targets.size())) {
      path_scores.push_back(acc + blank_lp);
    } else {
      // advance time (consume a frame with blank)
      if (t + 1 <= t_count - 1 ||
          u == static_cast<int64_t>(targets.size())) {
        walk(t + 1, u, acc + blank_lp);
      }
      // emit the next target symbol
      if (u < static_cast<int64_t>(targets.size())) {
        walk(t, u + 1, acc + node_logprob(t, u, targets[u]));
      }
    }
  };
  walk(0, 0, 0.0);
  return LogSumExpAll(path_scores);
}

// Levenshtein distance by top-down recursion with memoization (unit
// costs). Written suffix-first so it shares no code shape with the
// bottom-up scorer it cross-checks.
inline int64_t BruteEditDistanceImpl(const std::vector<int64_t> &ref,
                                     const std::vector<int64_t> &hyp,
                                     size_t i, size_t j,
                                     std::map<std::pair<size_t, size_t>,
                                              int64_t> *memo) {
  if (i == ref.size()) return static_cast<int64_t>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int64_t>(ref.size() - i);
  auto key = std::make_pair(i, j);
  auto it = memo->find(key);
  if (it != memo->end()) return it->second;
  int64_t best;
  if (ref[i] == hyp[j]) {
    best = BruteEditDistanceImpl(ref, hyp, i + 1, j + 1, memo);
  } else {
    int64_t sub = BruteEditDistanceImpl(ref, hyp, i + 1, j + 1, memo);
    int64_t del = BruteEditDistanceImpl(ref, hyp, i + 1, j, memo);
    int64_t ins = BruteEditDistanceImpl(ref, hyp, i, j + 1, memo);
    best = 1 + std::min(sub, std::min(del, ins));
  }
  (*memo)[key] = best;
  return best;
}

inline int64_t BruteEditDistance(const std::vector<int64_t> &ref,
                                 const std::vector<int64_t> &hyp) {
  std::map<std::pair<size_t, size_t>, int64_t> memo;
  return BruteEditDistanceImpl(ref, hyp, 0, 0, &memo);
}

}  // namespace testing
}  // namespace rnnt

#endif  // RNNT_TESTS_ORACLE_UTIL_H_
