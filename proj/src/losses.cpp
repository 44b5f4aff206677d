#include "tvts/losses.hpp"

namespace tvts::obj {

namespace {
void require_perm(const std::vector<int>& p, int64_t k, const char* who) {
  if (static_cast<int64_t>(p.size()) != k || !is_permutation_of_n(p)) {
    throw LabelError(std::string(who) + ": labels are not a bijection on {0..K-1}");
  }
}
}  // namespace

Tensor info_nce(const Tensor& q, const Tensor& k, double tau, Tape* tape) {
  if (tau <= 0.0) throw ConfigError("info_nce: temperature must be > 0");
  if (q.ndim() != 2 || k.ndim() != 2 || q.shape() != k.shape()) {
    throw ShapeError("info_nce: q " + shape_str(q.shape()) + " vs k " + shape_str(k.shape()));
  }
  const int64_t b = q.dim(0);
  Tensor sim = ops::matmul(q, ops::transpose2d(k, tape), tape);
  Tensor logits = ops::scale(sim, 1.0 / tau, tape);
  std::vector<int> diag(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) diag[static_cast<size_t>(i)] = static_cast<int>(i);
  return ops::cross_entropy_rows(logits, diag, tape);
}

Tensor align_loss(const Tensor& t_hat, const Tensor& v_hat, double tau, Tape* tape) {
  return ops::add(info_nce(t_hat, v_hat, tau, tape), info_nce(v_hat, t_hat, tau, tape), tape);
}

Tensor sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& perms, Tape* tape) {
  Tensor l3 = logits.ndim() == 2 ? ops::reshape(logits, {1, logits.dim(0), logits.dim(1)}, tape)
                                 : logits;
  if (l3.ndim() != 3 || l3.dim(1) != l3.dim(2)) {
    throw ShapeError("sort_loss: logits must be (B, K, K), got " + shape_str(logits.shape()));
  }
  const int64_t b = l3.dim(0), k = l3.dim(1);
  if (static_cast<int64_t>(perms.size()) != b) throw LabelError("sort_loss: one permutation per sample required");
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(b * k));
  for (const auto& p : perms) {
    require_perm(p, k, "sort_loss");
    labels.insert(labels.end(), p.begin(), p.end());  // slot i's true position is p[i]
  }
  return ops::cross_entropy_rows(ops::reshape(l3, {b * k, k}, tape), labels, tape);
}

Tensor pair_sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& perms, Tape* tape) {
  if (logits.ndim() != 3 || logits.dim(2) != 2) {
    throw ShapeError("pair_sort_loss: logits must be (B, pairs, 2), got " + shape_str(logits.shape()));
  }
  const int64_t b = logits.dim(0), pairs = logits.dim(1);
  if (static_cast<int64_t>(perms.size()) != b) throw LabelError("pair_sort_loss: one permutation per sample required");
  const int64_t k = perms.empty() ? 0 : static_cast<int64_t>(perms[0].size());
  if (pairs != k * (k - 1) / 2) {
    throw ShapeError("pair_sort_loss: " + std::to_string(pairs) + " pairs but K = " + std::to_string(k));
  }
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(b * pairs));
  for (const auto& p : perms) {
    require_perm(p, k, "pair_sort_loss");
    for (int64_t i = 0; i < k; ++i) {
      for (int64_t j = i + 1; j < k; ++j) {
        // label 1 iff slot i's transcript truly precedes slot j's
        labels.push_back(p[static_cast<size_t>(i)] < p[static_cast<size_t>(j)] ? 1 : 0);
      }
    }
  }
  return ops::cross_entropy_rows(ops::reshape(logits, {b * pairs, 2}, tape), labels, tape);
}

Tensor factorial_sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& perms, Tape* tape) {
  if (logits.ndim() != 2) throw ShapeError("factorial_sort_loss: logits must be (B, K!)");
  const int64_t b = logits.dim(0);
  if (static_cast<int64_t>(perms.size()) != b) throw LabelError("factorial_sort_loss: one permutation per sample required");
  const int64_t k = perms.empty() ? 0 : static_cast<int64_t>(perms[0].size());
  if (logits.dim(1) != factorial(static_cast<int>(k))) {
    throw ShapeError("factorial_sort_loss: width " + std::to_string(logits.dim(1)) + " != K! for K = " + std::to_string(k));
  }
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(b));
  for (const auto& p : perms) {
    require_perm(p, k, "factorial_sort_loss");
    labels.push_back(static_cast<int>(perm_lex_rank(invert_permutation(p))));
  }
  return ops::cross_entropy_rows(logits, labels, tape);
}

Tensor video_sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& slice_perms, Tape* tape) {
  Tensor l3 = logits.ndim() == 2 ? ops::reshape(logits, {1, logits.dim(0), logits.dim(1)}, tape)
                                 : logits;
  if (l3.ndim() != 3 || l3.dim(1) != l3.dim(2)) {
    throw ShapeError("video_sort_loss: logits must be (B, S, S), got " + shape_str(logits.shape()));
  }
  const int64_t b = l3.dim(0), s = l3.dim(1);
  if (static_cast<int64_t>(slice_perms.size()) != b) throw LabelError("video_sort_loss: one slice permutation per sample");
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(b * s));
  for (const auto& p : slice_perms) {
    require_perm(p, s, "video_sort_loss");
    labels.insert(labels.end(), p.begin(), p.end());
  }
  return ops::cross_entropy_rows(ops::reshape(l3, {b * s, s}, tape), labels, tape);
}

Tensor total_loss(const Tensor& l_align, const Tensor& l_sort, double lambda, Tape* tape) {
  if (lambda < 0.0) throw ConfigError("total_loss: lambda must be >= 0");
  return ops::add_scaled(l_align, l_sort, lambda, tape);
}

double slot_accuracy(const Tensor& logits, const std::vector<std::vector<int>>& perms) {
  const auto pred = ops::argmax_rows(logits);
  size_t correct = 0, total = 0;
  size_t r = 0;
  for (const auto& p : perms) {
    for (int want : p) {
      if (pred.at(r++) == want) ++correct;
      ++total;
    }
  }
  if (r != pred.size()) throw ContractError("slot_accuracy: label/logit row count mismatch");
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace tvts::obj
