#pragma once

#include <vector>

#include "tvts/ops.hpp"
#include "tvts/permutation.hpp"

namespace tvts::obj {

// NCE(q, k): mean over rows of -log softmax(q_b . k_all / tau)[b]; positives
// are the within-batch diagonal pairs, negatives the other B-1 rows.
Tensor info_nce(const Tensor& q, const Tensor& k, double tau, Tape* tape = nullptr);

// L_align = NCE(t_hat, v_hat) + NCE(v_hat, t_hat)
Tensor align_loss(const Tensor& t_hat, const Tensor& v_hat, double tau, Tape* tape = nullptr);

// Mean NLL of each shuffled slot's true position. logits (K,K) or (B,K,K);
// perm per sample: slot i holds true transcript perm[i] (0-based).
Tensor sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& perms, Tape* tape = nullptr);

// Pairwise proxy: logits (B, K(K-1)/2, 2) over pairs (i<j) in slot order;
// class 1 means "slot i's transcript precedes slot j's".
Tensor pair_sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& perms, Tape* tape = nullptr);

// K!-way proxy: target class is the lexicographic rank of perm^-1, the
// permutation that restores chronological order. Identity perm -> rank 0.
Tensor factorial_sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& perms, Tape* tape = nullptr);

// Merlot-style frame ordering: logits (B, S, S); slice_perm per sample: slot s
// holds true slice slice_perm[s].
Tensor video_sort_loss(const Tensor& logits, const std::vector<std::vector<int>>& slice_perms, Tape* tape = nullptr);

struct LossReport {
  double l_align = 0.0;
  double l_sort = 0.0;
  double l_total = 0.0;
  double lambda = 0.0;
  double grad_norm = -1.0;  // diagnostic; < 0 when not measured
  double sort_accuracy = -1.0;
};

// L_total = L_align + lambda * L_sort
Tensor total_loss(const Tensor& l_align, const Tensor& l_sort, double lambda, Tape* tape = nullptr);

// Fraction of rows whose argmax equals the label.
double slot_accuracy(const Tensor& logits, const std::vector<std::vector<int>>& perms);

}  // namespace tvts::obj
