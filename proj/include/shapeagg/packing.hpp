#pragma once

#include <cstdint>
#include <vector>

#include "shapeagg/sequence.hpp"

namespace shapeagg {

/// A subset of the binary hypercube {0,1}^k containing the zero word, with
/// pairwise Hamming distance > k/8 and log(|set|-1) >= k/8. Words are stored
/// as packed 64-bit limbs.
struct BinaryPacking {
    int k = 0;
    std::vector<std::vector<std::uint64_t>> codewords;
    int min_pairwise_distance = 0;
    bool degenerate = false;  // k < 8 two-point fallback; the size guarantee is waived

    bool bit(std::size_t word, int pos) const {
        return (codewords[word][static_cast<std::size_t>(pos) / 64] >>
                (static_cast<std::size_t>(pos) % 64)) & 1u;
    }
};

int hamming_distance(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

/// Seeded greedy random search for a packing meeting the BinaryPacking
/// invariants. Deterministic given (k, seed).
BinaryPacking vg_packing(int k, std::uint64_t seed);

enum class HypothesisFamily { Monotone, Convex };

/// A packed family of hypothesis sequences with its separation and
/// Kullback-Leibler diagnostics. All quantities are recomputed from the
/// hypotheses themselves rather than trusted from the construction.
struct PackingReport {
    HypothesisFamily family = HypothesisFamily::Monotone;
    int k_or_q = 0;
    double gamma = 0.0;
    BinaryPacking packing;
    std::vector<Sequence> hypotheses;

    double min_sq_separation = 0.0;  // scaled norm, over all pairs
    double max_kl_to_null = 0.0;     // (n / 2 sigma^2) * |u - u0|^2
    double kl_budget = 0.0;          // log(|packing|-1) / 16

    bool membership_ok = false;       // class predicates hold for every hypothesis
    bool pieces_within_budget = false;  // k(u) <= k, resp. q(u) <= q
    bool separation_ok = false;       // min separation >= sigma^2 k / (512 n)
    bool kl_ok = false;               // max KL <= budget
    bool budget_ok = false;           // all of the above
};

/// Monotone hypotheses: k blocks at levels j V/(2k) plus a gamma bump per
/// codeword bit, gamma = (1/8) sqrt(sigma^2 k / n). Requires
/// k^3 <= 16 n V^2 / sigma^2 so the bump cannot break monotonicity.
PackingReport monotone_hypotheses(std::size_t n, int k, double v, double sigma,
                                  std::uint64_t seed = 1);

/// Convex hypotheses from the slope recursion alpha_j = 2 gamma + alpha_{j-1},
/// beta_j = beta_{j-1} + gamma + m alpha_{j-1}, with a gamma bump per block.
/// Requires q >= 2. Note: a flat codeword transition kinks both endpoints of
/// the junction, so q(u) reaches 2q-1; pieces_within_budget reports the
/// advertised <= q check honestly.
PackingReport convex_hypotheses(std::size_t n, int q, double sigma, std::uint64_t seed = 1);

struct KChoice {
    int k = 1;
    bool variance_dominant = false;  // 16 n V^2 / sigma^2 < 1
};

/// Packing size matched to a variation budget:
/// floor((16 n V^2 / sigma^2)^{1/3}), clamped to >= 1.
KChoice packing_k_choice(double v, double sigma, std::size_t n);

}  // namespace shapeagg
