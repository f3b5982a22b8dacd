#include "shapeagg/packing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "shapeagg/rng.hpp"

namespace shapeagg {

int hamming_distance(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d += std::popcount(a[i] ^ b[i]);
    return d;
}

BinaryPacking vg_packing(int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("vg_packing: k must be positive");
    const std::size_t limbs = (static_cast<std::size_t>(k) + 63) / 64;
    BinaryPacking packing;
    packing.k = k;

    if (k == 1) {
        // Only two words exist, so the size guarantee log(|set|-1) >= k/8
        // cannot hold; return {0, 1} flagged as degenerate.
        packing.degenerate = true;
        std::vector<std::uint64_t> zero(limbs, 0), ones(limbs, 1);
        packing.codewords = {zero, ones};
        packing.min_pairwise_distance = 1;
        return packing;
    }

    const int dist_floor = k / 8 + 1;  // smallest integer > k/8
    const std::size_t target =
        1 + static_cast<std::size_t>(std::ceil(std::exp(static_cast<double>(k) / 8.0)));
    if (target > 200000)
        throw CapacityError("vg_packing: target packing size exceeds the desk-scale budget "
                            "for pairwise verification (k too large)");

    for (std::uint64_t restart = 0; restart < 100; ++restart) {
        CounterRng rng(seed, restart);
        std::vector<std::vector<std::uint64_t>> words;
        words.emplace_back(limbs, 0);  // the zero word anchors the packing
        const std::size_t attempts = 4000 * target;
        std::vector<std::uint64_t> cand(limbs);
        for (std::size_t a = 0; a < attempts && words.size() < target; ++a) {
            for (std::size_t l = 0; l < limbs; ++l) cand[l] = rng.next_u64();
            const int spare = static_cast<int>(limbs * 64) - k;
            if (spare > 0) cand[limbs - 1] &= (~std::uint64_t{0}) >> spare;
            bool ok = true;
            for (const auto& w : words) {
                if (hamming_distance(cand, w) < dist_floor) {
                    ok = false;
                    break;
                }
            }
            if (ok) words.push_back(cand);
        }
        if (words.size() >= target) {
            packing.codewords = std::move(words);
            int best = k;
            for (std::size_t i = 0; i < packing.codewords.size(); ++i)
                for (std::size_t j = i + 1; j < packing.codewords.size(); ++j)
                    best = std::min(best,
                                    hamming_distance(packing.codewords[i], packing.codewords[j]));
            packing.min_pairwise_distance = best;
            return packing;
        }
    }
    throw ConvergenceError("vg_packing: greedy search exhausted its restart budget",
                           static_cast<double>(k), 100);
}

namespace {

void pairwise_stats(const std::vector<Sequence>& hyps, double sigma, double& min_sep,
                    double& max_kl) {
    const std::size_t n = hyps.front().size();
    min_sep = std::numeric_limits<double>::infinity();
    max_kl = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        for (std::size_t j = i + 1; j < hyps.size(); ++j) {
            double d = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double e = hyps[i][t] - hyps[j][t];
                d += e * e;
            }
            d /= static_cast<double>(n);
            min_sep = std::min(min_sep, d);
            if (i == 0) {  // hypotheses[0] corresponds to the zero word
                const double kl = static_cast<double>(n) / (2.0 * sigma * sigma) * d;
                max_kl = std::max(max_kl, kl);
            }
        }
    }
}

}  // namespace

PackingReport monotone_hypotheses(std::size_t n, int k, double v, double sigma,
                                  std::uint64_t seed) {
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("monotone_hypotheses: k out of range");
    if (!(v > 0.0) || !(sigma > 0.0))
        throw std::invalid_argument("monotone_hypotheses: V and sigma must be positive");
    const double growth = 16.0 * static_cast<double>(n) * v * v / (sigma * sigma);
    if (static_cast<double>(k) * k * k > growth)
        throw std::invalid_argument(
            "monotone_hypotheses: requires k^3 <= 16 n V^2 / sigma^2 (gamma <= V/(2k))");

    PackingReport report;
    report.family = HypothesisFamily::Monotone;
    report.k_or_q = k;
    report.gamma = 0.125 * std::sqrt(sigma * sigma * static_cast<double>(k) /
                                     static_cast<double>(n));
    report.packing = vg_packing(k, seed);

    const double step = v / (2.0 * static_cast<double>(k));
    for (std::size_t w = 0; w < report.packing.codewords.size(); ++w) {
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t block = (i * static_cast<std::size_t>(k)) / n;  // floor((i-1)k/n), 0-based i
            u[i] = static_cast<double>(block) * step +
                   (report.packing.bit(w, static_cast<int>(block)) ? report.gamma : 0.0);
        }
        report.hypotheses.emplace_back(std::move(u));
    }

    pairwise_stats(report.hypotheses, sigma, report.min_sq_separation, report.max_kl_to_null);
    report.kl_budget =
        std::log(static_cast<double>(report.packing.codewords.size()) - 1.0) / 16.0;

    // Block sizes for general n force irrational gamma, so the construction
    // holds only to rounding; verify with a gamma-scaled tolerance. For the
    // equal-block cases gamma is dyadic and the checks are effectively exact.
    const double tol = 1e-9 * report.gamma;
    report.membership_ok = true;
    report.pieces_within_budget = true;
    for (const Sequence& u : report.hypotheses) {
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (u[i] > u[i + 1] + tol) report.membership_ok = false;
        if (total_variation(u) > v + tol) report.membership_ok = false;
        if (count_pieces_tol(u, tol) > k) report.pieces_within_budget = false;
    }
    report.separation_ok =
        report.min_sq_separation >=
        sigma * sigma * static_cast<double>(k) / (512.0 * static_cast<double>(n)) - 1e-15;
    report.kl_ok = report.max_kl_to_null <= report.kl_budget + 1e-12;
    report.budget_ok = report.membership_ok && report.pieces_within_budget &&
                       report.separation_ok && report.kl_ok;
    return report;
}

PackingReport convex_hypotheses(std::size_t n, int q, double sigma, std::uint64_t seed) {
    if (q < 2)
        throw std::invalid_argument("convex_hypotheses: requires q >= 2");
    if (n < 3 || static_cast<std::size_t>(q) > n)
        throw std::invalid_argument("convex_hypotheses: need n >= 3 and q <= n");
    if (!(sigma > 0.0))
        throw std::invalid_argument("convex_hypotheses: sigma must be positive");

    PackingReport report;
    report.family = HypothesisFamily::Convex;
    report.k_or_q = q;
    report.gamma = 0.125 * std::sqrt(sigma * sigma * static_cast<double>(q) /
                                     static_cast<double>(n));
    report.packing = vg_packing(q, seed);
    const double gamma = report.gamma;

    // Balanced block sizes; the beta recursion uses the previous block's
    // length, reducing to the equal-size recursion when q divides n.
    std::vector<std::size_t> block_len(static_cast<std::size_t>(q));
    for (int j = 0; j < q; ++j) {
        const std::size_t hi = ((static_cast<std::size_t>(j) + 1) * n) / static_cast<std::size_t>(q);
        const std::size_t lo = (static_cast<std::size_t>(j) * n) / static_cast<std::size_t>(q);
        block_len[static_cast<std::size_t>(j)] = hi - lo;
    }
    std::vector<double> alpha(static_cast<std::size_t>(q)), beta(static_cast<std::size_t>(q));
    alpha[0] = 0.0;
    beta[0] = 0.0;
    for (int j = 1; j < q; ++j) {
        alpha[static_cast<std::size_t>(j)] = 2.0 * gamma + alpha[static_cast<std::size_t>(j - 1)];
        beta[static_cast<std::size_t>(j)] =
            beta[static_cast<std::size_t>(j - 1)] + gamma +
            static_cast<double>(block_len[static_cast<std::size_t>(j - 1)]) *
                alpha[static_cast<std::size_t>(j - 1)];
    }

    for (std::size_t w = 0; w < report.packing.codewords.size(); ++w) {
        std::vector<double> u(n);
        std::size_t pos = 0;
        for (int j = 0; j < q; ++j) {
            const double bump = report.packing.bit(w, j) ? gamma : 0.0;
            for (std::size_t i = 1; i <= block_len[static_cast<std::size_t>(j)]; ++i) {
                u[pos++] = bump + alpha[static_cast<std::size_t>(j)] * static_cast<double>(i - 1) +
                           beta[static_cast<std::size_t>(j)];
            }
        }
        report.hypotheses.emplace_back(std::move(u));
    }

    pairwise_stats(report.hypotheses, sigma, report.min_sq_separation, report.max_kl_to_null);
    report.kl_budget =
        std::log(static_cast<double>(report.packing.codewords.size()) - 1.0) / 16.0;

    const double tol = 1e-9 * gamma;
    report.membership_ok = true;
    report.pieces_within_budget = true;
    for (const Sequence& u : report.hypotheses) {
        for (std::size_t i = 1; i + 1 < n; ++i)
            if (2.0 * u[i] > u[i - 1] + u[i + 1] + tol) report.membership_ok = false;
        if (count_knots_tol(u, tol) > q) report.pieces_within_budget = false;
    }
    report.separation_ok =
        report.min_sq_separation >=
        sigma * sigma * static_cast<double>(q) / (512.0 * static_cast<double>(n)) - 1e-15;
    report.kl_ok = report.max_kl_to_null <= report.kl_budget + 1e-12;
    report.budget_ok = report.membership_ok && report.pieces_within_budget &&
                       report.separation_ok && report.kl_ok;
    return report;
}

KChoice packing_k_choice(double v, double sigma, std::size_t n) {
    if (!(v > 0.0) || !(sigma > 0.0) || n < 1)
        throw std::invalid_argument("packing_k_choice: invalid arguments");
    const double x = 16.0 * static_cast<double>(n) * v * v / (sigma * sigma);
    KChoice choice;
    if (x < 1.0) {
        choice.k = 1;
        choice.variance_dominant = true;
        return choice;
    }
    choice.k = std::max(1, static_cast<int>(std::floor(std::cbrt(x))));
    // Guard the floor against cube-root rounding.
    while (static_cast<double>(choice.k) * choice.k * choice.k > x) --choice.k;
    while (static_cast<double>(choice.k + 1) * (choice.k + 1) * (choice.k + 1) <= x)
        ++choice.k;
    return choice;
}

}  // namespace shapeagg
