#include "shapeagg/projections.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <utility>

namespace shapeagg {

Sequence project_piecewise_constant(const Sequence& y, const Pattern& jumps) {
    const std::size_t n = y.size();
    if (jumps.domain_lo != 1 || jumps.domain_hi != static_cast<int>(n) - 1)
        throw std::invalid_argument("project_piecewise_constant: pattern domain must be {1..n-1}");
    std::vector<double> out(n);
    std::size_t start = 0;
    auto fill_block = [&](std::size_t end) {  // [start, end) 0-based
        double s = 0.0;
        for (std::size_t i = start; i < end; ++i) s += y[i];
        const double m = s / static_cast<double>(end - start);
        for (std::size_t i = start; i < end; ++i) out[i] = m;
        start = end;
    };
    for (int j : jumps.indices) fill_block(static_cast<std::size_t>(j));
    fill_block(n);
    return Sequence(std::move(out));
}

HingeBasis::HingeBasis(std::size_t n, const std::vector<int>& knots)
    : n_(n), d_(knots.size() + 2), q_(n * d_) {
    if (n < 3) throw std::invalid_argument("HingeBasis: n must be >= 3");
    // Raw basis: constant, linear ramp, one hinge per knot.
    for (std::size_t i = 0; i < n; ++i) {
        q_[i] = 1.0;
        q_[n + i] = static_cast<double>(i + 1);
    }
    for (std::size_t k = 0; k < knots.size(); ++k) {
        const int t = knots[k];
        if (t < 2 || t > static_cast<int>(n) - 1)
            throw std::invalid_argument("HingeBasis: knot outside {2..n-1}");
        double* col = &q_[(k + 2) * n];
        for (std::size_t i = 0; i < n; ++i)
            col[i] = std::max(static_cast<double>(i + 1) - static_cast<double>(t), 0.0);
    }
    // Modified Gram-Schmidt with one reorthogonalization pass.
    for (std::size_t c = 0; c < d_; ++c) {
        double* col = &q_[c * n];
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < c; ++p) {
                const double* prev = &q_[p * n];
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += col[i] * prev[i];
                for (std::size_t i = 0; i < n; ++i) col[i] -= dot * prev[i];
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += col[i] * col[i];
        norm = std::sqrt(norm);
        if (norm < 1e-12 * std::sqrt(static_cast<double>(n)))
            throw std::invalid_argument("HingeBasis: basis vectors are linearly dependent");
        for (std::size_t i = 0; i < n; ++i) col[i] /= norm;
    }
}

void HingeBasis::coefficients(const double* y, double* coefs) const {
    for (std::size_t c = 0; c < d_; ++c) {
        const double* col = &q_[c * n_];
        double dot = 0.0;
        for (std::size_t i = 0; i < n_; ++i) dot += col[i] * y[i];
        coefs[c] = dot;
    }
}

void HingeBasis::reconstruct(const double* coefs, double* out) const {
    for (std::size_t i = 0; i < n_; ++i) out[i] = 0.0;
    for (std::size_t c = 0; c < d_; ++c) {
        const double* col = &q_[c * n_];
        const double w = coefs[c];
        for (std::size_t i = 0; i < n_; ++i) out[i] += w * col[i];
    }
}

std::vector<double> HingeBasis::project(const std::vector<double>& y) const {
    std::vector<double> coefs(d_), out(n_);
    coefficients(y.data(), coefs.data());
    reconstruct(coefs.data(), out.data());
    return out;
}

namespace {

using BasisKey = std::pair<std::size_t, std::vector<int>>;
std::map<BasisKey, std::shared_ptr<const HingeBasis>> g_basis_cache;
std::shared_mutex g_basis_mutex;

}  // namespace

std::shared_ptr<const HingeBasis> hinge_basis_cached(std::size_t n,
                                                     const std::vector<int>& knots) {
    const BasisKey key{n, knots};
    {
        std::shared_lock lock(g_basis_mutex);
        auto it = g_basis_cache.find(key);
        if (it != g_basis_cache.end()) return it->second;
    }
    auto basis = std::make_shared<const HingeBasis>(n, knots);
    std::unique_lock lock(g_basis_mutex);
    return g_basis_cache.emplace(key, std::move(basis)).first->second;
}

Sequence project_piecewise_linear(const Sequence& y, const Pattern& knots) {
    const std::size_t n = y.size();
    if (n < 3)
        throw std::invalid_argument("project_piecewise_linear: n must be >= 3");
    if (knots.domain_lo != 2 || knots.domain_hi != static_cast<int>(n) - 1)
        throw std::invalid_argument("project_piecewise_linear: pattern domain must be {2..n-1}");
    auto basis = hinge_basis_cached(n, knots.indices);
    return Sequence(basis->project(y.values()));
}

double log_choose(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("log_choose: k out of range");
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

namespace {

// log sum_{i=0}^{m-1} e^{-i} = log((1 - e^{-m}) / (1 - e^{-1})).
double log_geometric_normalizer(std::size_t m) {
    return std::log1p(-std::exp(-static_cast<double>(m))) - std::log1p(-std::exp(-1.0));
}

}  // namespace

double log_prior_monotone(int pattern_size, std::size_t n) {
    if (n < 1) throw std::invalid_argument("log_prior_monotone: n must be >= 1");
    if (pattern_size < 0 || pattern_size > static_cast<int>(n) - 1)
        throw std::invalid_argument("log_prior_monotone: |J| out of range");
    return -static_cast<double>(pattern_size) - log_geometric_normalizer(n) -
           log_choose(static_cast<int>(n) - 1, pattern_size);
}

double prior_weight_monotone(const Pattern& jumps, std::size_t n) {
    if (jumps.domain_lo != 1 || jumps.domain_hi != static_cast<int>(n) - 1)
        throw std::invalid_argument("prior_weight_monotone: pattern domain must be {1..n-1}");
    return std::exp(log_prior_monotone(jumps.size(), n));
}

double log_prior_convex(int pattern_size, std::size_t n) {
    if (n < 3) throw std::invalid_argument("log_prior_convex: n must be >= 3");
    if (pattern_size < 0 || pattern_size > static_cast<int>(n) - 2)
        throw std::invalid_argument("log_prior_convex: |J| out of range");
    return -static_cast<double>(pattern_size) - log_geometric_normalizer(n - 1) -
           log_choose(static_cast<int>(n) - 2, pattern_size);
}

double prior_weight_convex(const Pattern& knots, std::size_t n) {
    if (knots.domain_lo != 2 || knots.domain_hi != static_cast<int>(n) - 1)
        throw std::invalid_argument("prior_weight_convex: pattern domain must be {2..n-1}");
    return std::exp(log_prior_convex(knots.size(), n));
}

bool log_prior_bound_check(const Pattern& jumps, std::size_t n) {
    const double lhs = -log_prior_monotone(jumps.size(), n);
    const double d = jumps.size() + 1.0;
    const double rhs = 2.0 * d * std::log(std::exp(1.0) * static_cast<double>(n) / d) + 0.5;
    return lhs <= rhs;
}

}  // namespace shapeagg
