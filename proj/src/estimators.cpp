#include "shapeagg/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace shapeagg {

Sequence isotonic_ls(const Sequence& y) {
    const std::size_t n = y.size();
    // Stack of pooled blocks: (sum, count, mean).
    std::vector<double> sum(n), mean(n);
    std::vector<std::size_t> count(n);
    std::size_t top = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum[top] = y[i];
        count[top] = 1;
        mean[top] = y[i];
        ++top;
        while (top > 1 && mean[top - 2] > mean[top - 1]) {
            sum[top - 2] += sum[top - 1];
            count[top - 2] += count[top - 1];
            mean[top - 2] = sum[top - 2] / static_cast<double>(count[top - 2]);
            --top;
        }
    }
    std::vector<double> out(n);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < top; ++b)
        for (std::size_t j = 0; j < count[b]; ++j) out[pos++] = mean[b];
    return Sequence(std::move(out));
}

namespace {

// Cholesky solve for the active-set normal equations. The Gram matrix of
// second-difference rows is pentadiagonal in the original indices, and a
// sorted subset keeps bandwidth <= 2 after compression.
class BandedSpd {
  public:
    explicit BandedSpd(std::size_t p) : p_(p), band_(3 * p, 0.0) {}

    double& at(std::size_t i, std::size_t d) { return band_[3 * i + d]; }  // d = j - i in 0..2

    // In-place Cholesky (lower band), then solve L L^T x = rhs.
    bool solve(std::vector<double>& rhs) {
        for (std::size_t i = 0; i < p_; ++i) {
            double d = at(i, 0);
            if (i >= 1) { const double l = low(i - 1, 1); d -= l * l; }
            if (i >= 2) { const double l = low(i - 2, 2); d -= l * l; }
            if (d <= 0.0) return false;
            const double r = std::sqrt(d);
            low(i, 0) = r;
            if (i + 1 < p_) {
                double v = at_sym(i, i + 1);
                if (i >= 1) v -= low(i - 1, 1) * low(i - 1, 2);
                low(i, 1) = v / r;
            }
            if (i + 2 < p_) low(i, 2) = at_sym(i, i + 2) / r;
        }
        for (std::size_t i = 0; i < p_; ++i) {
            double v = rhs[i];
            if (i >= 1) v -= low(i - 1, 1) * rhs[i - 1];
            if (i >= 2) v -= low(i - 2, 2) * rhs[i - 2];
            rhs[i] = v / low(i, 0);
        }
        for (std::size_t ii = p_; ii-- > 0;) {
            double v = rhs[ii];
            if (ii + 1 < p_) v -= low(ii, 1) * rhs[ii + 1];
            if (ii + 2 < p_) v -= low(ii, 2) * rhs[ii + 2];
            rhs[ii] = v / low(ii, 0);
        }
        return true;
    }

  private:
    double& low(std::size_t i, std::size_t d) { return chol_[3 * i + d]; }
    double at_sym(std::size_t i, std::size_t j) { return band_[3 * i + (j - i)]; }

    std::size_t p_;
    std::vector<double> band_;
    std::vector<double> chol_ = std::vector<double>(3 * p_, 0.0);
};

// Second-difference operator: (A u)_j = u_j - 2 u_{j+1} + u_{j+2}, j = 0..n-3.
void apply_second_diff(const std::vector<double>& u, std::vector<double>& out) {
    const std::size_t m = u.size() - 2;
    for (std::size_t j = 0; j < m; ++j) out[j] = u[j] - 2.0 * u[j + 1] + u[j + 2];
}

}  // namespace

Sequence convex_ls(const Sequence& y, double tol, long max_iter) {
    const std::size_t n = y.size();
    if (n < 3) throw std::invalid_argument("convex_ls: requires n >= 3");
    if (!(tol > 0.0)) throw std::invalid_argument("convex_ls: tol must be positive");
    const std::size_t m = n - 2;

    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(y[i]));
    const double eps = tol * scale;

    std::vector<double> lambda(m, 0.0);
    std::vector<char> active(m, 0);
    std::vector<double> u(y.values());
    std::vector<double> au(m);

    auto rebuild_u = [&]() {
        u = y.values();
        for (std::size_t j = 0; j < m; ++j) {
            if (lambda[j] == 0.0) continue;
            u[j] += lambda[j];
            u[j + 1] -= 2.0 * lambda[j];
            u[j + 2] += lambda[j];
        }
    };

    std::vector<std::size_t> pset;
    std::vector<double> z, rhs;
    long iter = 0;
    double worst = 0.0;
    for (; iter < max_iter; ++iter) {
        apply_second_diff(u, au);
        // Most violated primal constraint among inactive duals.
        double best = -eps;
        std::ptrdiff_t pick = -1;
        for (std::size_t j = 0; j < m; ++j) {
            if (!active[j] && au[j] < best) {
                best = au[j];
                pick = static_cast<std::ptrdiff_t>(j);
            }
        }
        worst = (pick >= 0) ? -best : 0.0;
        if (pick < 0) {
            return Sequence(std::move(u));  // KKT satisfied
        }
        active[static_cast<std::size_t>(pick)] = 1;

        // Inner loop: solve the equality-constrained subproblem on the
        // active set; trim negative multipliers until feasible.
        for (;;) {
            pset.clear();
            for (std::size_t j = 0; j < m; ++j)
                if (active[j]) pset.push_back(j);
            const std::size_t p = pset.size();
            BandedSpd gram(p);
            rhs.assign(p, 0.0);
            for (std::size_t a = 0; a < p; ++a) {
                const std::size_t j = pset[a];
                gram.at(a, 0) = 6.0;
                for (std::size_t d = 1; d <= 2 && a + d < p; ++d) {
                    const std::size_t gap = pset[a + d] - j;
                    if (gap == 1) gram.at(a, d) = -4.0;
                    else if (gap == 2) gram.at(a, d) = 1.0;
                }
                rhs[a] = -(y[j] - 2.0 * y[j + 1] + y[j + 2]);
            }
            z = rhs;
            if (!gram.solve(z))
                throw ConvergenceError("convex_ls: singular active-set system", worst, iter);

            bool feasible = true;
            double alpha = 1.0;
            std::size_t drop = m;
            for (std::size_t a = 0; a < p; ++a) {
                if (z[a] <= 0.0) {
                    feasible = false;
                    const std::size_t j = pset[a];
                    const double denom = lambda[j] - z[a];
                    const double step = (denom > 0.0) ? lambda[j] / denom : 0.0;
                    if (step < alpha) {
                        alpha = step;
                        drop = j;
                    }
                }
            }
            if (feasible) {
                for (std::size_t j = 0; j < m; ++j) lambda[j] = 0.0;
                for (std::size_t a = 0; a < p; ++a) lambda[pset[a]] = z[a];
                break;
            }
            for (std::size_t a = 0; a < p; ++a) {
                const std::size_t j = pset[a];
                lambda[j] += alpha * (z[a] - lambda[j]);
                if (j == drop || lambda[j] <= 0.0) {
                    lambda[j] = 0.0;
                    active[j] = 0;
                }
            }
        }
        rebuild_u();
    }
    apply_second_diff(u, au);
    double res = 0.0;
    for (std::size_t j = 0; j < m; ++j) res = std::max(res, -au[j]);
    throw ConvergenceError("convex_ls: iteration cap reached", res, iter);
}

namespace {

// Exact 1-D total-variation denoising for the unscaled objective
//   (1/2) |u - y|_2^2 + lam * sum |u_{i+1} - u_i| .
// Forward pass clips the piecewise-linear derivative of the running
// value function at -lam/+lam; backward pass clamps to the recorded
// breakpoints. O(n) amortized.
std::vector<double> tv_denoise_unscaled(const std::vector<double>& y, double lam) {
    const std::size_t n = y.size();
    if (n == 1) return y;
    std::vector<double> knot_x(2 * n), knot_da(2 * n), knot_db(2 * n);
    std::vector<double> lo_bound(n - 1), hi_bound(n - 1);
    std::size_t l = n, r = n - 1;  // empty deque
    double af = 1.0, bf = -y[0];   // derivative on the leftmost piece
    double al = 1.0, bl = -y[0];   // derivative on the rightmost piece
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // Find where the derivative crosses -lam, dropping passed knots.
        double a = af, b = bf;
        std::size_t j = l;
        while (j <= r && a * knot_x[j] + b < -lam) {
            a += knot_da[j];
            b += knot_db[j];
            ++j;
        }
        const double vlo = (-lam - b) / a;
        // Crossing of +lam from the right.
        double a2 = al, b2 = bl;
        std::size_t j2 = r;
        while (j2 + 1 > j && a2 * knot_x[j2] + b2 > lam) {
            a2 -= knot_da[j2];
            b2 -= knot_db[j2];
            --j2;
        }
        const double vhi = (lam - b2) / a2;
        lo_bound[i] = vlo;
        hi_bound[i] = vhi;
        // Clip: flat tails at -lam/+lam with new boundary knots.
        l = j;
        r = j2;
        --l;
        knot_x[l] = vlo;
        knot_da[l] = a;
        knot_db[l] = b + lam;
        ++r;
        knot_x[r] = vhi;
        knot_da[r] = -a2;
        knot_db[r] = lam - b2;
        // Add the next data term: derivative += (v - y[i+1]).
        af = 1.0;
        bf = -lam - y[i + 1];
        al = 1.0;
        bl = lam - y[i + 1];
    }
    double a = af, b = bf;
    std::size_t j = l;
    while (j <= r && a * knot_x[j] + b < 0.0) {
        a += knot_da[j];
        b += knot_db[j];
        ++j;
    }
    std::vector<double> x(n);
    x[n - 1] = -b / a;
    for (std::size_t i = n - 1; i-- > 0;)
        x[i] = std::clamp(x[i + 1], lo_bound[i], hi_bound[i]);
    return x;
}

}  // namespace

Sequence tv_estimator(const Sequence& y, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("tv_estimator: lambda must be positive");
    // The scaled objective divides the quadratic term by n, so the
    // equivalent unscaled penalty is lambda * n.
    return Sequence(tv_denoise_unscaled(y.values(), lambda * static_cast<double>(y.size())));
}

TVTuning TVTuning::explicit_lambda(double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("TVTuning: lambda must be positive");
    TVTuning t;
    t.rule = Rule::Explicit;
    t.lambda = lambda;
    return t;
}

TVTuning TVTuning::adaptive_kstar(double v, double sigma, double delta) {
    if (!(v > 0.0) || !(sigma > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("TVTuning: need V > 0, sigma > 0, delta in (0,1)");
    TVTuning t;
    t.rule = Rule::AdaptiveKStar;
    t.v = v;
    t.sigma = sigma;
    t.delta = delta;
    return t;
}

TVTuning TVTuning::universal(double sigma, double delta) {
    if (!(sigma > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("TVTuning: need sigma > 0, delta in (0,1)");
    TVTuning t;
    t.rule = Rule::Universal;
    t.sigma = sigma;
    t.delta = delta;
    return t;
}

double TVTuning::resolve(std::size_t n) const {
    switch (rule) {
        case Rule::Explicit: return lambda;
        case Rule::AdaptiveKStar: return lambda_adaptive_kstar(v, sigma, n, delta);
        case Rule::Universal: return lambda_universal(sigma, n, delta);
    }
    throw std::logic_error("TVTuning: unknown rule");
}

Sequence tv_estimator(const Sequence& y, const TVTuning& tuning) {
    return tv_estimator(y, tuning.resolve(y.size()));
}

double lambda_adaptive_kstar(double v, double sigma, std::size_t n, double delta) {
    if (!(v > 0.0) || !(sigma > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("lambda_adaptive_kstar: invalid arguments");
    const double logterm = std::log(static_cast<double>(n) / delta);
    if (!(logterm > 0.0))
        throw std::invalid_argument("lambda_adaptive_kstar: log(n/delta) must be positive");
    const double kstar = std::cbrt(v * v * static_cast<double>(n) * logterm / (sigma * sigma));
    return sigma * std::sqrt(logterm / (kstar * static_cast<double>(n)));
}

double lambda_universal(double sigma, std::size_t n, double delta) {
    if (!(sigma > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("lambda_universal: invalid arguments");
    const double logterm = std::log(static_cast<double>(n) / delta);
    if (!(logterm > 0.0))
        throw std::invalid_argument("lambda_universal: log(n/delta) must be positive");
    return 2.0 * sigma * std::sqrt(2.0 * logterm / static_cast<double>(n));
}

std::optional<int> min_jump_spacing(const Sequence& u) {
    std::vector<int> jumps;  // 1-based positions i with u_i != u_{i+1}
    for (std::size_t i = 0; i + 1 < u.size(); ++i)
        if (u[i] != u[i + 1]) jumps.push_back(static_cast<int>(i) + 1);
    if (jumps.size() < 2) return std::nullopt;
    int best = jumps[1] - jumps[0];
    for (std::size_t j = 2; j < jumps.size(); ++j)
        best = std::min(best, jumps[j] - jumps[j - 1]);
    return best;
}

NoiseLevel estimate_sigma_diff(const Sequence& y) {
    const std::size_t n = y.size();
    if (n < 2) throw std::invalid_argument("estimate_sigma_diff: requires n >= 2");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = y[i + 1] - y[i];
        s += d * d;
    }
    NoiseLevel out;
    out.sigma = std::sqrt(s / (2.0 * static_cast<double>(n - 1)));
    out.source = NoiseLevel::Source::EstimatedDiff;
    return out;
}

}  // namespace shapeagg
