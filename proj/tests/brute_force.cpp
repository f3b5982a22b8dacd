#include "brute_force.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bf {

std::vector<double> gauss_solve(std::vector<double> a, std::vector<double> b) {
    const std::size_t p = b.size();
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r * p + col]) > std::abs(a[pivot * p + col])) pivot = r;
        if (std::abs(a[pivot * p + col]) < 1e-12)
            throw std::runtime_error("gauss_solve: singular system");
        if (pivot != col) {
            for (std::size_t c = 0; c < p; ++c) std::swap(a[col * p + c], a[pivot * p + c]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < p; ++r) {
            const double f = a[r * p + col] / a[col * p + col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < p; ++c) a[r * p + c] -= f * a[col * p + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(p);
    for (std::size_t rr = p; rr-- > 0;) {
        double v = b[rr];
        for (std::size_t c = rr + 1; c < p; ++c) v -= a[rr * p + c] * x[c];
        x[rr] = v / a[rr * p + rr];
    }
    return x;
}

std::vector<double> isotonic(const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + y[i];
    const auto mean = [&](std::size_t a, std::size_t b) {  // [a, b] inclusive
        return (prefix[b + 1] - prefix[a]) / static_cast<double>(b - a + 1);
    };
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a <= i; ++a) {
            double inner = std::numeric_limits<double>::infinity();
            for (std::size_t b = i; b < n; ++b) inner = std::min(inner, mean(a, b));
            best = std::max(best, inner);
        }
        out[i] = best;
    }
    return out;
}

std::vector<double> convex_projection(const std::vector<double>& y) {
    const std::size_t n = y.size();
    if (n < 3) return y;
    const std::size_t m = n - 2;
    const auto second_diff = [&](const std::vector<double>& u, std::size_t j) {
        return u[j] - 2.0 * u[j + 1] + u[j + 2];
    };
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<double> best = y;
    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        std::vector<std::size_t> act;
        for (std::size_t j = 0; j < m; ++j)
            if (mask & (std::size_t{1} << j)) act.push_back(j);
        const std::size_t p = n + act.size();
        std::vector<double> a(p * p, 0.0), rhs(p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            a[i * p + i] = 1.0;
            rhs[i] = y[i];
        }
        for (std::size_t t = 0; t < act.size(); ++t) {
            const std::size_t j = act[t];
            // stationarity: u - y - sum lambda_t grad c_j = 0
            a[j * p + (n + t)] = -1.0;
            a[(j + 1) * p + (n + t)] = 2.0;
            a[(j + 2) * p + (n + t)] = -1.0;
            // primal: c_j(u) = 0
            a[(n + t) * p + j] = 1.0;
            a[(n + t) * p + (j + 1)] = -2.0;
            a[(n + t) * p + (j + 2)] = 1.0;
        }
        std::vector<double> sol;
        try {
            sol = gauss_solve(std::move(a), std::move(rhs));
        } catch (const std::runtime_error&) {
            continue;
        }
        std::vector<double> u(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n));
        bool ok = true;
        for (std::size_t t = 0; t < act.size() && ok; ++t)
            if (sol[n + t] < -1e-9) ok = false;
        for (std::size_t j = 0; j < m && ok; ++j)
            if (second_diff(u, j) < -1e-9) ok = false;
        if (!ok) continue;
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) obj += (u[i] - y[i]) * (u[i] - y[i]);
        if (obj < best_obj) {
            best_obj = obj;
            best = std::move(u);
        }
    }
    return best;
}

std::vector<double> tv_denoise(const std::vector<double>& y, double lam_unscaled) {
    const std::size_t n = y.size();
    if (n == 1) return y;
    const std::size_t m = n - 1;
    std::size_t total = 1;
    for (std::size_t i = 0; i < m; ++i) total *= 3;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<double> best;
    std::vector<int> sign(m);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < m; ++i) {
            sign[i] = static_cast<int>(c % 3) - 1;
            c /= 3;
        }
        // blocks split where sign != 0
        std::vector<std::size_t> starts{0};
        for (std::size_t i = 0; i < m; ++i)
            if (sign[i] != 0) starts.push_back(i + 1);
        starts.push_back(n);
        const std::size_t blocks = starts.size() - 1;
        std::vector<double> v(blocks);
        bool consistent = true;
        for (std::size_t b = 0; b < blocks; ++b) {
            double sum = 0.0;
            for (std::size_t i = starts[b]; i < starts[b + 1]; ++i) sum += y[i];
            const int s_left = b == 0 ? 0 : sign[starts[b] - 1];
            const int s_right = b + 1 == blocks ? 0 : sign[starts[b + 1] - 1];
            const double len = static_cast<double>(starts[b + 1] - starts[b]);
            v[b] = (sum + lam_unscaled * (s_right - s_left)) / len;
        }
        for (std::size_t b = 0; b + 1 < blocks && consistent; ++b) {
            const int s = sign[starts[b + 1] - 1];
            if (s * (v[b + 1] - v[b]) <= 0.0) consistent = false;
        }
        if (!consistent) continue;
        double obj = 0.0;
        std::vector<double> u(n);
        for (std::size_t b = 0; b < blocks; ++b)
            for (std::size_t i = starts[b]; i < starts[b + 1]; ++i) {
                u[i] = v[b];
                obj += 0.5 * (v[b] - y[i]) * (v[b] - y[i]);
            }
        for (std::size_t b = 0; b + 1 < blocks; ++b)
            obj += lam_unscaled * std::abs(v[b + 1] - v[b]);
        if (obj < best_obj) {
            best_obj = obj;
            best = std::move(u);
        }
    }
    return best;
}

std::vector<double> project_columns(const std::vector<double>& y,
                                    const std::vector<std::vector<double>>& columns) {
    const std::size_t n = y.size(), d = columns.size();
    std::vector<double> gram(d * d, 0.0), rhs(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += columns[a][i] * columns[b][i];
            gram[a * d + b] = dot;
        }
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += columns[a][i] * y[i];
        rhs[a] = dot;
    }
    const std::vector<double> beta = gauss_solve(std::move(gram), std::move(rhs));
    std::vector<double> out(n, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t i = 0; i < n; ++i) out[i] += beta[a] * columns[a][i];
    return out;
}

std::vector<double> project_blocks(const std::vector<double>& y, const std::vector<int>& jumps) {
    const std::size_t n = y.size();
    std::vector<std::vector<double>> cols;
    std::size_t start = 0;
    auto add_block = [&](std::size_t end) {
        std::vector<double> col(n, 0.0);
        for (std::size_t i = start; i < end; ++i) col[i] = 1.0;
        cols.push_back(std::move(col));
        start = end;
    };
    for (int j : jumps) add_block(static_cast<std::size_t>(j));
    add_block(n);
    return project_columns(y, cols);
}

std::vector<double> project_hinges(const std::vector<double>& y, const std::vector<int>& knots) {
    const std::size_t n = y.size();
    std::vector<std::vector<double>> cols;
    cols.emplace_back(n, 1.0);
    std::vector<double> ramp(n);
    for (std::size_t i = 0; i < n; ++i) ramp[i] = static_cast<double>(i + 1);
    cols.push_back(std::move(ramp));
    for (int t : knots) {
        std::vector<double> h(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            h[i] = std::max(0.0, static_cast<double>(i + 1) - static_cast<double>(t));
        cols.push_back(std::move(h));
    }
    return project_columns(y, cols);
}

double best_segmentation_value(const std::vector<double>& mu, int k) {
    const std::size_t n = mu.size();
    std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + mu[i];
        prefix_sq[i + 1] = prefix_sq[i] + mu[i] * mu[i];
    }
    const auto sse = [&](std::size_t a, std::size_t b) {  // [a, b] inclusive
        const double s = prefix[b + 1] - prefix[a];
        const double q = prefix_sq[b + 1] - prefix_sq[a];
        return std::max(0.0, q - s * s / static_cast<double>(b - a + 1));
    };
    double best = std::numeric_limits<double>::infinity();
    // choose k-1 jump positions out of {1,...,n-1}
    std::vector<int> comb(static_cast<std::size_t>(k - 1));
    for (int t = 0; t < k - 1; ++t) comb[static_cast<std::size_t>(t)] = t + 1;
    const int domain = static_cast<int>(n) - 1;
    if (k == 1) return sse(0, n - 1) / static_cast<double>(n);
    for (;;) {
        double total = 0.0;
        std::size_t start = 0;
        for (int j : comb) {
            total += sse(start, static_cast<std::size_t>(j) - 1);
            start = static_cast<std::size_t>(j);
        }
        total += sse(start, n - 1);
        best = std::min(best, total);
        int t = k - 2;
        while (t >= 0 && comb[static_cast<std::size_t>(t)] == domain - (k - 2 - t)) --t;
        if (t < 0) break;
        ++comb[static_cast<std::size_t>(t)];
        for (int s = t + 1; s < k - 1; ++s)
            comb[static_cast<std::size_t>(s)] = comb[static_cast<std::size_t>(s - 1)] + 1;
    }
    return best / static_cast<double>(n);
}

std::vector<double> random_vector(shapeagg::CounterRng& rng, std::size_t n, double scale) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = scale * rng.next_normal();
    return y;
}

std::vector<double> random_monotone(shapeagg::CounterRng& rng, std::size_t n, double scale) {
    std::vector<double> y(n);
    double acc = scale * rng.next_normal();
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = acc;
        acc += scale * std::abs(rng.next_normal());
    }
    return y;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace bf
