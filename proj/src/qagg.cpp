#include "shapeagg/qagg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "shapeagg/rng.hpp"

namespace shapeagg {

namespace {

constexpr std::size_t kEnumerationCap = std::size_t{1} << 21;
constexpr std::size_t kBasisBudgetBytes = std::size_t{256} << 20;

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::exp(log_choose(n, k));
}

}  // namespace

DictionaryMode DictionaryMode::max_cardinality(int m) {
    if (m < 0) throw std::invalid_argument("DictionaryMode: max cardinality must be >= 0");
    DictionaryMode mode;
    mode.kind = Kind::MaxCardinality;
    mode.max_card = m;
    return mode;
}

DictionaryMode DictionaryMode::sampled(std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("DictionaryMode: sample count must be positive");
    DictionaryMode mode;
    mode.kind = Kind::Sampled;
    mode.sample_count = count;
    mode.seed = seed;
    return mode;
}

Dictionary Dictionary::build(PatternFamily family, std::size_t n, DictionaryMode mode) {
    if (family == PatternFamily::Monotone && n < 2)
        throw std::invalid_argument("Dictionary: monotone family requires n >= 2");
    if (family == PatternFamily::Convex && n < 3)
        throw std::invalid_argument("Dictionary: convex family requires n >= 3");

    Dictionary dict;
    dict.family_ = family;
    dict.n_ = n;
    dict.mode_ = mode;
    const int domain = dict.domain_size();

    switch (mode.kind) {
        case DictionaryMode::Kind::Exhaustive: {
            if (n > 21)
                throw CapacityError(
                    "Dictionary: exhaustive mode is limited to n <= 21; use MaxCardinality");
            dict.max_card_ = domain;
            dict.conceptual_size_ = std::ldexp(1.0, domain);
            dict.enumerate_patterns();
            break;
        }
        case DictionaryMode::Kind::MaxCardinality: {
            dict.max_card_ = std::min(mode.max_card, domain);
            double count = 0.0;
            for (int j = 0; j <= dict.max_card_; ++j) count += binomial(domain, j);
            dict.conceptual_size_ = count;
            if (count <= static_cast<double>(kEnumerationCap)) {
                dict.enumerate_patterns();
            } else if (family == PatternFamily::Monotone) {
                dict.enumerated_ = false;  // served by the segmentation oracle
            } else {
                throw CapacityError(
                    "Dictionary: convex MaxCardinality family too large to enumerate; "
                    "reduce the cardinality bound or use Sampled");
            }
            break;
        }
        case DictionaryMode::Kind::Sampled: {
            dict.max_card_ = domain;
            dict.sample_patterns();
            dict.conceptual_size_ = static_cast<double>(dict.size());
            break;
        }
    }

    dict.log_prior_by_card_.resize(static_cast<std::size_t>(dict.max_card_) + 1);
    for (int j = 0; j <= dict.max_card_; ++j) {
        dict.log_prior_by_card_[static_cast<std::size_t>(j)] =
            family == PatternFamily::Monotone ? log_prior_monotone(j, n)
                                              : log_prior_convex(j, n);
    }
    if (family == PatternFamily::Convex && dict.enumerated_) dict.build_bases();
    return dict;
}

void Dictionary::enumerate_patterns() {
    const int domain = domain_size();
    const int lo = domain_lo();
    offsets_.clear();
    flat_.clear();
    offsets_.push_back(0);
    std::vector<int> comb;
    for (int j = 0; j <= max_card_; ++j) {
        if (j == 0) {
            offsets_.push_back(flat_.size());
            continue;
        }
        if (j > domain) break;
        comb.resize(static_cast<std::size_t>(j));
        for (int t = 0; t < j; ++t) comb[static_cast<std::size_t>(t)] = t;
        for (;;) {
            for (int v : comb) flat_.push_back(static_cast<std::int32_t>(v + lo));
            offsets_.push_back(flat_.size());
            // next combination in lexicographic order
            int t = j - 1;
            while (t >= 0 && comb[static_cast<std::size_t>(t)] == domain - j + t) --t;
            if (t < 0) break;
            ++comb[static_cast<std::size_t>(t)];
            for (int s = t + 1; s < j; ++s)
                comb[static_cast<std::size_t>(s)] = comb[static_cast<std::size_t>(s - 1)] + 1;
        }
    }
    enumerated_ = true;
}

void Dictionary::sample_patterns() {
    const int domain = domain_size();
    const int lo = domain_lo();
    const double conceptual = std::ldexp(1.0, std::min(domain, 1000));
    std::size_t want = mode_.sample_count;
    if (static_cast<double>(want) > conceptual)
        want = static_cast<std::size_t>(conceptual);

    std::set<std::vector<int>> seen;
    seen.insert({});  // the empty pattern anchors every sampled dictionary
    CounterRng rng(mode_.seed, 0);
    std::vector<int> slots(static_cast<std::size_t>(domain));
    const std::size_t max_attempts = 60 * want + 100;
    for (std::size_t attempt = 0; attempt < max_attempts && seen.size() < want; ++attempt) {
        // Cardinality drawn uniformly, then a uniform subset of that size.
        const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(domain) + 1));
        for (int t = 0; t < domain; ++t) slots[static_cast<std::size_t>(t)] = t;
        for (int t = 0; t < j; ++t) {
            const std::size_t pick =
                static_cast<std::size_t>(t) +
                rng.next_below(static_cast<std::uint64_t>(domain - t));
            std::swap(slots[static_cast<std::size_t>(t)], slots[pick]);
        }
        std::vector<int> idx(slots.begin(), slots.begin() + j);
        std::sort(idx.begin(), idx.end());
        for (int& v : idx) v += lo;
        seen.insert(std::move(idx));
    }

    std::vector<std::vector<int>> patterns(seen.begin(), seen.end());
    std::sort(patterns.begin(), patterns.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) {
                  if (a.size() != b.size()) return a.size() < b.size();
                  return a < b;
              });
    offsets_.clear();
    flat_.clear();
    offsets_.push_back(0);
    for (const auto& p : patterns) {
        for (int v : p) flat_.push_back(static_cast<std::int32_t>(v));
        offsets_.push_back(flat_.size());
    }
    enumerated_ = true;
}

void Dictionary::build_bases() {
    std::size_t total = 0;
    const std::size_t count = size();
    for (std::size_t i = 0; i < count; ++i)
        total += n_ * (static_cast<std::size_t>(pattern_cardinality(i)) + 2);
    if (total * sizeof(double) > kBasisBudgetBytes) return;  // fall back to on-the-fly bases
    basis_offsets_.resize(count);
    bases_flat_.resize(total);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < count; ++i) {
        basis_offsets_[i] = pos;
        const HingeBasis basis(n_, pattern_indices(i));
        const std::size_t len = n_ * basis.dim();
        std::vector<double> coefs(basis.dim(), 0.0);
        // Copy columns by reconstructing unit coefficients.
        for (std::size_t c = 0; c < basis.dim(); ++c) {
            std::fill(coefs.begin(), coefs.end(), 0.0);
            coefs[c] = 1.0;
            basis.reconstruct(coefs.data(), &bases_flat_[pos + c * n_]);
        }
        pos += len;
    }
}

std::size_t Dictionary::size() const {
    if (!enumerated_)
        throw std::logic_error("Dictionary: implicit family has no explicit pattern list");
    return offsets_.size() - 1;
}

std::vector<int> Dictionary::pattern_indices(std::size_t i) const {
    if (!enumerated_ || i + 1 >= offsets_.size())
        throw std::out_of_range("Dictionary: pattern index out of range");
    return std::vector<int>(flat_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                            flat_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
}

Pattern Dictionary::pattern(std::size_t i) const {
    return family_ == PatternFamily::Monotone ? Pattern::jumps(pattern_indices(i), n_)
                                              : Pattern::knots(pattern_indices(i), n_);
}

int Dictionary::pattern_cardinality(std::size_t i) const {
    return static_cast<int>(offsets_[i + 1] - offsets_[i]);
}

double Dictionary::log_prior(std::size_t i) const {
    return log_prior_by_card_[static_cast<std::size_t>(pattern_cardinality(i))];
}

double Dictionary::log_prior_for_cardinality(int j) const {
    if (j < 0 || j > max_card_)
        throw std::out_of_range("Dictionary: cardinality out of range");
    return log_prior_by_card_[static_cast<std::size_t>(j)];
}

std::optional<std::size_t> Dictionary::index_of(const std::vector<int>& indices) const {
    if (!enumerated_) return std::nullopt;
    const std::size_t count = size();
    std::size_t lo = 0, hi = count;
    const auto canon_less = [this](std::size_t i, const std::vector<int>& key) {
        const int card = pattern_cardinality(i);
        if (card != static_cast<int>(key.size())) return card < static_cast<int>(key.size());
        const std::int32_t* a = &flat_[offsets_[i]];
        for (std::size_t t = 0; t < key.size(); ++t) {
            if (a[t] != key[t]) return a[t] < key[t];
        }
        return false;
    };
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (canon_less(mid, indices)) lo = mid + 1; else hi = mid;
    }
    if (lo < count && pattern_cardinality(lo) == static_cast<int>(indices.size()) &&
        std::equal(indices.begin(), indices.end(), flat_.begin() + static_cast<std::ptrdiff_t>(offsets_[lo])))
        return lo;
    return std::nullopt;
}

SimplexWeights QAggSolution::simplex_weights() const {
    SimplexWeights w;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (dict_positions[i] < 0)
            throw std::logic_error("QAggSolution: dictionary positions unavailable");
        w.entries.emplace_back(static_cast<std::size_t>(dict_positions[i]), weights[i]);
    }
    std::sort(w.entries.begin(), w.entries.end());
    return w;
}

namespace {

// Block means for a jump pattern, written into out.
void materialize_monotone(const std::vector<double>& y, const std::vector<int>& jumps,
                          std::vector<double>& out) {
    const std::size_t n = y.size();
    out.resize(n);
    std::size_t a = 0;
    auto fill = [&](std::size_t b) {  // [a, b)
        double s = 0.0;
        for (std::size_t i = a; i < b; ++i) s += y[i];
        const double m = s / static_cast<double>(b - a);
        for (std::size_t i = a; i < b; ++i) out[i] = m;
        a = b;
    };
    for (int j : jumps) fill(static_cast<std::size_t>(j));
    fill(n);
}

void materialize_convex(const Dictionary& dict, const std::vector<int>& knots,
                        const std::vector<double>& y, std::vector<double>& out) {
    const std::size_t n = y.size();
    out.resize(n);
    if (dict.bases_cached()) {
        if (auto pos = dict.index_of(knots)) {
            const std::size_t d = knots.size() + 2;
            const double* basis = dict.basis_data(*pos);
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t c = 0; c < d; ++c) {
                const double* col = basis + c * n;
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += col[i] * y[i];
                for (std::size_t i = 0; i < n; ++i) out[i] += dot * col[i];
            }
            return;
        }
    }
    const HingeBasis basis(n, knots);
    out = basis.project(y);
}

void materialize_atom(const Dictionary& dict, const std::vector<int>& indices,
                      const std::vector<double>& y, std::vector<double>& out) {
    if (dict.family() == PatternFamily::Monotone)
        materialize_monotone(y, indices, out);
    else
        materialize_convex(dict, indices, y, out);
}

}  // namespace

namespace detail {

namespace {

inline double score_monotone_pattern(const std::uint64_t* offsets, const std::int32_t* flat,
                                     std::size_t i, const std::vector<double>& sy,
                                     const double* smu, double alpha, double beta,
                                     std::size_t n) {
    double acc = 0.0;
    std::size_t a = 0;
    for (std::uint64_t p = offsets[i]; p < offsets[i + 1]; ++p) {
        const std::size_t b = static_cast<std::size_t>(flat[p]);
        const double s = sy[b] - sy[a];
        double term = alpha * s * s;
        if (smu) term += beta * s * (smu[b] - smu[a]);
        acc += term / static_cast<double>(b - a);
        a = b;
    }
    const double s = sy[n] - sy[a];
    double term = alpha * s * s;
    if (smu) term += beta * s * (smu[n] - smu[a]);
    acc += term / static_cast<double>(n - a);
    return acc / static_cast<double>(n);
}

inline double score_convex_pattern(const Dictionary& dict, std::size_t i,
                                   const std::vector<double>& y, const double* mu,
                                   double alpha, double beta) {
    const std::size_t n = dict.n();
    const std::size_t d = static_cast<std::size_t>(dict.pattern_cardinality(i)) + 2;
    double acc_yy = 0.0, acc_ym = 0.0;
    if (dict.bases_cached()) {
        const double* basis = dict.basis_data(i);
        for (std::size_t c = 0; c < d; ++c) {
            const double* col = basis + c * n;
            double cy = 0.0, cm = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                cy += col[t] * y[t];
                if (mu) cm += col[t] * mu[t];
            }
            acc_yy += cy * cy;
            acc_ym += cy * cm;
        }
    } else {
        const HingeBasis basis(n, dict.pattern_indices(i));
        std::vector<double> cy(d), cm(d);
        basis.coefficients(y.data(), cy.data());
        if (mu) basis.coefficients(mu, cm.data());
        for (std::size_t c = 0; c < d; ++c) {
            acc_yy += cy[c] * cy[c];
            if (mu) acc_ym += cy[c] * cm[c];
        }
    }
    return (alpha * acc_yy + beta * acc_ym) / static_cast<double>(n);
}

struct ScanContext {
    const Dictionary& dict;
    const std::vector<double>& y;
    const double* mu;
    double alpha, beta;
    const std::vector<double>& cost_by_card;
    const std::uint64_t* offsets;
    const std::int32_t* flat;
    std::vector<double> sy, smu;

    ScanContext(const Dictionary& d, const std::vector<double>& y_, const double* mu_,
                double a, double b, const std::vector<double>& cost)
        : dict(d), y(y_), mu(mu_), alpha(a), beta(b), cost_by_card(cost),
          offsets(d.offsets_data()), flat(d.flat_data()) {
        if (dict.family() == PatternFamily::Monotone) {
            const std::size_t n = y.size();
            sy.assign(n + 1, 0.0);
            for (std::size_t i = 0; i < n; ++i) sy[i + 1] = sy[i] + y[i];
            if (mu) {
                smu.assign(n + 1, 0.0);
                for (std::size_t i = 0; i < n; ++i) smu[i + 1] = smu[i] + mu[i];
            }
        }
    }

    double score(std::size_t i) const {
        double v;
        if (dict.family() == PatternFamily::Monotone) {
            v = score_monotone_pattern(offsets, flat, i, sy, mu ? smu.data() : nullptr, alpha,
                                       beta, y.size());
        } else {
            v = score_convex_pattern(dict, i, y, mu, alpha, beta);
        }
        const std::size_t card = offsets[i + 1] - offsets[i];
        return v + cost_by_card[card];
    }
};

}  // namespace

ScanResult scan_dictionary_serial(const Dictionary& dict, const std::vector<double>& y,
                                  const double* mu, double alpha, double beta,
                                  const std::vector<double>& cost_by_card) {
    const std::size_t count = dict.size();
    const ScanContext ctx(dict, y, mu, alpha, beta, cost_by_card);
    ScanResult best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t i = 0; i < count; ++i) {
        const double v = ctx.score(i);
        if (v < best.value) best = {v, i};
    }
    return best;
}

ScanResult scan_dictionary_parallel(const Dictionary& dict, const std::vector<double>& y,
                                    const double* mu, double alpha, double beta,
                                    const std::vector<double>& cost_by_card) {
#ifdef _OPENMP
    const std::size_t count = dict.size();
    const ScanContext ctx(dict, y, mu, alpha, beta, cost_by_card);
    ScanResult best{std::numeric_limits<double>::infinity(),
                    std::numeric_limits<std::size_t>::max()};
#pragma omp parallel
    {
        ScanResult local{std::numeric_limits<double>::infinity(),
                         std::numeric_limits<std::size_t>::max()};
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
            const double v = ctx.score(static_cast<std::size_t>(i));
            if (v < local.value ||
                (v == local.value && static_cast<std::size_t>(i) < local.index))
                local = {v, static_cast<std::size_t>(i)};
        }
#pragma omp critical(shapeagg_scan_merge)
        {
            if (local.value < best.value ||
                (local.value == best.value && local.index < best.index))
                best = local;
        }
    }
    return best;
#else
    return scan_dictionary_serial(dict, y, mu, alpha, beta, cost_by_card);
#endif
}

SegmentLmoResult segment_lmo(const std::vector<double>& y, const double* mu, double alpha,
                             double beta, int max_cardinality,
                             const std::vector<double>& cost_by_card) {
    const std::size_t n = y.size();
    const int m = std::min<int>(max_cardinality, static_cast<int>(n) - 1);
    std::vector<double> sy(n + 1, 0.0), smu;
    for (std::size_t i = 0; i < n; ++i) sy[i + 1] = sy[i] + y[i];
    if (mu) {
        smu.assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) smu[i + 1] = smu[i] + mu[i];
    }
    const auto block_cost = [&](std::size_t a, std::size_t b) {  // [a, b] inclusive
        const double s = sy[b + 1] - sy[a];
        double t = alpha * s * s;
        if (mu) t += beta * s * (smu[b + 1] - smu[a]);
        return t / (static_cast<double>(b - a + 1) * static_cast<double>(n));
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(static_cast<std::size_t>(m + 1) * n, inf);
    std::vector<int> bp(static_cast<std::size_t>(m + 1) * n, -1);
    for (std::size_t i = 0; i < n; ++i) dp[i] = block_cost(0, i);
    for (int j = 1; j <= m; ++j) {
        double* row = &dp[static_cast<std::size_t>(j) * n];
        const double* prev = &dp[static_cast<std::size_t>(j - 1) * n];
        int* back = &bp[static_cast<std::size_t>(j) * n];
        for (std::size_t i = static_cast<std::size_t>(j); i < n; ++i) {
            double best = inf;
            int arg = -1;
            for (std::size_t t = static_cast<std::size_t>(j) - 1; t < i; ++t) {
                const double c = prev[t] + block_cost(t + 1, i);
                if (c < best) {
                    best = c;
                    arg = static_cast<int>(t);
                }
            }
            row[i] = best;
            back[i] = arg;
        }
    }

    SegmentLmoResult result{inf, {}};
    int best_j = 0;
    for (int j = 0; j <= m; ++j) {
        const double v = dp[static_cast<std::size_t>(j) * n + (n - 1)] +
                         cost_by_card[static_cast<std::size_t>(j)];
        if (v < result.value) {
            result.value = v;
            best_j = j;
        }
    }
    std::size_t end = n - 1;
    for (int j = best_j; j >= 1; --j) {
        const int t = bp[static_cast<std::size_t>(j) * n + end];
        result.jumps.push_back(t + 1);  // jump between 1-based positions t+1 and t+2
        end = static_cast<std::size_t>(t);
    }
    std::reverse(result.jumps.begin(), result.jumps.end());
    return result;
}

}  // namespace detail

double qagg_vertex_objective(std::size_t i, const Sequence& y, double sigma,
                             const Dictionary& dict, double q_constant) {
    const std::size_t n = y.size();
    std::vector<double> g;
    materialize_atom(dict, dict.pattern_indices(i), y.values(), g);
    double fit = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double d = g[t] - y[t];
        fit += d * d;
    }
    fit /= static_cast<double>(n);
    const int card = dict.pattern_cardinality(i);
    const double s2n = sigma * sigma / static_cast<double>(n);
    return fit + 2.0 * s2n * card - q_constant * s2n * dict.log_prior(i);
}

double qagg_objective(const SimplexWeights& theta, const Sequence& y, double sigma,
                      const Dictionary& dict, double q_constant) {
    const std::size_t n = y.size();
    std::vector<std::vector<double>> atoms;
    atoms.reserve(theta.entries.size());
    std::vector<double> mu(n, 0.0);
    for (const auto& [idx, w] : theta.entries) {
        std::vector<double> g;
        materialize_atom(dict, dict.pattern_indices(idx), y.values(), g);
        for (std::size_t t = 0; t < n; ++t) mu[t] += w * g[t];
        atoms.push_back(std::move(g));
    }
    double obj = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double d = mu[t] - y[t];
        obj += d * d;
    }
    obj /= static_cast<double>(n);
    const double s2n = sigma * sigma / static_cast<double>(n);
    std::size_t a = 0;
    for (const auto& [idx, w] : theta.entries) {
        double spread = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double d = mu[t] - atoms[a][t];
            spread += d * d;
        }
        spread /= static_cast<double>(n);
        obj += w * (2.0 * s2n * dict.pattern_cardinality(idx) + 0.5 * spread -
                    q_constant * s2n * dict.log_prior(idx));
        ++a;
    }
    return obj;
}

namespace {

struct ActiveAtom {
    std::vector<int> indices;
    std::ptrdiff_t dict_pos = -1;
    double weight = 0.0;
    double norm2_g = 0.0;  // scaled
    double c = 0.0;        // rank + prior penalty constant
    std::vector<double> g;
};

}  // namespace

QAggSolution solve_qagg(const Sequence& y, double sigma, const Dictionary& dict,
                        const QAggConfig& cfg) {
    if (!(sigma > 0.0)) throw std::invalid_argument("solve_qagg: sigma must be positive");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("solve_qagg: tol must be positive");
    if (y.size() != dict.n())
        throw std::invalid_argument("solve_qagg: sequence length does not match dictionary");
    const std::size_t n = y.size();
    const std::vector<double>& yv = y.values();
    const double s2n = sigma * sigma / static_cast<double>(n);

    // Per-cardinality penalty constants c(j) = 2 sigma^2 j / n + qc sigma^2/n log(1/pi_j).
    const int maxcard = dict.max_pattern_cardinality();
    std::vector<double> cost_by_card(static_cast<std::size_t>(maxcard) + 1);
    for (int j = 0; j <= maxcard; ++j)
        cost_by_card[static_cast<std::size_t>(j)] =
            2.0 * s2n * j - cfg.q_constant * s2n * dict.log_prior_for_cardinality(j);

    const bool use_segment_lmo =
        dict.family() == PatternFamily::Monotone && !cfg.force_scan_lmo &&
        dict.mode().kind != DictionaryMode::Kind::Sampled;

    // The linear-minimization oracle: argmin over patterns of
    //   <g_J, mu> - (3/2)<g_J, g_J> + c(|J|)   (scaled inner products),
    // which is the gradient coordinate of the objective at the current mix.
    const auto lmo = [&](const double* mu) -> std::pair<double, std::vector<int>> {
        if (use_segment_lmo) {
            auto r = detail::segment_lmo(yv, mu, -1.5, 1.0, maxcard, cost_by_card);
            return {r.value, std::move(r.jumps)};
        }
        auto r = detail::scan_dictionary_parallel(dict, yv, mu, -1.5, 1.0, cost_by_card);
        return {r.value, dict.pattern_indices(r.index)};
    };

    std::vector<ActiveAtom> active;
    const auto add_atom = [&](const std::vector<int>& indices) -> std::size_t {
        for (std::size_t a = 0; a < active.size(); ++a)
            if (active[a].indices == indices) return a;
        ActiveAtom atom;
        atom.indices = indices;
        if (dict.enumerated()) {
            if (auto pos = dict.index_of(indices))
                atom.dict_pos = static_cast<std::ptrdiff_t>(*pos);
        }
        materialize_atom(dict, indices, yv, atom.g);
        atom.norm2_g = detail::scaled_norm_sq(atom.g);
        atom.c = cost_by_card[indices.size()];
        active.push_back(std::move(atom));
        return active.size() - 1;
    };

    // Start at the vertex with the smallest vertex objective
    //   |g_J - y|^2 + c(|J|) = |y|^2 - <g_J, g_J> + c(|J|).
    {
        std::vector<int> start;
        if (use_segment_lmo) {
            start = detail::segment_lmo(yv, nullptr, -1.0, 0.0, maxcard, cost_by_card).jumps;
        } else {
            auto r = detail::scan_dictionary_parallel(dict, yv, nullptr, -1.0, 0.0,
                                                      cost_by_card);
            start = dict.pattern_indices(r.index);
        }
        active[add_atom(start)].weight = 1.0;
    }

    std::vector<double> mu(n), grads;
    double gap = std::numeric_limits<double>::infinity();
    long iter = 0;

    const auto rebuild_mu = [&]() {
        std::fill(mu.begin(), mu.end(), 0.0);
        for (const ActiveAtom& a : active)
            for (std::size_t t = 0; t < n; ++t) mu[t] += a.weight * a.g[t];
    };

    const auto finalize = [&]() -> QAggSolution {
        QAggSolution sol{std::vector<Pattern>{}, std::vector<double>{},
                         std::vector<std::ptrdiff_t>{}, Sequence::zeros(1),
                         0.0, gap, iter};
        // Clamp stray negatives and renormalize before reporting.
        double total = 0.0;
        for (ActiveAtom& a : active) {
            if (a.weight < 0.0) a.weight = 0.0;
            total += a.weight;
        }
        for (ActiveAtom& a : active) a.weight /= total;
        for (const ActiveAtom& a : active) {
            if (a.weight <= 0.0) continue;
            sol.patterns.push_back(dict.family() == PatternFamily::Monotone
                                       ? Pattern::jumps(a.indices, n)
                                       : Pattern::knots(a.indices, n));
            sol.weights.push_back(a.weight);
            sol.dict_positions.push_back(a.dict_pos);
        }
        rebuild_mu();
        sol.estimate = Sequence(mu);
        double fit = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double d = mu[t] - yv[t];
            fit += d * d;
        }
        fit /= static_cast<double>(n);
        double obj = fit;
        for (const ActiveAtom& a : active) {
            if (a.weight <= 0.0) continue;
            double spread = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double d = mu[t] - a.g[t];
                spread += d * d;
            }
            spread /= static_cast<double>(n);
            obj += a.weight * (a.c + 0.5 * spread);
        }
        sol.objective_value = obj;
        return sol;
    };

    for (iter = 0; iter < cfg.max_iter; ++iter) {
        rebuild_mu();
        grads.resize(active.size());
        double avg = 0.0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            double dot = 0.0;
            for (std::size_t t = 0; t < n; ++t) dot += active[a].g[t] * mu[t];
            grads[a] = dot / static_cast<double>(n) - 1.5 * active[a].norm2_g + active[a].c;
            avg += active[a].weight * grads[a];
        }
        auto [best_val, best_key] = lmo(mu.data());
        gap = avg - best_val;
        if (cfg.trace) {
            double fit = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double d = mu[t] - yv[t];
                fit += d * d;
            }
            double obj = fit / static_cast<double>(n);
            for (std::size_t a = 0; a < active.size(); ++a) {
                double spread = 0.0;
                for (std::size_t t = 0; t < n; ++t) {
                    const double d = mu[t] - active[a].g[t];
                    spread += d * d;
                }
                obj += active[a].weight * (active[a].c + 0.5 * spread / static_cast<double>(n));
            }
            cfg.trace(iter, obj, gap);
        }
        if (gap <= cfg.tol) return finalize();

        std::size_t away = 0;
        for (std::size_t a = 1; a < active.size(); ++a)
            if (grads[a] > grads[away]) away = a;
        const double away_desc = grads[away] - avg;

        const bool forward = gap >= away_desc || active[away].weight >= 1.0 - 1e-15;
        if (forward) {
            const std::size_t s = add_atom(best_key);
            double nd = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double d = active[s].g[t] - mu[t];
                nd += d * d;
            }
            nd /= static_cast<double>(n);
            const double gamma = nd > 0.0 ? std::clamp(gap / nd, 0.0, 1.0) : 1.0;
            for (ActiveAtom& a : active) a.weight *= (1.0 - gamma);
            active[s].weight += gamma;
        } else {
            const double w = active[away].weight;
            const double gamma_max = w / (1.0 - w);
            double nd = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double d = mu[t] - active[away].g[t];
                nd += d * d;
            }
            nd /= static_cast<double>(n);
            const double gamma =
                nd > 0.0 ? std::min(away_desc / nd, gamma_max) : gamma_max;
            for (ActiveAtom& a : active) a.weight *= (1.0 + gamma);
            active[away].weight -= gamma;
        }
        // Prune and renormalize; keeps the simplex sum exact.
        std::vector<ActiveAtom> kept;
        kept.reserve(active.size());
        double total = 0.0;
        for (ActiveAtom& a : active) {
            if (a.weight > 1e-15) {
                total += a.weight;
                kept.push_back(std::move(a));
            }
        }
        active = std::move(kept);
        for (ActiveAtom& a : active) a.weight /= total;
    }
    QAggSolution partial = finalize();
    throw QAggConvergenceError("solve_qagg: iteration cap reached before the gap target",
                               std::move(partial), gap, iter);
}

QAggSolution qagg_estimate_monotone(const Sequence& y, double sigma, double tol) {
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, y.size(), DictionaryMode::exhaustive());
    QAggConfig cfg;
    cfg.tol = tol;
    return solve_qagg(y, sigma, dict, cfg);
}

QAggSolution qagg_estimate_convex(const Sequence& y, double sigma, double tol) {
    const Dictionary dict =
        Dictionary::build(PatternFamily::Convex, y.size(), DictionaryMode::exhaustive());
    QAggConfig cfg;
    cfg.tol = tol;
    return solve_qagg(y, sigma, dict, cfg);
}

}  // namespace shapeagg
