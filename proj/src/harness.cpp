#include "shapeagg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "shapeagg/estimators.hpp"
#include "shapeagg/io.hpp"
#include "shapeagg/packing.hpp"
#include "shapeagg/projections.hpp"
#include "shapeagg/rng.hpp"

namespace shapeagg {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    std::size_t b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::pair<std::string, std::map<std::string, std::string>> parse_callable(
    const std::string& text) {
    const std::string t = trim(text);
    const std::size_t open = t.find('(');
    if (open == std::string::npos) return {t, {}};
    if (t.back() != ')')
        throw std::invalid_argument("spec '" + text + "': missing closing parenthesis");
    std::map<std::string, std::string> params;
    const std::string inner = t.substr(open + 1, t.size() - open - 2);
    if (!trim(inner).empty()) {
        for (const std::string& part : split(inner, ',')) {
            const std::size_t eq = part.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("spec '" + text + "': expected key=value, got '" +
                                            part + "'");
            params[trim(part.substr(0, eq))] = trim(part.substr(eq + 1));
        }
    }
    return {trim(t.substr(0, open)), params};
}

}  // namespace

SignalSpec SignalSpec::parse(const std::string& text) {
    auto [name, params] = parse_callable(text);
    if (name.empty()) throw std::invalid_argument("signal spec: empty name");
    SignalSpec spec;
    spec.name = name;
    spec.params = std::move(params);
    return spec;
}

std::string SignalSpec::canonical() const {
    std::string out = name;
    if (!params.empty()) {
        out += "(";
        bool first = true;
        for (const auto& [k, v] : params) {
            if (!first) out += ",";
            out += k + "=" + v;
            first = false;
        }
        out += ")";
    }
    return out;
}

double SignalSpec::num(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : std::stod(it->second);
}

Sequence generate_signal(const SignalSpec& spec, std::size_t n) {
    if (n < 1) throw std::invalid_argument("generate_signal: n must be >= 1");
    std::vector<double> u(n, 0.0);
    if (spec.name == "constant") {
        const double c = spec.num("c", 0.0);
        std::fill(u.begin(), u.end(), c);
    } else if (spec.name == "staircase") {
        const int k = static_cast<int>(spec.num("k", 2));
        const double v = spec.num("V", 1.0);
        if (k < 1 || static_cast<std::size_t>(k) > n)
            throw std::invalid_argument("staircase: k out of range");
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t block = (i * static_cast<std::size_t>(k)) / n;
            u[i] = (k == 1) ? 0.0
                            : static_cast<double>(block) * v / static_cast<double>(k - 1);
        }
    } else if (spec.name == "linear") {
        const double v = spec.num("V", 1.0);
        for (std::size_t i = 0; i < n; ++i)
            u[i] = (n == 1) ? 0.0
                            : v * static_cast<double>(i) / static_cast<double>(n - 1);
    } else if (spec.name == "sqrt_ramp") {
        const double v = spec.num("V", 1.0);
        for (std::size_t i = 0; i < n; ++i)
            u[i] = (n == 1) ? 0.0
                            : v * std::sqrt(static_cast<double>(i) /
                                            static_cast<double>(n - 1));
    } else if (spec.name == "convex_kinks") {
        const int q = static_cast<int>(spec.num("q", 2));
        const double v = spec.num("V", 1.0);
        if (q < 1) throw std::invalid_argument("convex_kinks: q must be positive");
        if (q == 1) return generate_signal(SignalSpec::parse("linear(V=" + std::to_string(v) + ")"), n);
        if (!(v > 0.0)) throw std::invalid_argument("convex_kinks: V must be positive for q >= 2");
        if (n < static_cast<std::size_t>(q) + 1)
            throw std::invalid_argument("convex_kinks: need n >= q+1");
        // Increments grouped into q balanced runs with slopes 0, d, 2d, ...;
        // d scaled so the total rise is V. Exactly q-1 interior kinks.
        const std::size_t m = n - 1;
        double slope_sum = 0.0;
        for (std::size_t t = 0; t < m; ++t)
            slope_sum += static_cast<double>((t * static_cast<std::size_t>(q)) / m);
        const double d = v / slope_sum;
        double acc = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            const std::size_t group = ((i - 1) * static_cast<std::size_t>(q)) / m;
            acc += static_cast<double>(group) * d;
            u[i] = acc;
        }
    } else if (spec.name == "custom_csv") {
        auto it = spec.params.find("path");
        if (it == spec.params.end())
            throw std::invalid_argument("custom_csv: missing path parameter");
        Sequence s = read_sequence(it->second);
        if (s.size() != n)
            throw std::invalid_argument("custom_csv: file length does not match n");
        return s;
    } else {
        throw std::invalid_argument("generate_signal: unknown family '" + spec.name + "'");
    }
    return Sequence(std::move(u));
}

EstimatorSpec EstimatorSpec::parse(const std::string& text) {
    auto [name, params] = parse_callable(text);
    if (name.empty()) throw std::invalid_argument("estimator spec: empty name");
    EstimatorSpec spec;
    spec.name = name;
    spec.params = std::move(params);
    spec.raw = trim(text);
    return spec;
}

DictionaryMode parse_dictionary_mode(const std::string& text) {
    std::string t = trim(text);
    // maxcard=M is the documented spelling; ':' is accepted everywhere so the
    // value survives key=value parsing inside estimator specs.
    const std::size_t sep = t.find_first_of("=:");
    const std::string head = sep == std::string::npos ? t : t.substr(0, sep);
    const std::string rest = sep == std::string::npos ? "" : t.substr(sep + 1);
    if (head == "exhaustive" && rest.empty()) return DictionaryMode::exhaustive();
    if (head == "maxcard" && !rest.empty())
        return DictionaryMode::max_cardinality(std::stoi(rest));
    if (head == "sampled" && !rest.empty()) {
        const std::size_t colon = rest.find(':');
        if (colon != std::string::npos)
            return DictionaryMode::sampled(
                static_cast<std::size_t>(std::stoull(rest.substr(0, colon))),
                std::stoull(rest.substr(colon + 1)));
    }
    throw std::invalid_argument("dict mode '" + text +
                                "': expected exhaustive, maxcard=M or sampled=COUNT:SEED");
}

namespace {

// Shared dictionaries: replicates hit the same (family, n, mode) repeatedly.
std::map<std::string, std::shared_ptr<const Dictionary>> g_dict_cache;
std::shared_mutex g_dict_mutex;

std::shared_ptr<const Dictionary> cached_dictionary(PatternFamily family, std::size_t n,
                                                    const DictionaryMode& mode,
                                                    const std::string& mode_text) {
    const std::string key = (family == PatternFamily::Monotone ? "m|" : "c|") +
                            std::to_string(n) + "|" + mode_text;
    {
        std::shared_lock lock(g_dict_mutex);
        auto it = g_dict_cache.find(key);
        if (it != g_dict_cache.end()) return it->second;
    }
    auto dict = std::make_shared<const Dictionary>(Dictionary::build(family, n, mode));
    std::unique_lock lock(g_dict_mutex);
    return g_dict_cache.emplace(key, std::move(dict)).first->second;
}

double param_num(const std::map<std::string, std::string>& params, const std::string& key,
                 double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : std::stod(it->second);
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const std::string& part : split(text, ';'))
        if (!trim(part).empty()) out.push_back(std::stoi(trim(part)));
    return out;
}

}  // namespace

Estimator make_estimator(const EstimatorSpec& spec, double sigma, double delta) {
    const auto& p = spec.params;
    if (spec.name == "identity") return [](const Sequence& y) { return y; };
    if (spec.name == "mean") {
        return [](const Sequence& y) {
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y[i];
            return Sequence::constant(y.size(), s / static_cast<double>(y.size()));
        };
    }
    if (spec.name == "pava") return [](const Sequence& y) { return isotonic_ls(y); };
    if (spec.name == "convexls") {
        const double tol = param_num(p, "tol", 1e-9);
        return [tol](const Sequence& y) { return convex_ls(y, tol); };
    }
    if (spec.name == "tv") {
        auto rule = p.find("rule");
        if (rule == p.end() || rule->second == "explicit") {
            const double lambda = param_num(p, "lambda", 0.0);
            if (!(lambda > 0.0))
                throw std::invalid_argument("tv: explicit rule needs lambda > 0");
            return [lambda](const Sequence& y) { return tv_estimator(y, lambda); };
        }
        const double s = param_num(p, "sigma", sigma);
        const double d = param_num(p, "delta", delta);
        if (rule->second == "universal") {
            const TVTuning tuning = TVTuning::universal(s, d);
            return [tuning](const Sequence& y) { return tv_estimator(y, tuning); };
        }
        if (rule->second == "kstar") {
            const double v = param_num(p, "V", 0.0);
            if (!(v > 0.0)) throw std::invalid_argument("tv: kstar rule needs V > 0");
            const TVTuning tuning = TVTuning::adaptive_kstar(v, s, d);
            return [tuning](const Sequence& y) { return tv_estimator(y, tuning); };
        }
        throw std::invalid_argument("tv: unknown rule '" + rule->second + "'");
    }
    if (spec.name == "qagg" || spec.name == "qagg-convex") {
        const PatternFamily family =
            spec.name == "qagg" ? PatternFamily::Monotone : PatternFamily::Convex;
        auto it = p.find("dict");
        const std::string mode_text = it == p.end() ? "exhaustive" : it->second;
        const DictionaryMode mode = parse_dictionary_mode(mode_text);
        QAggConfig cfg;
        cfg.tol = param_num(p, "tol", 1e-7);
        cfg.max_iter = static_cast<long>(param_num(p, "maxiter", 100000));
        cfg.q_constant = param_num(p, "constant", 46.0);
        const double s = param_num(p, "sigma", sigma);
        return [family, mode, mode_text, cfg, s](const Sequence& y) {
            auto dict = cached_dictionary(family, y.size(), mode, mode_text);
            return solve_qagg(y, s, *dict, cfg).estimate;
        };
    }
    if (spec.name == "proj") {
        if (auto it = p.find("jumps"); it != p.end()) {
            const std::vector<int> idx = parse_int_list(it->second);
            return [idx](const Sequence& y) {
                return project_piecewise_constant(y, Pattern::jumps(idx, y.size()));
            };
        }
        if (auto it = p.find("knots"); it != p.end()) {
            const std::vector<int> idx = parse_int_list(it->second);
            return [idx](const Sequence& y) {
                return project_piecewise_linear(y, Pattern::knots(idx, y.size()));
            };
        }
        throw std::invalid_argument("proj: needs jumps=... or knots=...");
    }
    throw std::invalid_argument("unknown estimator '" + spec.name + "'");
}

namespace {

MonteCarloResult monte_carlo_core(const Estimator& estimator, const Sequence& mu, double sigma,
                                  int replicates, std::uint64_t master_seed, bool parallel) {
    if (replicates < 1) throw std::invalid_argument("monte_carlo_risk: replicates must be >= 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("monte_carlo_risk: sigma must be >= 0");
    const std::size_t n = mu.size();
    std::vector<double> losses(static_cast<std::size_t>(replicates),
                               std::numeric_limits<double>::quiet_NaN());
    std::vector<double> roots(losses);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (int r = 0; r < replicates; ++r) {
        CounterRng rng(master_seed, static_cast<std::uint64_t>(r));
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = mu[i] + sigma * rng.next_normal();
        try {
            const Sequence fit = estimator(Sequence(std::move(y)));
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = fit[i] - mu[i];
                loss += d * d;
            }
            loss /= static_cast<double>(n);
            losses[static_cast<std::size_t>(r)] = loss;
            roots[static_cast<std::size_t>(r)] = std::sqrt(loss);
        } catch (const std::exception&) {
            // left as NaN; tallied below
        }
    }
    (void)parallel;

    MonteCarloResult result;
    result.losses = losses;
    double sum = 0.0, sum_root = 0.0;
    std::size_t valid = 0;
    for (int r = 0; r < replicates; ++r) {
        const double l = losses[static_cast<std::size_t>(r)];
        if (std::isnan(l)) {
            ++result.failures;
            continue;
        }
        sum += l;
        sum_root += roots[static_cast<std::size_t>(r)];
        ++valid;
    }
    if (result.failures * 100 > static_cast<std::size_t>(replicates))
        throw std::runtime_error("monte_carlo_risk: more than 1% of replicates failed (" +
                                 std::to_string(result.failures) + "/" +
                                 std::to_string(replicates) + ")");
    result.mean_risk = sum / static_cast<double>(valid);
    result.mean_root_loss = sum_root / static_cast<double>(valid);
    double ss = 0.0;
    for (int r = 0; r < replicates; ++r) {
        const double l = losses[static_cast<std::size_t>(r)];
        if (std::isnan(l)) continue;
        const double d = l - result.mean_risk;
        ss += d * d;
    }
    result.stderr_risk =
        valid > 1 ? std::sqrt(ss / static_cast<double>(valid - 1) / static_cast<double>(valid))
                  : 0.0;
    return result;
}

}  // namespace

MonteCarloResult monte_carlo_risk(const Estimator& estimator, const Sequence& mu, double sigma,
                                  int replicates, std::uint64_t master_seed) {
    return monte_carlo_core(estimator, mu, sigma, replicates, master_seed, true);
}

MonteCarloResult monte_carlo_risk_serial(const Estimator& estimator, const Sequence& mu,
                                         double sigma, int replicates,
                                         std::uint64_t master_seed) {
    return monte_carlo_core(estimator, mu, sigma, replicates, master_seed, false);
}

ShapeClass parse_shape_class(const std::string& text) {
    // Accept both name(key=value) and the shorthand name(value).
    const std::string t = trim(text);
    std::string name = t;
    std::string inner;
    const std::size_t open = t.find('(');
    if (open != std::string::npos) {
        if (t.back() != ')')
            throw std::invalid_argument("shape class '" + text + "': missing ')'");
        name = trim(t.substr(0, open));
        inner = trim(t.substr(open + 1, t.size() - open - 2));
    }
    const auto single = [&](const char* key) -> double {
        std::string v = inner;
        const std::size_t eq = inner.find('=');
        if (eq != std::string::npos) {
            if (trim(inner.substr(0, eq)) != key)
                throw std::invalid_argument("shape class '" + text + "': expected " + key +
                                            "=...");
            v = trim(inner.substr(eq + 1));
        }
        if (v.empty())
            throw std::invalid_argument("shape class '" + text + "': missing parameter");
        return std::stod(v);
    };
    if (name == "monotone") return ShapeClass::monotone();
    if (name == "monotone_V") return ShapeClass::monotone_bounded(single("V"));
    if (name == "monotone_k") return ShapeClass::monotone_k_pieces(static_cast<int>(single("k")));
    if (name == "convex") return ShapeClass::convex();
    if (name == "convex_q") return ShapeClass::convex_q_pieces(static_cast<int>(single("q")));
    throw std::invalid_argument("unknown shape class '" + text + "'");
}

ClassApprox best_class_approx(const Sequence& mu, const ShapeClass& cls) {
    using Kind = ShapeClass::Kind;
    const std::size_t n = mu.size();
    if (is_member(mu, cls)) return {mu, 0.0, true};
    switch (cls.kind) {
        case Kind::Monotone: {
            Sequence iso = isotonic_ls(mu);
            const double d = scaled_norm_sq(Sequence([&] {
                std::vector<double> diff(n);
                for (std::size_t i = 0; i < n; ++i) diff[i] = iso[i] - mu[i];
                return diff;
            }()));
            return {std::move(iso), d, true};
        }
        case Kind::MonotoneKPieces: {
            const bool mono = detail::is_monotone(mu.values());
            const Sequence base = mono ? mu : isotonic_ls(mu);
            SegmentationTable table(base, cls.max_pieces);
            std::vector<double> cand = table.minimizer(cls.max_pieces);
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double e = cand[i] - mu[i];
                d += e * e;
            }
            // Block means of a monotone base are monotone, so the candidate is
            // feasible; optimal exactly when mu itself is monotone.
            return {Sequence(std::move(cand)), d / static_cast<double>(n), mono};
        }
        case Kind::MonotoneBoundedV: {
            Sequence iso = isotonic_ls(mu);
            if (total_variation(iso) <= cls.v_bound) {
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double e = iso[i] - mu[i];
                    d += e * e;
                }
                return {std::move(iso), d / static_cast<double>(n), true};
            }
            // Clip the isotonic fit to the best V-wide band: grid search plus
            // golden-section refinement. Upper bound only.
            const double lo = iso[0] - cls.v_bound, hi = iso[n - 1];
            const auto clip_err = [&](double a) {
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double c = std::clamp(iso[i], a, a + cls.v_bound);
                    const double e = c - mu[i];
                    d += e * e;
                }
                return d / static_cast<double>(n);
            };
            double best_a = lo, best_v = clip_err(lo);
            const int grid = 512;
            for (int g = 1; g <= grid; ++g) {
                const double a = lo + (hi - lo) * static_cast<double>(g) / grid;
                const double val = clip_err(a);
                if (val < best_v) {
                    best_v = val;
                    best_a = a;
                }
            }
            double a1 = best_a - (hi - lo) / grid, a2 = best_a + (hi - lo) / grid;
            for (int it = 0; it < 80; ++it) {
                const double m1 = a1 + (a2 - a1) / 3.0, m2 = a2 - (a2 - a1) / 3.0;
                if (clip_err(m1) < clip_err(m2)) a2 = m2; else a1 = m1;
            }
            const double a = 0.5 * (a1 + a2);
            const double final_a = clip_err(a) < best_v ? a : best_a;
            std::vector<double> cand(n);
            for (std::size_t i = 0; i < n; ++i)
                cand[i] = std::clamp(iso[i], final_a, final_a + cls.v_bound);
            return {Sequence(std::move(cand)), clip_err(final_a), false};
        }
        case Kind::Convex: {
            Sequence fit = convex_ls(mu);
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double e = fit[i] - mu[i];
                d += e * e;
            }
            return {std::move(fit), d / static_cast<double>(n), true};
        }
        case Kind::ConvexQPieces: {
            // Best convex piecewise-linear candidate among knot-set
            // projections; falls back to the cone projection. Upper bound.
            Sequence best = convex_ls(mu);
            double best_d = scaled_norm_sq(Sequence([&] {
                std::vector<double> diff(n);
                for (std::size_t i = 0; i < n; ++i) diff[i] = best[i] - mu[i];
                return diff;
            }()));
            bool found = count_knots_tol(best, 1e-9) <= cls.max_pieces;
            if (!found) best_d = std::numeric_limits<double>::infinity();
            if (n <= 18) {
                const int interior = static_cast<int>(n) - 2;
                const std::uint64_t total = std::uint64_t{1} << interior;
                for (std::uint64_t mask = 0; mask < total; ++mask) {
                    if (std::popcount(mask) + 1 > cls.max_pieces) continue;
                    std::vector<int> knots;
                    for (int b = 0; b < interior; ++b)
                        if (mask & (std::uint64_t{1} << b)) knots.push_back(b + 2);
                    const HingeBasis basis(n, knots);
                    std::vector<double> proj = basis.project(mu.values());
                    Sequence cand(proj);
                    if (!detail::is_convex(proj)) continue;
                    double d = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double e = proj[i] - mu[i];
                        d += e * e;
                    }
                    d /= static_cast<double>(n);
                    if (d < best_d) {
                        best_d = d;
                        best = std::move(cand);
                        found = true;
                    }
                }
            }
            if (!found) {
                Sequence fallback = convex_ls(mu);
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double e = fallback[i] - mu[i];
                    d += e * e;
                }
                return {std::move(fallback), d / static_cast<double>(n), false};
            }
            return {std::move(best), best_d, false};
        }
    }
    throw std::logic_error("best_class_approx: unreachable");
}

RegretResult empirical_regret(const Estimator& estimator, const Sequence& mu,
                              const ShapeClass& cls, double sigma, int replicates,
                              std::uint64_t seed) {
    const ClassApprox approx = best_class_approx(mu, cls);
    const MonteCarloResult mc = monte_carlo_risk(estimator, mu, sigma, replicates, seed);
    RegretResult out;
    out.approx_dist_sq = approx.dist_sq;
    out.approx_exact = approx.exact;
    out.r1 = mc.mean_root_loss - std::sqrt(approx.dist_sq);
    out.r2 = mc.mean_risk - approx.dist_sq;
    return out;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 points");
    double prev_n = 0.0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [n, risk] : points) {
        if (n <= prev_n) throw std::invalid_argument("fit_rate: n must be strictly increasing");
        prev_n = n;
        if (!(risk > 0.0)) throw std::invalid_argument("fit_rate: risks must be positive");
        const double x = std::log(n), y = std::log(risk);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    const double m = static_cast<double>(points.size());
    const double vxx = sxx - sx * sx / m;
    const double vxy = sxy - sx * sy / m;
    const double vyy = syy - sy * sy / m;
    RateFit fit;
    fit.slope = vxy / vxx;
    fit.intercept = (sy - fit.slope * sx) / m;
    fit.r_squared = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
    return fit;
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    ExperimentConfig config;
    config.signal = SignalSpec::parse("constant(c=0)");
    std::string section;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        // '#' starts a comment; ';' stays available as the in-spec list
        // separator (proj(jumps=16;32;48)).
        const std::size_t comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config: malformed section '" + line + "'");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section == "experiment" || section.empty()) {
            if (key == "signal") config.signal = SignalSpec::parse(value);
            else if (key == "n_grid") {
                config.n_grid.clear();
                for (const std::string& part : split(value, ','))
                    config.n_grid.push_back(std::stoull(trim(part)));
            } else if (key == "sigma") config.sigma = std::stod(value);
            else if (key == "replicates") config.replicates = std::stoi(value);
            else if (key == "master_seed") config.master_seed = std::stoull(value);
            else if (key == "threads") config.threads = std::stoi(value);
            else if (key == "output_dir") config.output_dir = value;
            else if (key == "delta") config.delta = std::stod(value);
            else throw std::invalid_argument("config: unknown key '" + key + "' in [experiment]");
        } else if (section == "estimators") {
            if (key == "est") config.estimators.push_back(value);
            else throw std::invalid_argument("config: unknown key '" + key + "' in [estimators]");
        } else if (section == "regret") {
            if (key == "class") config.regret_class = value;
            else if (key == "adversarial") config.adversarial = parse_bool(value);
            else throw std::invalid_argument("config: unknown key '" + key + "' in [regret]");
        } else if (section == "oracle") {
            if (key == "spec") config.oracle_spec = value;
            else if (key == "family") config.oracle_family = value;
            else throw std::invalid_argument("config: unknown key '" + key + "' in [oracle]");
        } else if (section == "report") {
            if (key == "plot") config.plot = parse_bool(value);
            else if (key == "timings") config.timings = parse_bool(value);
            else throw std::invalid_argument("config: unknown key '" + key + "' in [report]");
        } else {
            throw std::invalid_argument("config: unknown section '" + section + "'");
        }
    }
    if (config.n_grid.empty()) throw std::invalid_argument("config: n_grid is required");
    if (config.estimators.empty())
        throw std::invalid_argument("config: at least one estimator is required");
    if (config.replicates < 30)
        throw std::invalid_argument(
            "config: replicates must be >= 30 (reports publish standard errors)");
    return config;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

namespace {

BoundSpec parse_bound_spec(const std::string& text, const std::string& family) {
    const auto parts = split(text, ':');
    if (parts.size() != 3)
        throw std::invalid_argument("oracle spec '" + text + "': expected leading:penalty:exponent");
    const double leading = std::stod(parts[0]);
    const double penalty = std::stod(parts[1]);
    const double exponent = std::stod(parts[2]);
    if (family == "monotone") return BoundSpec::monotone(leading, penalty, exponent);
    if (family == "convex") return BoundSpec::convex(leading, penalty, exponent);
    throw std::invalid_argument("oracle family must be monotone or convex");
}

std::vector<std::pair<std::string, Sequence>> adversarial_grid(const ExperimentConfig& config,
                                                               std::size_t n) {
    std::vector<std::pair<std::string, Sequence>> grid;
    const Sequence base = generate_signal(config.signal, n);
    grid.emplace_back("signal", base);
    // Class member plus an alternating perturbation well outside the class.
    {
        std::vector<double> z(base.values());
        const double h = config.sigma * 0.5;
        for (std::size_t i = 0; i < n; ++i) z[i] += (i % 2 == 0 ? h : -h);
        grid.emplace_back("signal+zigzag", Sequence(std::move(z)));
    }
    const bool convex_family = config.oracle_family == "convex";
    if (!convex_family) {
        const double v = std::max(1.0, total_variation(base));
        KChoice choice = packing_k_choice(v, config.sigma, n);
        int k = std::clamp(choice.k, 2, 8);
        while (k > 2 &&
               static_cast<double>(k) * k * k > 16.0 * static_cast<double>(n) * v * v /
                                                     (config.sigma * config.sigma))
            --k;
        const PackingReport report = monotone_hypotheses(n, k, v, config.sigma, 7);
        for (std::size_t h = 0; h < std::min<std::size_t>(3, report.hypotheses.size()); ++h)
            grid.emplace_back("packing-" + std::to_string(h), report.hypotheses[h]);
    } else {
        const int q = static_cast<int>(std::min<std::size_t>(4, n / 2));
        if (q >= 2) {
            const PackingReport report = convex_hypotheses(n, q, config.sigma, 7);
            for (std::size_t h = 0; h < std::min<std::size_t>(3, report.hypotheses.size()); ++h)
                grid.emplace_back("packing-" + std::to_string(h), report.hypotheses[h]);
        }
    }
    return grid;
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? format_double(*v) : "na";
}

}  // namespace

RiskReport run_experiment(const ExperimentConfig& config) {
#ifdef _OPENMP
    if (config.threads > 0) omp_set_num_threads(config.threads);
#endif
    if (config.replicates < 30)
        throw std::invalid_argument(
            "run_experiment: replicates must be >= 30 (reports publish standard errors)");
    RiskReport report;
    report.config = config;

    std::optional<ShapeClass> regret_class;
    if (config.regret_class) regret_class = parse_shape_class(*config.regret_class);
    std::optional<BoundSpec> bound;
    if (config.oracle_spec) bound = parse_bound_spec(*config.oracle_spec, config.oracle_family);

    for (const std::string& est_text : config.estimators) {
        const EstimatorSpec spec = EstimatorSpec::parse(est_text);
        const Estimator estimator = make_estimator(spec, config.sigma, config.delta);
        for (std::size_t n : config.n_grid) {
            std::vector<std::pair<std::string, Sequence>> cells;
            if (config.adversarial) {
                cells = adversarial_grid(config, n);
            } else {
                cells.emplace_back("signal", generate_signal(config.signal, n));
            }
            for (const auto& [label, mu] : cells) {
                const auto t0 = std::chrono::steady_clock::now();
                const MonteCarloResult mc = monte_carlo_risk(estimator, mu, config.sigma,
                                                             config.replicates,
                                                             config.master_seed);
                const auto t1 = std::chrono::steady_clock::now();
                RiskRow row;
                row.estimator = spec.raw;
                row.signal_label = label;
                row.n = n;
                row.sigma = config.sigma;
                row.replicates = config.replicates;
                row.mean_risk = mc.mean_risk;
                row.stderr_risk = mc.stderr_risk;
                row.seed = config.master_seed;
                row.failures = mc.failures;
                if (regret_class) {
                    const ClassApprox approx = best_class_approx(mu, *regret_class);
                    row.regret_r1 = mc.mean_root_loss - std::sqrt(approx.dist_sq);
                    row.regret_r2 = mc.mean_risk - approx.dist_sq;
                }
                if (bound) {
                    row.oracle_rhs =
                        bound->family == BoundSpec::Family::Monotone
                            ? oracle_rhs_monotone(mu, config.sigma, *bound)
                            : oracle_rhs_convex(mu, config.sigma, *bound,
                                                mu.size() <= 18 ? ConvexOracleSearch::Exhaustive
                                                                : ConvexOracleSearch::Greedy,
                                                std::min<int>(8, static_cast<int>(mu.size()) - 2));
                }
                if (config.timings)
                    row.runtime_ms =
                        std::chrono::duration<double, std::milli>(t1 - t0).count();
                report.rows.push_back(std::move(row));
            }
        }
    }

    if (config.adversarial) {
        // One synthetic max row per estimator: the adversarial-grid maximum of
        // the regret (a lower bound on the maximal regret, never labeled minimax).
        std::vector<RiskRow> max_rows;
        for (const std::string& est_text : config.estimators) {
            const EstimatorSpec spec = EstimatorSpec::parse(est_text);
            for (std::size_t n : config.n_grid) {
                const RiskRow* best = nullptr;
                for (const RiskRow& row : report.rows) {
                    if (row.estimator != spec.raw || row.n != n || !row.regret_r2) continue;
                    if (!best || *row.regret_r2 > *best->regret_r2) best = &row;
                }
                if (best) {
                    RiskRow row = *best;
                    row.signal_label = "adversarial-grid max";
                    max_rows.push_back(std::move(row));
                }
            }
        }
        for (RiskRow& row : max_rows) report.rows.push_back(std::move(row));
    }

    for (const std::string& est_text : config.estimators) {
        const std::string raw = EstimatorSpec::parse(est_text).raw;
        std::vector<std::pair<double, double>> points;
        for (const RiskRow& row : report.rows) {
            if (row.estimator == raw && row.signal_label == "signal" && row.mean_risk > 0.0)
                points.emplace_back(static_cast<double>(row.n), row.mean_risk);
        }
        if (points.size() >= 3) {
            try {
                report.rate_fits.emplace_back(raw, fit_rate(points));
            } catch (const std::invalid_argument&) {
                // non-increasing or degenerate grid: report without a fit
            }
        }
    }

    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    write_report_csv(report, (fs::path(config.output_dir) / "report.csv").string());
    write_report_json(report, (fs::path(config.output_dir) / "report.json").string());
    if (config.plot)
        write_report_svg(report, (fs::path(config.output_dir) / "plot.svg").string());
    if (config.timings) {
        std::ofstream out(fs::path(config.output_dir) / "timings.csv");
        out << "estimator,signal,n,runtime_ms\n";
        for (const RiskRow& row : report.rows)
            out << row.estimator << "," << row.signal_label << "," << row.n << ","
                << opt_cell(row.runtime_ms) << "\n";
    }
    return report;
}

void write_report_csv(const RiskReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "estimator,n,sigma,replicates,mean_risk,stderr,regret_r1,regret_r2,oracle_rhs,"
           "runtime_ms,seed\n";
    for (const RiskRow& row : report.rows) {
        std::string name = row.estimator;
        if (row.signal_label != "signal") name += "|mu=" + row.signal_label;
        out << name << "," << row.n << "," << format_double(row.sigma) << ","
            << row.replicates << "," << format_double(row.mean_risk) << ","
            << format_double(row.stderr_risk) << "," << opt_cell(row.regret_r1) << ","
            << opt_cell(row.regret_r2) << "," << opt_cell(row.oracle_rhs) << ","
            << opt_cell(row.runtime_ms) << "," << row.seed << "\n";
    }
}

void write_report_json(const RiskReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    j["schema_version"] = report.schema_version;
    j["config"] = {
        {"signal", report.config.signal.canonical()},
        {"n_grid", report.config.n_grid},
        {"sigma", report.config.sigma},
        {"replicates", report.config.replicates},
        {"master_seed", report.config.master_seed},
        {"estimators", report.config.estimators},
        {"delta", report.config.delta},
        {"adversarial", report.config.adversarial},
    };
    if (report.config.regret_class) j["config"]["regret_class"] = *report.config.regret_class;
    if (report.config.oracle_spec) {
        j["config"]["oracle_spec"] = *report.config.oracle_spec;
        j["config"]["oracle_family"] = report.config.oracle_family;
    }
    j["rows"] = nlohmann::ordered_json::array();
    for (const RiskRow& row : report.rows) {
        nlohmann::ordered_json r{
            {"estimator", row.estimator}, {"signal", row.signal_label},
            {"n", row.n},                 {"sigma", row.sigma},
            {"replicates", row.replicates}, {"mean_risk", row.mean_risk},
            {"stderr", row.stderr_risk},  {"seed", row.seed},
            {"failures", row.failures},
        };
        if (row.regret_r1) r["regret_r1"] = *row.regret_r1;
        if (row.regret_r2) r["regret_r2"] = *row.regret_r2;
        if (row.oracle_rhs) r["oracle_rhs"] = *row.oracle_rhs;
        j["rows"].push_back(std::move(r));
    }
    j["rate_fits"] = nlohmann::ordered_json::array();
    for (const auto& [name, fit] : report.rate_fits) {
        j["rate_fits"].push_back({{"estimator", name},
                                  {"slope", fit.slope},
                                  {"intercept", fit.intercept},
                                  {"r_squared", fit.r_squared}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

void write_report_svg(const RiskReport& report, const std::string& path) {
    // Log-log risk vs n, one polyline per estimator, slope annotation from the
    // rate fit when available.
    const double width = 640, height = 480, margin = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const RiskRow& row : report.rows) {
        if (row.signal_label != "signal" || !(row.mean_risk > 0.0)) continue;
        const double x = std::log10(static_cast<double>(row.n));
        const double y = std::log10(row.mean_risk);
        xmin = std::min(xmin, x); xmax = std::max(xmax, x);
        ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
    if (xmax <= xmin) { xmin -= 0.5; xmax += 0.5; }
    if (ymax <= ymin) { ymin -= 0.5; ymax += 0.5; }
    const auto px = [&](double x) {
        return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
    };
    const auto py = [&](double y) {
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
    };
    const char* palette[] = {"#1b6ca8", "#c23b22", "#2e8540", "#8031a7",
                             "#b8860b", "#00747a", "#888888"};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 15
        << "\" text-anchor=\"middle\" font-size=\"13\">log10 n</text>\n";
    out << "<text x=\"18\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
        << height / 2 << ")\">log10 risk</text>\n";
    std::size_t color = 0;
    std::vector<std::string> seen;
    for (const std::string& est_text : report.config.estimators) {
        const std::string raw = EstimatorSpec::parse(est_text).raw;
        std::string points;
        for (const RiskRow& row : report.rows) {
            if (row.estimator != raw || row.signal_label != "signal" || !(row.mean_risk > 0.0))
                continue;
            points += format_double(px(std::log10(static_cast<double>(row.n)))) + "," +
                      format_double(py(std::log10(row.mean_risk))) + " ";
        }
        if (points.empty()) continue;
        const char* col = palette[color % 7];
        out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\""
            << points << "\"/>\n";
        std::string label = raw;
        for (const auto& [name, fit] : report.rate_fits)
            if (name == raw) label += " slope=" + format_double(fit.slope);
        out << "<text x=\"" << width - margin << "\" y=\"" << margin + 16 * (color + 1)
            << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << col << "\">" << label
            << "</text>\n";
        ++color;
        seen.push_back(raw);
    }
    out << "</svg>\n";
}

}  // namespace shapeagg
