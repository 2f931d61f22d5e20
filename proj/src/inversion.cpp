#include "mqcsim/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "mqcsim/error.hpp"

namespace mqcsim {

std::vector<double> log_size_grid(double s_min, double s_max, int n) {
    if (!(s_min > 0.0) || !(s_max > s_min) || n < 2) throw InvalidArgument("size grid needs 0 < s_min < s_max and n >= 2");
    std::vector<double> s(static_cast<std::size_t>(n));
    const double a = std::log(s_min), b = std::log(s_max);
    for (int j = 0; j < n; ++j) s[static_cast<std::size_t>(j)] = std::exp(a + (b - a) * j / (n - 1));
    s.front() = s_min;
    s.back() = s_max;
    return s;
}

KernelProblem KernelProblem::make(std::vector<int> orders, std::vector<double> data, double noise_estimate,
                                  std::vector<double> size_grid) {
    if (orders.size() != data.size()) throw DimensionMismatch("orders and data differ in length");
    if (orders.empty()) throw InvalidArgument("kernel problem needs at least one order");
    for (std::size_t i = 0; i < orders.size(); ++i) {
        if (orders[i] < 0 || orders[i] % 2 != 0) throw InvalidArgument(fmt::format("order {} is not even and >= 0", orders[i]));
        if (i > 0 && orders[i] <= orders[i - 1]) throw InvalidArgument("orders must be strictly increasing");
        if (!std::isfinite(data[i])) throw InvalidArgument("data must be finite");
    }
    if (size_grid.size() < 8) throw InvalidArgument("size grid needs at least 8 points");
    for (std::size_t j = 0; j < size_grid.size(); ++j) {
        if (!(size_grid[j] > 0.0)) throw InvalidArgument("size grid must be positive");
        if (j > 0 && !(size_grid[j] > size_grid[j - 1])) throw InvalidArgument("size grid must be strictly increasing");
    }
    KernelProblem p;
    p.kernel.resize(static_cast<Eigen::Index>(orders.size()), static_cast<Eigen::Index>(size_grid.size()));
    for (std::size_t i = 0; i < orders.size(); ++i) {
        const double k2 = static_cast<double>(orders[i]) * orders[i];
        for (std::size_t j = 0; j < size_grid.size(); ++j)
            p.kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-k2 / size_grid[j]);
    }
    p.data = Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
    p.orders = std::move(orders);
    p.size_grid = std::move(size_grid);
    p.noise_estimate = noise_estimate;
    return p;
}

KernelProblem problem_from_spectrum(const CoherenceSpectrum& spectrum, double noise_estimate,
                                    std::vector<double> size_grid) {
    std::vector<int> orders;
    std::vector<double> data;
    for (int k = 0; k <= spectrum.max_order(); k += 2) {
        orders.push_back(k);
        const bool pos = std::find(spectrum.orders.begin(), spectrum.orders.end(), k) != spectrum.orders.end();
        const bool neg = std::find(spectrum.orders.begin(), spectrum.orders.end(), -k) != spectrum.orders.end();
        // Half spectra (k >= 0 only) are taken as they are.
        data.push_back(k > 0 && pos && neg ? 0.5 * (spectrum.weight(k) + spectrum.weight(-k))
                                           : spectrum.weight(k) + spectrum.weight(-k) * (k > 0 ? 1.0 : 0.0));
    }
    return KernelProblem::make(std::move(orders), std::move(data), noise_estimate, std::move(size_grid));
}

std::string to_string(AlphaRule rule) {
    switch (rule) {
        case AlphaRule::Fixed: return "fixed";
        case AlphaRule::Discrepancy: return "discrepancy";
        case AlphaRule::LCurve: return "lcurve";
        case AlphaRule::RiskEstimate: return "risk";
    }
    return "discrepancy";
}

AlphaRule alpha_rule_from_string(const std::string& name) {
    if (name == "fixed") return AlphaRule::Fixed;
    if (name == "discrepancy") return AlphaRule::Discrepancy;
    if (name == "lcurve") return AlphaRule::LCurve;
    if (name == "risk") return AlphaRule::RiskEstimate;
    throw InvalidArgument(fmt::format("unknown alpha rule '{}'", name));
}

double ClusterDistribution::total() const { return std::accumulate(f.begin(), f.end(), 0.0); }

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
    const Eigen::Index n = a.cols();
    if (a.rows() != b.size()) throw DimensionMismatch("nnls: A and b differ in rows");
    if (max_iterations <= 0) max_iterations = static_cast<int>(30 * n);
    const double tol = 10 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().colwise().sum().maxCoeff() *
                       static_cast<double>(std::max(a.rows(), n));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    Eigen::VectorXd w = a.transpose() * (b - a * x);

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
        Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) ap.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
        const Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
        z.setZero(n);
        for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = zp(static_cast<Eigen::Index>(c));
    };

    int iterations = 0;
    while (true) {
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        Eigen::VectorXd z;
        while (true) {
            if (++iterations > max_iterations)
                throw NonConvergence("nnls did not converge", (b - a * x).norm());
            solve_passive(z);
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
            if (feasible) break;
            // Step back towards x until the first passive variable hits zero.
            double step = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) step = std::min(step, x(j) / (x(j) - z(j)));
            }
            x += step * (z - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && std::abs(x(j)) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
        x = z;
        w = a.transpose() * (b - a * x);
    }
    return x;
}

Eigen::MatrixXd second_difference(int n) {
    if (n < 3) throw InvalidArgument("second difference needs at least 3 points");
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n - 2, n);
    for (int i = 0; i < n - 2; ++i) {
        l(i, i) = 1.0;
        l(i, i + 1) = -2.0;
        l(i, i + 2) = 1.0;
    }
    return l;
}

namespace {

ClusterDistribution solve_at(const KernelProblem& p, const Eigen::VectorXd& d, const Eigen::MatrixXd& l, double alpha) {
    const Eigen::Index m = p.kernel.rows(), n = p.kernel.cols();
    Eigen::MatrixXd a(m + l.rows(), n);
    a << p.kernel, alpha * l;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + l.rows());
    b.head(m) = d;
    const Eigen::VectorXd f = nnls(a, b);
    ClusterDistribution out;
    out.size_grid = p.size_grid;
    out.f.assign(f.data(), f.data() + f.size());
    out.alpha = alpha;
    out.residual_norm = (p.kernel * f - d).norm();
    out.roughness = (l * f).norm();
    return out;
}

// Menger curvature of three points.
double curvature(double x1, double y1, double x2, double y2, double x3, double y3) {
    const double a = std::hypot(x2 - x1, y2 - y1), b = std::hypot(x3 - x2, y3 - y2), c = std::hypot(x3 - x1, y3 - y1);
    const double area2 = (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1);
    const double denom = a * b * c;
    return denom > 0.0 ? 2.0 * area2 / denom : 0.0;
}

void check_condition(const KernelProblem& p, double limit, std::vector<std::string>& warnings) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.kernel);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    const bool underdetermined = p.kernel.rows() < p.kernel.cols();
    if (cond > limit || underdetermined) {
        warnings.push_back(fmt::format("IllConditioned: unregularized kernel condition number {:.3g}{}", cond,
                                       underdetermined ? " (fewer orders than grid points)" : ""));
    }
}

}  // namespace

ClusterDistribution invert_fixed(const KernelProblem& problem, double alpha) {
    if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
    const Eigen::VectorXd& d = problem.data;
    if (!(d.maxCoeff() > 0.0)) throw NoFeasibleSolution("data have no positive value");
    return solve_at(problem, d, second_difference(static_cast<int>(problem.size_grid.size())), alpha);
}

ClusterDistribution invert(const KernelProblem& problem, const InversionOptions& options) {
    const Eigen::VectorXd& d = problem.data;
    if (!(d.maxCoeff() > 0.0)) throw NoFeasibleSolution("data have no positive value");
    const Eigen::MatrixXd l = second_difference(static_cast<int>(problem.size_grid.size()));
    std::vector<std::string> warnings;
    check_condition(problem, options.condition_warning, warnings);

    AlphaRule rule = options.rule;
    if ((rule == AlphaRule::Discrepancy || rule == AlphaRule::RiskEstimate) && !(problem.noise_estimate > 0.0)) {
        rule = AlphaRule::LCurve;
        warnings.push_back("no noise estimate; alpha chosen by the L-curve corner");
    }

    ClusterDistribution out;
    const double lo = std::log(options.alpha_min), hi = std::log(options.alpha_max);
    switch (rule) {
        case AlphaRule::Fixed: out = solve_at(problem, d, l, options.alpha); break;
        case AlphaRule::Discrepancy: {
            const double target = problem.noise_estimate * std::sqrt(static_cast<double>(d.size()));
            if (problem.data.norm() <= target) {
                // The zero distribution already explains the data to within the noise.
                out.size_grid = problem.size_grid;
                out.f.assign(problem.size_grid.size(), 0.0);
                out.alpha = options.alpha_max;
                out.residual_norm = d.norm();
                warnings.push_back("data within the noise level; returning f = 0");
                break;
            }
            ClusterDistribution low = solve_at(problem, d, l, options.alpha_min);
            if (low.residual_norm >= target) {
                out = low;
                warnings.push_back("discrepancy target not reached at alpha_min");
                break;
            }
            ClusterDistribution high = solve_at(problem, d, l, options.alpha_max);
            if (high.residual_norm <= target) {
                out = high;
                break;
            }
            // Largest alpha whose residual stays within the target.
            double a = lo, b = hi;
            out = low;
            for (int it = 0; it < 50 && b - a > 1e-3; ++it) {
                const double mid = 0.5 * (a + b);
                ClusterDistribution trial = solve_at(problem, d, l, std::exp(mid));
                if (trial.residual_norm <= target) {
                    a = mid;
                    out = std::move(trial);
                } else {
                    b = mid;
                }
            }
            break;
        }
        case AlphaRule::RiskEstimate: {
            constexpr int kPoints = 81;
            const double s2 = problem.noise_estimate * problem.noise_estimate;
            const double m = static_cast<double>(d.size());
            const Eigen::Index rows = problem.kernel.rows();
            Eigen::MatrixXd stacked(rows + l.rows(), l.cols());
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < kPoints; ++i) {
                const double alpha = std::exp(lo + (hi - lo) * i / (kPoints - 1));
                // trace K (K^T K + alpha^2 L^T L)^-1 K^T from the left singular
                // vectors of [K; alpha L]; the normal equations lose it at small alpha.
                stacked << problem.kernel, alpha * l;
                const Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinU);
                const double df = svd.matrixU().topRows(rows).squaredNorm();
                ClusterDistribution trial = solve_at(problem, d, l, alpha);
                const double risk = trial.residual_norm * trial.residual_norm + 2 * s2 * df - m * s2;
                if (risk < best) {
                    best = risk;
                    out = std::move(trial);
                }
            }
            break;
        }
        case AlphaRule::LCurve: {
            constexpr int kPoints = 41;
            std::vector<ClusterDistribution> sols;
            std::vector<double> x, y;
            for (int i = 0; i < kPoints; ++i) {
                sols.push_back(solve_at(problem, d, l, std::exp(lo + (hi - lo) * i / (kPoints - 1))));
                x.push_back(std::log(std::max(sols.back().residual_norm, 1e-300)));
                y.push_back(std::log(std::max(sols.back().roughness, 1e-300)));
            }
            std::size_t best = kPoints / 2;
            double best_kappa = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 1; i + 1 < sols.size(); ++i) {
                const double kappa = curvature(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1]);
                if (kappa > best_kappa) {
                    best_kappa = kappa;
                    best = i;
                }
            }
            out = std::move(sols[best]);
            break;
        }
    }
    out.warnings.insert(out.warnings.begin(), warnings.begin(), warnings.end());
    return out;
}

double cumulative_front(const std::vector<double>& s, const std::vector<double>& f, double fraction) {
    if (s.size() != f.size() || s.empty()) throw DimensionMismatch("grid and weights differ in length");
    const double total = std::accumulate(f.begin(), f.end(), 0.0);
    if (!(total > 0.0)) throw NoPeaks("distribution has no mass");
    double prev = 0.0;
    double cum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        cum += f[i] / total;
        if (cum >= fraction) {
            if (i == 0) return s[0];
            return s[i - 1] + (fraction - prev) / (cum - prev) * (s[i] - s[i - 1]);
        }
        prev = cum;
    }
    return s.back();
}

DistributionAnalytics analyze(const ClusterDistribution& dist, const AnalyzeOptions& options) {
    const auto& f = dist.f;
    const auto& s = dist.size_grid;
    const std::size_t n = f.size();
    if (n != s.size() || n < 3) throw DimensionMismatch("distribution grid and weights differ in length");
    const double fmax = *std::max_element(f.begin(), f.end());
    if (!(fmax > 0.0)) throw NoPeaks("distribution is identically zero");

    // Local maxima (first index of a flat top) and their prominence.
    std::vector<std::size_t> maxima;
    for (std::size_t i = 0; i < n; ++i) {
        if (f[i] <= 0.0 || (i > 0 && f[i] <= f[i - 1])) continue;
        std::size_t j = i;
        while (j + 1 < n && f[j + 1] == f[i]) ++j;
        if (j + 1 < n && f[j + 1] > f[i]) continue;
        maxima.push_back(i);
    }
    std::vector<std::size_t> peaks;
    for (std::size_t i : maxima) {
        double left_min = f[i], right_min = f[i];
        for (std::size_t j = i; j-- > 0 && f[j] <= f[i];) left_min = std::min(left_min, f[j]);
        for (std::size_t j = i + 1; j < n && f[j] <= f[i]; ++j) right_min = std::min(right_min, f[j]);
        // A side that meets a higher value bounds the base; a side that runs
        // to the edge counts its own minimum.
        const double prominence = f[i] - std::max(left_min, right_min);
        if (prominence >= options.prominence * fmax) peaks.push_back(i);
    }
    if (peaks.empty()) throw NoPeaks("no maximum passes the prominence threshold");

    DistributionAnalytics out;
    out.total_mass = dist.total();
    const double h = n > 1 ? std::log(s[1] / s[0]) : 0.0;

    // Valleys between consecutive peaks.
    std::vector<std::size_t> valleys;
    for (std::size_t p = 0; p + 1 < peaks.size(); ++p) {
        std::size_t v = peaks[p];
        for (std::size_t j = peaks[p]; j <= peaks[p + 1]; ++j)
            if (f[j] < f[v]) v = j;
        valleys.push_back(v);
    }

    for (std::size_t p = 0; p < peaks.size(); ++p) {
        const std::size_t i = peaks[p];
        Peak pk;
        pk.index = i;
        pk.s = s[i];
        pk.height = f[i];
        if (i > 0 && i + 1 < n) {
            const double fl = f[i - 1], fc = f[i], fr = f[i + 1];
            const double denom = fl - 2 * fc + fr;
            if (denom < 0.0) {
                const double delta = std::clamp(0.5 * (fl - fr) / denom, -0.5, 0.5);
                pk.s = std::exp(std::log(s[i]) + delta * h);
                pk.height = fc - 0.25 * (fl - fr) * delta;
            }
        }
        const double half = pk.height / 2;
        std::size_t j = i;
        while (j > 0 && f[j - 1] >= half) --j;
        pk.s_left = j == 0 ? s[0] : s[j - 1] + (half - f[j - 1]) / (f[j] - f[j - 1]) * (s[j] - s[j - 1]);
        j = i;
        while (j + 1 < n && f[j + 1] >= half) ++j;
        pk.s_right = j + 1 == n ? s[n - 1] : s[j] + (f[j] - half) / (f[j] - f[j + 1]) * (s[j + 1] - s[j]);
        pk.fwhm = pk.s_right - pk.s_left;

        // Mass between the surrounding valleys; a valley point is shared.
        const std::size_t a = p == 0 ? 0 : valleys[p - 1];
        const std::size_t b = p + 1 == peaks.size() ? n - 1 : valleys[p];
        double mass = 0.0;
        for (std::size_t k = a; k <= b; ++k) {
            const bool shared = (p > 0 && k == a) || (p + 1 < peaks.size() && k == b);
            mass += shared ? 0.5 * f[k] : f[k];
        }
        pk.population = mass;
        out.peaks.push_back(pk);
    }
    out.front_97 = cumulative_front(s, f, options.front_fraction);
    out.dispersion = out.peaks.back().fwhm;
    return out;
}

PowerLawFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y,
                          std::optional<double> forced_exponent) {
    if (t.size() != y.size()) throw DimensionMismatch("times and values differ in length");
    if (t.size() < 4) throw InvalidArgument("power-law fit needs at least 4 points");
    const auto n = static_cast<Eigen::Index>(t.size());
    Eigen::VectorXd x(n), v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        if (!(t[ii] > 0.0) || !(y[ii] > 0.0))
            throw NonPositiveData(fmt::format("point {} is not positive (t = {}, y = {})", i, t[ii], y[ii]));
        x(i) = std::log(t[ii]);
        v(i) = std::log(y[ii]);
    }
    const double xm = x.mean(), vm = v.mean();
    const double sxx = (x.array() - xm).square().sum();
    if (!(sxx > 0.0)) throw InvalidArgument("power-law fit needs at least two distinct times");
    PowerLawFit out;
    out.exponent = ((x.array() - xm) * (v.array() - vm)).sum() / sxx;
    const double intercept = vm - out.exponent * xm;
    out.prefactor = std::exp(intercept);
    const Eigen::VectorXd r = v.array() - intercept - out.exponent * x.array();
    const double sst = (v.array() - vm).square().sum();
    out.r2 = sst > 0.0 ? 1.0 - r.squaredNorm() / sst : 1.0;
    out.rms_log_residual = std::sqrt(r.squaredNorm() / static_cast<double>(n));
    if (forced_exponent) {
        out.forced_exponent = forced_exponent;
        const double c = (v.array() - *forced_exponent * x.array()).mean();
        out.forced_prefactor = std::exp(c);
        const Eigen::VectorXd rf = v.array() - c - *forced_exponent * x.array();
        out.forced_rms_log_residual = std::sqrt(rf.squaredNorm() / static_cast<double>(n));
    }
    return out;
}

GaussianBaseline gaussian_fit_baseline(const KernelProblem& problem) {
    const Eigen::VectorXd& d = problem.data;
    if (!d.allFinite() || !(d.cwiseAbs().maxCoeff() > 0.0)) throw FitFailure("Gaussian baseline: data are zero");
    Eigen::VectorXd k2(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) k2(i) = static_cast<double>(problem.orders[static_cast<std::size_t>(i)]) * problem.orders[static_cast<std::size_t>(i)];

    GaussianBaseline out;
    double tail = 0.0, head = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) (k2(i) > 0.0 ? tail : head) += std::abs(d(i));
    if (tail <= 1e-14 * std::max(head, 1e-300)) {
        out.degenerate = true;
        out.amplitude = head;
        out.s_single = 0.0;
        out.residual = 0.0;
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (k2(i) > 0.0) out.residual += d(i) * d(i);
        out.residual = std::sqrt(out.residual);
        return out;
    }

    auto eval = [&](double u, double& amp) {
        const Eigen::VectorXd g = (-k2.array() * std::exp(-u)).exp();
        amp = std::max(0.0, g.dot(d) / g.squaredNorm());
        return (d - amp * g).norm();
    };
    // Coarse scan in log s, then golden-section refinement around the best.
    const double lo = std::log(1e-2), hi = std::log(1e8);
    constexpr int kScan = 400;
    double best_u = lo, amp = 0.0, best_r = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kScan; ++i) {
        const double u = lo + (hi - lo) * i / kScan;
        const double r = eval(u, amp);
        if (r < best_r) {
            best_r = r;
            best_u = u;
        }
    }
    const double step = (hi - lo) / kScan;
    double a = best_u - step, b = best_u + step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), e = a + g * (b - a);
    double fc = eval(c, amp), fe = eval(e, amp);
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        if (fc < fe) {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = eval(c, amp);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = eval(e, amp);
        }
    }
    double u = 0.5 * (a + b);
    out.residual = eval(u, amp);
    if (out.residual > best_r) {
        u = best_u;
        out.residual = eval(u, amp);
    }
    out.amplitude = amp;
    out.s_single = std::exp(u);
    if (!std::isfinite(out.residual) || !(amp > 0.0)) throw FitFailure("Gaussian baseline fit failed");
    return out;
}

GaussianBaseline gaussian_fit_baseline(const CoherenceSpectrum& spectrum) {
    return gaussian_fit_baseline(problem_from_spectrum(spectrum, 0.0));
}

double mixture_second_moment(const ClusterDistribution& dist) {
    double m2 = 0.0;
    for (std::size_t j = 0; j < dist.f.size(); ++j) {
        if (dist.f[j] == 0.0) continue;
        const double s = dist.size_grid[j];
        double mass = 1.0;
        for (int k = 2;; k += 2) {
            const double term = std::exp(-static_cast<double>(k) * k / s);
            mass += 2.0 * term;
            if (term < 1e-17) break;
        }
        m2 += dist.f[j] * mass * s / 2.0;
    }
    return m2;
}

double spectrum_second_moment(const KernelProblem& problem) {
    double m2 = 0.0;
    for (std::size_t i = 0; i < problem.orders.size(); ++i) {
        const double k = problem.orders[i];
        m2 += 2.0 * k * k * problem.data(static_cast<Eigen::Index>(i));
    }
    return m2;
}

}  // namespace mqcsim
