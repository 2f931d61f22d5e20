#include "mqcsim/ddprobe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "mqcsim/error.hpp"
#include "mqcsim/evolution.hpp"
#include "mqcsim/operators.hpp"

namespace mqcsim {

std::string to_string(DdDetection detection) {
    return detection == DdDetection::Ix ? "ix" : "magnitude";
}

DdDetection dd_detection_from_string(const std::string& name) {
    if (name == "ix") return DdDetection::Ix;
    if (name == "magnitude") return DdDetection::Magnitude;
    throw InvalidArgument(fmt::format("unknown detection mode '{}'", name));
}

void DdConfig::validate() const {
    if (!(tau > 0.0)) throw InvalidArgument(fmt::format("tau must be positive, got {}", tau));
    if (!(theta > 0.0 && theta <= std::numbers::pi + 1e-12))
        throw InvalidArgument(fmt::format("theta must lie in (0, pi], got {}", theta));
    if (n_cycles < 1) throw InvalidArgument("n_cycles must be at least 1");
    if (transient_skip < 0) throw InvalidArgument("transient_skip must be non-negative");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be non-negative");
    if (n_scans < 1) throw InvalidArgument("n_scans must be at least 1");
}

double DdConfig::effective_sigma() const {
    const double s = noise_sigma > 0.0 ? noise_sigma : 1.0;
    return s / std::sqrt(static_cast<double>(n_scans));
}

namespace {

// Signal sum_ab C_ab (lambda_a conj(lambda_b))^j for j = 0..n-1, with the
// phases refreshed exactly every few steps to keep rounding from drifting.
std::vector<double> floquet_series(const std::vector<Eigen::MatrixXcd>& weights, const Eigen::VectorXd& angles,
                                   int n_cycles, bool magnitude) {
    const Eigen::Index dim = angles.size();
    Eigen::MatrixXd omega(dim, dim);
    for (Eigen::Index b = 0; b < dim; ++b)
        for (Eigen::Index a = 0; a < dim; ++a) omega(a, b) = angles(a) - angles(b);
    Eigen::MatrixXcd step = omega.unaryExpr([](double w) { return std::polar(1.0, w); });
    Eigen::MatrixXcd phase = Eigen::MatrixXcd::Ones(dim, dim);
    std::vector<double> out(static_cast<std::size_t>(n_cycles));
    constexpr int kRefresh = 64;
    for (int j = 0; j < n_cycles; ++j) {
        if (j > 0) {
            if (j % kRefresh == 0) {
                const double jj = j;
                phase = omega.unaryExpr([jj](double w) { return std::polar(1.0, jj * w); });
            } else {
                phase.array() *= step.array();
            }
        }
        if (magnitude) {
            const double x = (weights[0].array() * phase.array()).sum().real();
            const double y = (weights[1].array() * phase.array()).sum().real();
            out[static_cast<std::size_t>(j)] = std::hypot(x, y);
        } else {
            out[static_cast<std::size_t>(j)] = (weights[0].array() * phase.array()).sum().real();
        }
    }
    return out;
}

}  // namespace

DdSeries run_dd(const SpinSystem& system, const DdConfig& config, const Limits& limits) {
    config.validate();
    const int n = system.n_spins();
    require_dense_budget(n, limits);
    const double norm = collective_norm(n);

    const SpectralDecomposition zz(OperatorKind::hzz(), system);
    const Density half = zz.dense_propagator(config.tau / 2);
    const Density floquet = half * rotation_matrix(n, 0.0, config.theta) * half;
    // The pi/2 about Y turns Iz into Ix; the first window sits tau/2 later.
    const Density ix = dense_operator(OperatorKind::ix(), system);
    const Density rho0 = half * ix * half.adjoint();

    const Eigen::ComplexSchur<Density> schur(floquet);
    if (schur.info() != Eigen::Success) throw NonConvergence("Schur decomposition of the Floquet propagator failed", 1.0);
    const Density& t = schur.matrixT();
    const double off = t.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm();
    if (off > 1e-8 * std::sqrt(static_cast<double>(t.rows())))
        throw NonConvergence("Floquet propagator is not numerically normal", off);
    const Density& v = schur.matrixU();
    Eigen::VectorXd angles(t.rows());
    for (Eigen::Index a = 0; a < t.rows(); ++a) angles(a) = std::arg(t(a, a));

    const Density a_mat = v.adjoint() * rho0 * v;
    const bool magnitude = config.detection == DdDetection::Magnitude;
    std::vector<Eigen::MatrixXcd> weights;
    weights.push_back((v.adjoint() * ix * v).transpose().cwiseProduct(a_mat) / norm);
    if (magnitude) {
        const Density iy = dense_operator(OperatorKind::iy(), system);
        weights.push_back((v.adjoint() * iy * v).transpose().cwiseProduct(a_mat) / norm);
    }

    DdSeries out;
    out.sigma_eff = config.effective_sigma();
    out.t.resize(static_cast<std::size_t>(config.n_cycles));
    for (int j = 0; j < config.n_cycles; ++j) out.t[static_cast<std::size_t>(j)] = (j + 0.5) * config.tau;

    if (!magnitude) {
        out.clean = floquet_series(weights, angles, config.n_cycles, false);
        out.signal = out.clean;
        if (config.noise_sigma > 0.0) {
            std::mt19937_64 rng(config.rng_seed);
            std::normal_distribution<double> noise(0.0, out.sigma_eff);
            for (double& s : out.signal) s += noise(rng);
        }
        return out;
    }

    // Magnitude mode keeps both quadratures so the noise enters before |.|.
    const std::vector<Eigen::MatrixXcd> wx{weights[0]};
    const std::vector<Eigen::MatrixXcd> wy{weights[1]};
    const auto sx = floquet_series(wx, angles, config.n_cycles, false);
    const auto sy = floquet_series(wy, angles, config.n_cycles, false);
    out.clean.resize(sx.size());
    out.signal.resize(sx.size());
    std::mt19937_64 rng(config.rng_seed);
    std::normal_distribution<double> noise(0.0, out.sigma_eff);
    for (std::size_t j = 0; j < sx.size(); ++j) {
        out.clean[j] = std::hypot(sx[j], sy[j]);
        if (config.noise_sigma > 0.0) {
            const double x = sx[j] + noise(rng);
            const double y = sy[j] + noise(rng);
            out.signal[j] = std::hypot(x, y);
        } else {
            out.signal[j] = out.clean[j];
        }
    }
    return out;
}

double DecayFit::operator()(double t) const {
    const double fast = a_fast > 0.0 ? a_fast * std::exp(-t / t_fast) : 0.0;
    return fast + a_slow * std::exp(-t / t_slow);
}

namespace {

// Sum of exponentials with decay times exp(u_i); amplitudes are solved for
// (non-negative) at every u, so only the decay times are iterated on.
class ExpModel {
public:
    ExpModel(const std::vector<double>& t, const std::vector<double>& y, std::size_t first, std::size_t last)
        : t_(Eigen::Map<const Eigen::VectorXd>(t.data() + first, static_cast<Eigen::Index>(last - first + 1))),
          y_(Eigen::Map<const Eigen::VectorXd>(y.data() + first, static_cast<Eigen::Index>(last - first + 1))) {}

    Eigen::Index size() const { return y_.size(); }
    const Eigen::VectorXd& data() const { return y_; }

    // Non-negative least squares over at most two columns, by enumeration.
    Eigen::VectorXd amplitudes(const Eigen::VectorXd& u) const {
        const Eigen::MatrixXd phi = basis(u);
        const Eigen::Index k = phi.cols();
        Eigen::VectorXd best = Eigen::VectorXd::Zero(k);
        double best_rss = y_.squaredNorm();
        auto consider = [&](const Eigen::VectorXd& a) {
            if ((a.array() < 0.0).any() || !a.allFinite()) return;
            const double rss = (y_ - phi * a).squaredNorm();
            if (rss < best_rss) {
                best_rss = rss;
                best = a;
            }
        };
        consider(phi.colPivHouseholderQr().solve(y_));
        if (k > 1) {
            for (Eigen::Index c = 0; c < k; ++c) {
                Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
                const double nn = phi.col(c).squaredNorm();
                if (nn > 0.0) a(c) = phi.col(c).dot(y_) / nn;
                consider(a);
            }
        }
        return best;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& u) const {
        return y_ - basis(u) * amplitudes(u);
    }

    Eigen::MatrixXd basis(const Eigen::VectorXd& u) const {
        Eigen::MatrixXd phi(y_.size(), u.size());
        for (Eigen::Index c = 0; c < u.size(); ++c) phi.col(c) = (-t_.array() * std::exp(-u(c))).exp();
        return phi;
    }

private:
    Eigen::VectorXd t_;
    Eigen::VectorXd y_;
};

// Levenberg-Marquardt on the projected residual with a central-difference
// Jacobian.
Eigen::VectorXd refine(const ExpModel& model, Eigen::VectorXd u, double lo, double hi) {
    Eigen::VectorXd r = model.residual(u);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::MatrixXd jac(r.size(), u.size());
        for (Eigen::Index c = 0; c < u.size(); ++c) {
            const double h = 1e-6;
            Eigen::VectorXd up = u, dn = u;
            up(c) += h;
            dn(c) -= h;
            jac.col(c) = (model.residual(up) - model.residual(dn)) / (2 * h);
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 20 && !improved; ++tries) {
            Eigen::MatrixXd lhs = jtj;
            lhs.diagonal().array() += lambda * (jtj.diagonal().array() + 1e-12);
            const Eigen::VectorXd step = lhs.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10;
                continue;
            }
            const Eigen::VectorXd trial = (u + step).cwiseMax(lo).cwiseMin(hi);
            const Eigen::VectorXd rt = model.residual(trial);
            const double ct = rt.squaredNorm();
            if (ct < cost) {
                const double gain = cost - ct;
                u = trial;
                r = rt;
                cost = ct;
                lambda = std::max(lambda / 10, 1e-12);
                improved = true;
                if (gain <= 1e-15 * (cost + 1e-300) || step.norm() < 1e-12) return u;
            } else {
                lambda *= 10;
            }
        }
        if (!improved) break;
    }
    return u;
}

struct Candidate {
    Eigen::VectorXd u;
    double rss = std::numeric_limits<double>::infinity();
};

Candidate best_fit(const ExpModel& model, const std::vector<Eigen::VectorXd>& starts, std::size_t n_refine, double lo,
                   double hi) {
    std::vector<Candidate> scored;
    scored.reserve(starts.size());
    for (const auto& u : starts) scored.push_back({u, model.residual(u).squaredNorm()});
    std::sort(scored.begin(), scored.end(), [](const Candidate& a, const Candidate& b) { return a.rss < b.rss; });
    Candidate best;
    for (std::size_t i = 0; i < std::min(n_refine, scored.size()); ++i) {
        const Eigen::VectorXd u = refine(model, scored[i].u, lo, hi);
        const double rss = model.residual(u).squaredNorm();
        if (rss < best.rss) best = {u, rss};
    }
    return best;
}

}  // namespace

DecayFit fit_biexponential(const std::vector<double>& t, const std::vector<double>& y, std::size_t skip,
                           const FitOptions& options) {
    if (t.size() != y.size()) throw DimensionMismatch("time and signal lengths differ");
    if (y.size() < skip + 8)
        throw InvalidArgument(fmt::format("need at least 8 points after skipping {}, have {}", skip,
                                          y.size() > skip ? y.size() - skip : 0));
    const std::size_t first = skip;
    const std::size_t last = y.size() - 1;
    const ExpModel model(t, y, first, last);
    const double span = t[last] - t[first];
    const double spacing = (t[last] - t[first]) / static_cast<double>(last - first);
    if (!(spacing > 0.0)) throw InvalidArgument("sample times must increase");

    // Initial decay times log-spaced from the sample spacing to 10x the span.
    constexpr int kGrid = 10;
    std::vector<double> grid;
    for (int i = 0; i < kGrid; ++i)
        grid.push_back(std::log(spacing) + (std::log(10 * span) - std::log(spacing)) * i / (kGrid - 1));

    std::vector<Eigen::VectorXd> pairs, singles;
    for (int i = 0; i < kGrid; ++i) {
        singles.push_back(Eigen::VectorXd::Constant(1, grid[static_cast<std::size_t>(i)]));
        for (int j = i + 1; j < kGrid; ++j)
            pairs.push_back(Eigen::Vector2d(grid[static_cast<std::size_t>(i)], grid[static_cast<std::size_t>(j)]));
    }
    // Decay times stay between one sample spacing and far beyond the record,
    // where a component is indistinguishable from a constant.
    const double lo = std::log(spacing);
    const double hi = std::log(1e4 * t[last]);
    const Candidate two = best_fit(model, pairs, 6, lo, hi);
    const Candidate one = best_fit(model, singles, 3, lo, hi);

    const double n_pts = static_cast<double>(model.size());
    const double data_rms = std::sqrt(model.data().squaredNorm() / n_pts);
    if (!(data_rms > 0.0)) throw FitFailure("signal is identically zero in the fit window");

    DecayFit fit;
    fit.first_index = first;
    fit.last_index = last;

    const Eigen::VectorXd a2 = model.amplitudes(two.u);
    double tf = std::exp(two.u(0)), ts = std::exp(two.u(1));
    double af = a2(0), as = a2(1);
    if (tf > ts) {
        std::swap(tf, ts);
        std::swap(af, as);
    }
    // A fast component pinned at one sample spacing is not resolved by the data.
    const bool pinned = std::log(tf) <= lo + 1e-6;
    const bool degenerate = std::abs(ts / tf - 1.0) < options.collapse_tolerance || af <= 0.0 || as <= 0.0 || pinned ||
                            one.rss <= two.rss * (1 + 1e-6) + 1e-18 * n_pts * data_rms * data_rms;
    if (degenerate) {
        const Eigen::VectorXd a1 = model.amplitudes(one.u);
        fit.a_fast = 0.0;
        fit.a_slow = a1(0);
        fit.t_slow = std::exp(one.u(0));
        fit.t_fast = fit.t_slow;
        fit.single_exponential = true;
        fit.residual_rms = std::sqrt(one.rss / n_pts);
    } else {
        fit.a_fast = af;
        fit.t_fast = tf;
        fit.a_slow = as;
        fit.t_slow = ts;
        fit.residual_rms = std::sqrt(two.rss / n_pts);
    }
    const double relative = fit.residual_rms / data_rms;
    if (!(relative <= options.max_relative_residual) || fit.total_amplitude() <= 0.0) {
        throw FitFailure(fmt::format(
            "bi-exponential fit failed: relative rms residual {:.3g} (limit {:.3g}), amplitudes ({:.3g}, {:.3g}), "
            "decay times ({:.3g}, {:.3g}) over points {}..{}",
            relative, options.max_relative_residual, fit.a_fast, fit.a_slow, fit.t_fast, fit.t_slow, first, last));
    }
    return fit;
}

DecayFit fit_biexponential(const DdSeries& series, std::size_t transient_skip, const FitOptions& options) {
    return fit_biexponential(series.t, series.signal, transient_skip, options);
}

std::vector<double> cumulative_snr(const std::vector<double>& signal, double sigma_eff) {
    if (!(sigma_eff > 0.0)) throw InvalidArgument("sigma_eff must be positive");
    std::vector<double> out(signal.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < signal.size(); ++j) {
        sum += std::abs(signal[j]);
        out[j] = sum / (sigma_eff * std::sqrt(static_cast<double>(j + 1)));
    }
    return out;
}

SnrOptimum optimal_cycles(const DdSeries& series) {
    const auto snr = cumulative_snr(series.clean, series.sigma_eff);
    if (snr.empty()) return {};
    const auto it = std::max_element(snr.begin(), snr.end());
    return {static_cast<int>(it - snr.begin()) + 1, *it};
}

double measured_snr(const DdSeries& series, const DecayFit& fit, std::size_t n) {
    if (n == 0 || n > series.signal.size()) n = series.signal.size();
    double noise = 0.0;
    for (std::size_t j = fit.first_index; j <= fit.last_index && j < series.signal.size(); ++j) {
        const double r = series.signal[j] - fit(series.t[j]);
        noise += r * r;
    }
    const std::size_t count = fit.last_index - fit.first_index + 1;
    noise = std::sqrt(noise / static_cast<double>(count));
    if (!(noise > 0.0)) throw InvalidArgument("fit residual is zero; SNR is undefined");
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::abs(fit(series.t[j]));
    return sum / (noise * std::sqrt(static_cast<double>(n)));
}

double scan_ratio_for_equal_snr(const std::vector<double>& high, const std::vector<double>& low, std::size_t n) {
    if (n == 0 || n > high.size() || n > low.size()) throw InvalidArgument("window exceeds the series length");
    double sh = 0.0, sl = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        sh += std::abs(high[j]);
        sl += std::abs(low[j]);
    }
    if (!(sl > 0.0)) throw InvalidArgument("low-retention signal is zero");
    return (sh / sl) * (sh / sl);
}

const SweepCell& SweepResult::at(std::size_t i_tau, std::size_t i_theta) const {
    return cells.at(i_tau * theta_grid.size() + i_theta);
}

std::uint64_t cell_seed(std::uint64_t base, std::size_t index) {
    // splitmix64 finalizer
    std::uint64_t z = static_cast<std::uint64_t>(index) + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return base ^ (z ^ (z >> 31));
}

std::vector<double> default_theta_grid() {
    using std::numbers::pi;
    return {pi / 8, pi / 4, 3 * pi / 8, pi / 2};
}

std::vector<double> default_tau_grid() { return {2.5e-6, 5e-6, 10e-6, 20e-6}; }

SweepCell summarize_cell(const DdSeries& series, const DdConfig& config, const FitOptions& fit) {
    SweepCell cell;
    cell.tau = config.tau;
    cell.theta = config.theta;
    cell.seed = config.rng_seed;
    const auto opt = optimal_cycles(series);
    cell.n_star = opt.n_star;
    cell.snr = opt.snr;
    try {
        cell.fit = fit_biexponential(series, static_cast<std::size_t>(config.transient_skip), fit);
        cell.total_amplitude = cell.fit->total_amplitude();
    } catch (const Error& e) {
        cell.status = "fit_failure";
        cell.message = e.what();
    }
    return cell;
}

SweepCell evaluate_cell(const SpinSystem& system, const DdConfig& config, const FitOptions& fit,
                        const Limits& limits) {
    DdSeries series;
    try {
        series = run_dd(system, config, limits);
    } catch (const Error& e) {
        SweepCell cell;
        cell.tau = config.tau;
        cell.theta = config.theta;
        cell.seed = config.rng_seed;
        cell.status = "error";
        cell.message = e.what();
        return cell;
    }
    return summarize_cell(series, config, fit);
}

SweepResult sweep(const SpinSystem& system, const std::vector<double>& tau_grid,
                  const std::vector<double>& theta_grid, const DdConfig& base, const FitOptions& fit,
                  unsigned threads, const Limits& limits) {
    if (tau_grid.empty() || theta_grid.empty()) throw InvalidArgument("sweep grids must be non-empty");
    require_dense_budget(system.n_spins(), limits);
    SweepResult result;
    result.tau_grid = tau_grid;
    result.theta_grid = theta_grid;
    const std::size_t n_cells = tau_grid.size() * theta_grid.size();
    result.cells.resize(n_cells);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n_cells; i = next++) {
            DdConfig config = base;
            config.tau = tau_grid[i / theta_grid.size()];
            config.theta = theta_grid[i % theta_grid.size()];
            config.rng_seed = cell_seed(base.rng_seed, i);
            result.cells[i] = evaluate_cell(system, config, fit, limits);
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_cells));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    return result;
}

}  // namespace mqcsim
