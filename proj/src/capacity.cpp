#include "am/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "am/dynamics.hpp"

namespace am {

namespace {

double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double mean_pairwise_distance(const PatternSet& p) {
    double s = 0.0;
    std::int64_t cnt = 0;
    for (std::int64_t i = 0; i < p.count(); ++i)
        for (std::int64_t j = i + 1; j < p.count(); ++j) {
            s += dist(p.row(i), p.row(j));
            ++cnt;
        }
    return cnt ? s / static_cast<double>(cnt) : 0.0;
}

// uniform draw in the D-ball of given radius
VecD ball_point(std::span<const double> center, double radius, Rng& rng) {
    const std::size_t d = center.size();
    VecD u(d);
    double nrm = 0.0;
    for (auto& x : u) {
        x = rng.normal();
        nrm += x * x;
    }
    nrm = std::sqrt(nrm);
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    VecD out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = center[i] + r * u[i] / nrm;
    return out;
}

struct CccpRun {
    VecD point;
    bool converged = false;
};

CccpRun iterate_cccp(const PatternSet& p, double beta, VecD x,
                     std::int64_t max_iters, double tol) {
    for (std::int64_t t = 0; t < max_iters; ++t) {
        VecD next = cccp_update(p, beta, x);
        double diff = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            diff = std::max(diff, std::abs(next[i] - x[i]));
        x = std::move(next);
        if (diff < tol) return {std::move(x), true};
    }
    return {std::move(x), false};
}

}  // namespace

VecD separation(const PatternSet& p) {
    if (p.count() < 2) throw std::invalid_argument("separation: need at least 2 patterns");
    VecD delta(p.count(), std::numeric_limits<double>::infinity());
    for (std::int64_t i = 0; i < p.count(); ++i)
        for (std::int64_t j = 0; j < p.count(); ++j) {
            if (i == j) continue;
            const double d = dist(p.row(i), p.row(j));
            delta[i] = std::min(delta[i], 0.5 * d * d);
        }
    return delta;
}

double radius_of_convergence(double sigma, std::int64_t n, double m) {
    if (!(sigma > 0.0) || n < 1 || !(m > 0.0))
        throw std::invalid_argument("radius_of_convergence: inputs must be positive");
    return sigma * sigma / (static_cast<double>(n) * m);
}

SeparationCheck well_separated(const PatternSet& p, double sigma) {
    if (p.count() < 2) throw std::invalid_argument("well_separated: need at least 2 patterns");
    const double s2 = sigma * sigma;
    const double n = static_cast<double>(p.count());
    const double m = p.largest_norm();
    const double bound = 2.0 * s2 / n + s2 * std::log(2.0 / s2 * (n - 1.0) * n * m * m);
    const VecD delta = separation(p);
    double margin = std::numeric_limits<double>::infinity();
    for (double d : delta) margin = std::min(margin, d - bound);
    return {margin >= 0.0, margin};
}

CapacityBound capacity_bound(std::int64_t d) {
    if (d < 2) throw std::invalid_argument("capacity_bound: D must be >= 2");
    const std::int64_t exponent = 2 * (d - 1);
    if (exponent > 63) return {std::numeric_limits<std::uint64_t>::max(), true};
    return {std::uint64_t{1} << exponent, false};
}

CapacityReport check_storage(const PatternSet& p, double sigma,
                             std::int64_t probes_per_pattern, double probe_radius,
                             Rng& rng) {
    if (probes_per_pattern < 1)
        throw std::invalid_argument("check_storage: need at least one probe");
    const std::int64_t n = p.count();
    const double m = p.largest_norm();
    const double beta = 1.0 / (sigma * sigma);
    const double r_conv = radius_of_convergence(sigma, n, m);

    CapacityReport rep;
    rep.separation = n >= 2 ? separation(p) : VecD(1, std::numeric_limits<double>::infinity());
    rep.min_separation = *std::min_element(rep.separation.begin(), rep.separation.end());
    rep.largest_norm = m;
    rep.radius.assign(n, r_conv);
    rep.stored.assign(n, false);
    rep.not_stored_reason.assign(n, "");
    rep.retrieval_error.assign(n, 0.0);

    const std::int64_t budget = 1000;
    const double tol = 1e-8;
    const double radius = std::min(r_conv, probe_radius);

    // disjointness of the balls is a pairwise property of the whole set
    std::vector<bool> ball_disjoint(n, true);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j)
            if (dist(p.row(i), p.row(j)) <= 2.0 * r_conv) {
                ball_disjoint[i] = false;
                ball_disjoint[j] = false;
            }

    for (std::int64_t i = 0; i < n; ++i) {
        // center probe first; its endpoint is the reported fixed point
        std::vector<VecD> starts;
        starts.emplace_back(p.row(i).begin(), p.row(i).end());
        for (std::int64_t q = 1; q < probes_per_pattern; ++q)
            starts.push_back(ball_point(p.row(i), radius, rng));

        bool ok = ball_disjoint[i];
        std::string reason = ok ? "" : "ball overlaps a neighbor";
        VecD fixed_point;
        for (std::size_t q = 0; ok && q < starts.size(); ++q) {
            CccpRun run = iterate_cccp(p, beta, starts[q], budget, tol);
            if (!run.converged) {
                ok = false;
                reason = "probe did not converge within budget";
                break;
            }
            if (dist(run.point, p.row(i)) > r_conv) {
                ok = false;
                reason = "probe left the ball";
                break;
            }
            if (q == 0) {
                fixed_point = run.point;
            } else if (dist(run.point, fixed_point) > 1e-6) {
                ok = false;
                reason = "probes reached different fixed points";
                break;
            }
        }
        rep.stored[i] = ok;
        rep.not_stored_reason[i] = reason;
        if (!fixed_point.empty())
            rep.retrieval_error[i] = dist(fixed_point, p.row(i));
    }

    std::int64_t stored_count = 0;
    double err_sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (rep.stored[i]) ++stored_count;
        err_sum += rep.retrieval_error[i];
    }
    rep.stored_fraction = static_cast<double>(stored_count) / static_cast<double>(n);
    const double mpd = n >= 2 ? mean_pairwise_distance(p) : 0.0;
    rep.aggregate_retrieval_ratio = mpd > 0.0 ? (err_sum / static_cast<double>(n)) / mpd : 0.0;
    return rep;
}

RetrievalResult retrieval_experiment(std::int64_t d, std::int64_t n, double m,
                                     double sigma, std::int64_t queries_per_pattern,
                                     double perturbation, std::uint64_t seed) {
    if (queries_per_pattern < 1)
        throw std::invalid_argument("retrieval_experiment: need at least one query");
    Rng rng(seed);
    PatternSet p = sphere_sample(d, m, n, rng);
    const double beta = 1.0 / (sigma * sigma);
    const double mpd = mean_pairwise_distance(p);

    double sum_ratio0 = 0.0, sum_final = 0.0;
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t q = 0; q < queries_per_pattern; ++q) {
            VecD u(d);
            double nrm = 0.0;
            for (auto& x : u) {
                x = rng.normal();
                nrm += x * x;
            }
            nrm = std::sqrt(nrm);
            VecD start(d);
            for (std::int64_t j = 0; j < d; ++j)
                start[j] = p.row(i)[j] + perturbation * u[j] / nrm;
            const double d0 = dist(start, p.row(i));
            CccpRun run = iterate_cccp(p, beta, start, 1000, 1e-10);
            const double d1 = dist(run.point, p.row(i));
            sum_ratio0 += d0 > 0.0 ? d1 / d0 : 0.0;
            sum_final += d1;
            ++count;
        }
    }
    RetrievalResult res;
    res.ratio_initial = sum_ratio0 / static_cast<double>(count);
    res.ratio_pairwise = mpd > 0.0 ? (sum_final / static_cast<double>(count)) / mpd : 0.0;
    return res;
}

PatternSet sphere_sample(std::int64_t d, double m, std::int64_t n, Rng& rng) {
    if (d < 1 || n < 1 || !(m > 0.0))
        throw std::invalid_argument("sphere_sample: bad arguments");
    Tensor pts({n, d});
    for (std::int64_t i = 0; i < n; ++i) {
        double nrm = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            pts.at(i, j) = rng.normal();
            nrm += pts.at(i, j) * pts.at(i, j);
        }
        nrm = std::sqrt(nrm);
        for (std::int64_t j = 0; j < d; ++j) pts.at(i, j) = m * pts.at(i, j) / nrm;
    }
    return PatternSet(std::move(pts));
}

PatternSet sphere_spread(std::int64_t d, double m, std::int64_t n,
                         std::int64_t iters, Rng& rng) {
    PatternSet init = sphere_sample(d, m, n, rng);
    Tensor pts = init.patterns();
    const double step = 0.05 * m;
    VecD force(n * d);
    for (std::int64_t it = 0; it < iters; ++it) {
        std::fill(force.begin(), force.end(), 0.0);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = i + 1; j < n; ++j) {
                double sq = 0.0;
                for (std::int64_t p = 0; p < d; ++p) {
                    const double diff = pts.at(i, p) - pts.at(j, p);
                    sq += diff * diff;
                }
                const double inv = 1.0 / (sq * std::sqrt(sq) + 1e-12);
                for (std::int64_t p = 0; p < d; ++p) {
                    const double diff = (pts.at(i, p) - pts.at(j, p)) * inv;
                    force[i * d + p] += diff;
                    force[j * d + p] -= diff;
                }
            }
        for (std::int64_t i = 0; i < n; ++i) {
            double nrm = 0.0;
            for (std::int64_t p = 0; p < d; ++p) {
                pts.at(i, p) += step * force[i * d + p];
                nrm += pts.at(i, p) * pts.at(i, p);
            }
            nrm = std::sqrt(nrm);
            for (std::int64_t p = 0; p < d; ++p) pts.at(i, p) = m * pts.at(i, p) / nrm;
        }
    }
    return PatternSet(std::move(pts));
}

}  // namespace am
