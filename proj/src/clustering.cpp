#include "am/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "am/autodiff.hpp"
#include "am/csvio.hpp"
#include "am/dynamics.hpp"
#include "am/latent.hpp"
#include "am/optim.hpp"
#include "am/rng.hpp"

namespace am {

namespace {

double sqdist_rows(const Tensor& a, std::int64_t i, const Tensor& b, std::int64_t j) {
    double s = 0.0;
    for (std::int64_t p = 0; p < a.dim(1); ++p) {
        const double d = a.at(i, p) - b.at(j, p);
        s += d * d;
    }
    return s;
}

// relabel to a 0-based contiguous range, preserving order of first appearance
std::vector<int> compact_labels(const std::vector<int>& labels, int* k_out = nullptr) {
    std::vector<int> out(labels.size());
    std::vector<int> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = std::find(seen.begin(), seen.end(), labels[i]);
        if (it == seen.end()) {
            seen.push_back(labels[i]);
            out[i] = static_cast<int>(seen.size()) - 1;
        } else {
            out[i] = static_cast<int>(it - seen.begin());
        }
    }
    if (k_out) *k_out = static_cast<int>(seen.size());
    return out;
}

struct Contingency {
    std::vector<std::vector<double>> n;  // [classes][clusters]
    std::vector<double> a, b;            // row sums, column sums
    double total = 0.0;
    int r = 0, c = 0;
};

Contingency contingency(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("metrics: label vectors must have equal length");
    if (truth.empty()) throw std::invalid_argument("metrics: empty label vectors");
    Contingency g;
    std::vector<int> t = compact_labels(truth, &g.r);
    std::vector<int> p = compact_labels(pred, &g.c);
    g.n.assign(g.r, std::vector<double>(g.c, 0.0));
    g.a.assign(g.r, 0.0);
    g.b.assign(g.c, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        g.n[t[i]][p[i]] += 1.0;
        g.a[t[i]] += 1.0;
        g.b[p[i]] += 1.0;
        g.total += 1.0;
    }
    return g;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

double mutual_info(const Contingency& g) {
    double mi = 0.0;
    for (int i = 0; i < g.r; ++i)
        for (int j = 0; j < g.c; ++j) {
            const double nij = g.n[i][j];
            if (nij <= 0.0) continue;
            mi += nij / g.total *
                  std::log(g.total * nij / (g.a[i] * g.b[j]));
        }
    return std::max(mi, 0.0);
}

double entropy(const std::vector<double>& counts, double total) {
    double h = 0.0;
    for (double c : counts) {
        if (c <= 0.0) continue;
        const double p = c / total;
        h -= p * std::log(p);
    }
    return h;
}

// exact expected mutual information under the hypergeometric null
double expected_mutual_info(const Contingency& g) {
    const double n = g.total;
    const double lg_n = std::lgamma(n + 1.0);
    double emi = 0.0;
    for (int i = 0; i < g.r; ++i) {
        for (int j = 0; j < g.c; ++j) {
            const double ai = g.a[i], bj = g.b[j];
            const double lo = std::max(1.0, ai + bj - n);
            const double hi = std::min(ai, bj);
            for (double nij = lo; nij <= hi; nij += 1.0) {
                const double term1 = nij / n * std::log(n * nij / (ai * bj));
                const double log_p =
                    std::lgamma(ai + 1.0) + std::lgamma(bj + 1.0) +
                    std::lgamma(n - ai + 1.0) + std::lgamma(n - bj + 1.0) -
                    lg_n - std::lgamma(nij + 1.0) - std::lgamma(ai - nij + 1.0) -
                    std::lgamma(bj - nij + 1.0) -
                    std::lgamma(n - ai - bj + nij + 1.0);
                emi += term1 * std::exp(log_p);
            }
        }
    }
    return emi;
}

}  // namespace

int Dataset::classes() const {
    if (!labels) return 0;
    std::set<int> s(labels->begin(), labels->end());
    return static_cast<int>(s.size());
}

void TrainConfig::validate() const {
    if (k < 1) throw std::invalid_argument("TrainConfig: k must be >= 1");
    if (rollout_steps < 1) throw std::invalid_argument("TrainConfig: rollout_steps must be >= 1");
    if (!(rollout_dt > 0.0)) throw std::invalid_argument("TrainConfig: rollout_dt must be > 0");
    if (!(beta > 0.0)) throw std::invalid_argument("TrainConfig: beta must be > 0");
    if (epochs < 1 || restarts < 1)
        throw std::invalid_argument("TrainConfig: epochs and restarts must be >= 1");
}

// ----------------------------------------------------------------- metrics

double rand_score(const std::vector<int>& pred, const std::vector<int>& truth) {
    const Contingency g = contingency(truth, pred);
    const double n = g.total;
    if (n < 2.0) return 1.0;
    double sum_nij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < g.r; ++i)
        for (int j = 0; j < g.c; ++j) sum_nij += comb2(g.n[i][j]);
    for (double a : g.a) sum_a += comb2(a);
    for (double b : g.b) sum_b += comb2(b);
    const double pairs = comb2(n);
    const double agree = sum_nij + (pairs - sum_a - sum_b + sum_nij);
    return agree / pairs;
}

double adjusted_rand(const std::vector<int>& pred, const std::vector<int>& truth) {
    const Contingency g = contingency(truth, pred);
    double sum_nij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < g.r; ++i)
        for (int j = 0; j < g.c; ++j) sum_nij += comb2(g.n[i][j]);
    for (double a : g.a) sum_a += comb2(a);
    for (double b : g.b) sum_b += comb2(b);
    const double pairs = comb2(g.total);
    if (pairs <= 0.0) return 1.0;
    const double expected = sum_a * sum_b / pairs;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (maximum == expected) return 1.0;  // both partitions trivial
    return (sum_nij - expected) / (maximum - expected);
}

double adjusted_mutual_info(const std::vector<int>& pred, const std::vector<int>& truth) {
    const Contingency g = contingency(truth, pred);
    if (g.r == 1 && g.c == 1) return 1.0;
    const double mi = mutual_info(g);
    const double emi = expected_mutual_info(g);
    const double hu = entropy(g.a, g.total), hv = entropy(g.b, g.total);
    const double normalizer = 0.5 * (hu + hv);
    const double denom = normalizer - emi;
    if (denom == 0.0) return 0.0;
    return (mi - emi) / denom;
}

double normalized_mutual_info(const std::vector<int>& pred, const std::vector<int>& truth) {
    const Contingency g = contingency(truth, pred);
    if (g.r == 1 && g.c == 1) return 1.0;
    const double hu = entropy(g.a, g.total), hv = entropy(g.b, g.total);
    const double normalizer = 0.5 * (hu + hv);
    if (normalizer == 0.0) return 0.0;
    return mutual_info(g) / normalizer;
}

namespace {

struct Clusters {
    std::vector<std::vector<std::int64_t>> members;
    Tensor centroids;
    int k = 0;
};

Clusters split_clusters(const Tensor& x, const std::vector<int>& pred) {
    if (static_cast<std::size_t>(x.dim(0)) != pred.size())
        throw std::invalid_argument("metrics: features/labels length mismatch");
    int k = 0;
    std::vector<int> lab = compact_labels(pred, &k);
    Clusters c;
    c.k = k;
    c.members.resize(k);
    for (std::size_t i = 0; i < lab.size(); ++i)
        c.members[lab[i]].push_back(static_cast<std::int64_t>(i));
    c.centroids = Tensor({k, x.dim(1)});
    for (int j = 0; j < k; ++j) {
        for (std::int64_t i : c.members[j])
            for (std::int64_t p = 0; p < x.dim(1); ++p)
                c.centroids.at(j, p) += x.at(i, p);
        for (std::int64_t p = 0; p < x.dim(1); ++p)
            c.centroids.at(j, p) /= static_cast<double>(c.members[j].size());
    }
    return c;
}

}  // namespace

std::optional<double> calinski_harabasz(const Tensor& x, const std::vector<int>& pred) {
    const Clusters c = split_clusters(x, pred);
    const auto n = x.dim(0);
    if (c.k < 2 || c.k >= n) return std::nullopt;
    VecD mean(x.dim(1), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t p = 0; p < x.dim(1); ++p) mean[p] += x.at(i, p);
    for (auto& v : mean) v /= static_cast<double>(n);
    double within = 0.0, between = 0.0;
    for (int j = 0; j < c.k; ++j) {
        for (std::int64_t i : c.members[j]) within += sqdist_rows(x, i, c.centroids, j);
        double d = 0.0;
        for (std::int64_t p = 0; p < x.dim(1); ++p) {
            const double diff = c.centroids.at(j, p) - mean[p];
            d += diff * diff;
        }
        between += static_cast<double>(c.members[j].size()) * d;
    }
    if (within == 0.0) return std::nullopt;
    return (between / static_cast<double>(c.k - 1)) /
           (within / static_cast<double>(n - c.k));
}

std::optional<double> davies_bouldin(const Tensor& x, const std::vector<int>& pred) {
    const Clusters c = split_clusters(x, pred);
    if (c.k < 2) return std::nullopt;
    VecD scatter(c.k, 0.0);
    for (int j = 0; j < c.k; ++j) {
        for (std::int64_t i : c.members[j])
            scatter[j] += std::sqrt(sqdist_rows(x, i, c.centroids, j));
        scatter[j] /= static_cast<double>(c.members[j].size());
    }
    double score = 0.0;
    for (int i = 0; i < c.k; ++i) {
        double worst = 0.0;
        for (int j = 0; j < c.k; ++j) {
            if (i == j) continue;
            const double d = std::sqrt(sqdist_rows(c.centroids, i, c.centroids, j));
            if (d == 0.0) continue;
            worst = std::max(worst, (scatter[i] + scatter[j]) / d);
        }
        score += worst;
    }
    return score / static_cast<double>(c.k);
}

std::optional<double> silhouette(const Tensor& x, const std::vector<int>& pred) {
    const Clusters c = split_clusters(x, pred);
    const auto n = x.dim(0);
    if (c.k < 2 || c.k >= n) return std::nullopt;
    int k = 0;
    std::vector<int> lab = compact_labels(pred, &k);
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        VecD mean_dist(c.k, 0.0);
        for (std::int64_t j = 0; j < n; ++j) {
            if (i == j) continue;
            mean_dist[lab[j]] += std::sqrt(sqdist_rows(x, i, x, j));
        }
        const int own = lab[i];
        const auto own_size = static_cast<double>(c.members[own].size());
        if (own_size <= 1.0) continue;  // silhouette of a singleton is 0
        const double a = mean_dist[own] / (own_size - 1.0);
        double b = std::numeric_limits<double>::infinity();
        for (int j = 0; j < c.k; ++j) {
            if (j == own) continue;
            b = std::min(b, mean_dist[j] / static_cast<double>(c.members[j].size()));
        }
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

MetricReport metric_report(const Tensor& features, const std::vector<int>& pred,
                           const std::optional<std::vector<int>>& truth) {
    MetricReport r;
    if (truth) {
        r.rand = rand_score(pred, *truth);
        r.adjusted_rand = adjusted_rand(pred, *truth);
        r.adjusted_mutual_info = adjusted_mutual_info(pred, *truth);
        r.normalized_mutual_info = normalized_mutual_info(pred, *truth);
    }
    r.calinski_harabasz = calinski_harabasz(features, pred);
    r.davies_bouldin = davies_bouldin(features, pred);
    r.silhouette = silhouette(features, pred);
    return r;
}

std::string metric_report_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("rand", r.rand);
    put("adjusted_rand", r.adjusted_rand);
    put("adjusted_mutual_info", r.adjusted_mutual_info);
    put("normalized_mutual_info", r.normalized_mutual_info);
    put("calinski_harabasz", r.calinski_harabasz);
    put("davies_bouldin", r.davies_bouldin);
    put("silhouette", r.silhouette);
    return j.dump(2) + "\n";
}

// ------------------------------------------------------------------- data

Dataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    std::int64_t label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "label") label_col = static_cast<std::int64_t>(i);

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::int64_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> row;
        std::int64_t col = 0;
        while (std::getline(ss, tok, ',')) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0')
                throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                         ": non-numeric value '" + tok + "'");
            if (col == label_col) {
                if (v != std::floor(v))
                    throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                             ": non-integer label");
                labels.push_back(static_cast<int>(v));
            } else {
                row.push_back(v);
            }
            ++col;
        }
        if (col != static_cast<std::int64_t>(header.size()))
            throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(col));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

    Dataset d;
    d.features = Tensor::from_rows(rows);
    if (label_col >= 0) d.labels = compact_labels(labels);
    d.name = path;
    return d;
}

Tensor standardize(const Tensor& features) {
    const std::int64_t n = features.dim(0), d = features.dim(1);
    Tensor out = features;
    for (std::int64_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::int64_t i = 0; i < n; ++i) mean += features.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double c = features.at(i, j) - mean;
            var += c * c;
        }
        var /= static_cast<double>(n);
        const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            out.at(i, j) = (features.at(i, j) - mean) * scale;
    }
    return out;
}

Dataset make_blobs(std::int64_t k, std::int64_t per_cluster, std::int64_t d,
                   double center_box, double cluster_std, std::uint64_t seed) {
    if (k < 1 || per_cluster < 1 || d < 1)
        throw std::invalid_argument("make_blobs: bad arguments");
    Rng rng(seed);
    Tensor centers({k, d});
    for (auto& v : centers.vec()) v = rng.uniform(-center_box, center_box);
    Tensor x({k * per_cluster, d});
    std::vector<int> labels(k * per_cluster);
    for (std::int64_t c = 0; c < k; ++c)
        for (std::int64_t i = 0; i < per_cluster; ++i) {
            const std::int64_t r = c * per_cluster + i;
            labels[r] = static_cast<int>(c);
            for (std::int64_t j = 0; j < d; ++j)
                x.at(r, j) = centers.at(c, j) + cluster_std * rng.normal();
        }
    Dataset ds;
    ds.features = std::move(x);
    ds.labels = std::move(labels);
    ds.name = "blobs";
    return ds;
}

// ---------------------------------------------------------------- k-means

namespace {

std::vector<std::int64_t> kmeanspp_seed(const Tensor& x, std::int64_t k, Rng& rng) {
    const std::int64_t n = x.dim(0);
    std::vector<std::int64_t> chosen;
    chosen.push_back(static_cast<std::int64_t>(rng.uniform_int(n)));
    VecD d2(n, std::numeric_limits<double>::infinity());
    while (static_cast<std::int64_t>(chosen.size()) < k) {
        double total = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sqdist_rows(x, i, x, chosen.back()));
            total += d2[i];
        }
        std::int64_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::int64_t>(rng.uniform_int(n));
        }
        chosen.push_back(pick);
    }
    return chosen;
}

}  // namespace

KmeansResult kmeans(const Tensor& features, std::int64_t k, std::int64_t restarts,
                    std::uint64_t seed) {
    const std::int64_t n = features.dim(0), d = features.dim(1);
    if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= N");
    if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");

    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    Rng root(seed);
    for (std::int64_t r = 0; r < restarts; ++r) {
        Rng rng = root.child(static_cast<std::uint64_t>(r));
        Tensor cent({k, d});
        {
            auto idx = kmeanspp_seed(features, k, rng);
            for (std::int64_t j = 0; j < k; ++j)
                for (std::int64_t p = 0; p < d; ++p) cent.at(j, p) = features.at(idx[j], p);
        }
        std::vector<int> labels(n, -1);
        for (int iter = 0; iter < 300; ++iter) {
            bool changed = false;
            for (std::int64_t i = 0; i < n; ++i) {
                int bestk = 0;
                double bestd = std::numeric_limits<double>::infinity();
                for (std::int64_t j = 0; j < k; ++j) {
                    const double dd = sqdist_rows(features, i, cent, j);
                    if (dd < bestd) {
                        bestd = dd;
                        bestk = static_cast<int>(j);
                    }
                }
                if (labels[i] != bestk) {
                    labels[i] = bestk;
                    changed = true;
                }
            }
            // recompute centroids; re-seed emptied clusters at the point
            // farthest from its current centroid
            std::vector<std::int64_t> size(k, 0);
            Tensor next({k, d});
            for (std::int64_t i = 0; i < n; ++i) {
                ++size[labels[i]];
                for (std::int64_t p = 0; p < d; ++p) next.at(labels[i], p) += features.at(i, p);
            }
            for (std::int64_t j = 0; j < k; ++j) {
                if (size[j] == 0) {
                    std::int64_t far = 0;
                    double fard = -1.0;
                    for (std::int64_t i = 0; i < n; ++i) {
                        const double dd = sqdist_rows(features, i, cent, labels[i]);
                        if (dd > fard) {
                            fard = dd;
                            far = i;
                        }
                    }
                    for (std::int64_t p = 0; p < d; ++p) next.at(j, p) = features.at(far, p);
                    changed = true;
                } else {
                    for (std::int64_t p = 0; p < d; ++p)
                        next.at(j, p) /= static_cast<double>(size[j]);
                }
            }
            cent = std::move(next);
            if (!changed) break;
        }
        double inertia = 0.0;
        for (std::int64_t i = 0; i < n; ++i) inertia += sqdist_rows(features, i, cent, labels[i]);
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.labels = labels;
            best.centroids = cent;
        }
    }
    return best;
}

// ------------------------------------------------------------- ClAM train

ClamTrainResult train_clam(const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    const std::int64_t n = data.count(), d = data.dim(), k = cfg.k;
    if (k > n) throw std::invalid_argument("train_clam: K must not exceed N");

    Rng root(cfg.seed);
    std::optional<ClamTrainResult> best;
    for (std::int64_t r = 0; r < cfg.restarts; ++r) {
        Rng rng = root.child(static_cast<std::uint64_t>(r));
        Tensor mem({k, d});
        if (cfg.init == MemoryInit::KmeansPlusPlus) {
            auto idx = kmeanspp_seed(data.features, k, rng);
            for (std::int64_t j = 0; j < k; ++j)
                for (std::int64_t p = 0; p < d; ++p)
                    mem.at(j, p) = data.features.at(idx[j], p);
        } else {
            // K data rows without replacement
            std::vector<std::int64_t> idx(n);
            for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
            for (std::int64_t i = 0; i < k; ++i) {
                const auto j = i + static_cast<std::int64_t>(rng.uniform_int(n - i));
                std::swap(idx[i], idx[j]);
            }
            for (std::int64_t j = 0; j < k; ++j)
                for (std::int64_t p = 0; p < d; ++p)
                    mem.at(j, p) = data.features.at(idx[j], p);
        }

        auto mu = ad::leaf(std::move(mem));
        auto x0 = ad::constant(data.features);
        Adam opt({.lr = cfg.lr});
        VecD history;
        for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            auto x = x0;
            for (std::int64_t t = 0; t < cfg.rollout_steps; ++t) {
                auto dist = ad::pairwise_sqdist(x, mu);
                auto w = ad::softmax_rows(ad::scale(dist, -cfg.beta));
                x = ad::add(ad::scale(x, 1.0 - cfg.rollout_dt),
                            ad::scale(ad::matmul(w, mu), cfg.rollout_dt));
            }
            auto loss = ad::sumsq_diff(x0, x);
            const double value = loss->value.item();
            if (!std::isfinite(value))
                throw std::runtime_error("train_clam: loss diverged at epoch " +
                                         std::to_string(epoch));
            history.push_back(value);
            ad::backward(loss);
            opt.step({&mu->value}, {mu->grad});
        }
        // final loss after the last update
        {
            ClamModel model(mu->value, cfg.beta);
            ClamEnergy e(model);
            double final_loss = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                VecD xi(data.features.data() + i * d, data.features.data() + (i + 1) * d);
                VecD cur = xi;
                for (std::int64_t t = 0; t < cfg.rollout_steps; ++t) {
                    VecD v = clam_dynamics_rhs(model, cur);
                    for (std::int64_t p = 0; p < d; ++p) cur[p] += cfg.rollout_dt * v[p];
                }
                for (std::int64_t p = 0; p < d; ++p) {
                    const double diff = xi[p] - cur[p];
                    final_loss += diff * diff;
                }
            }
            history.push_back(final_loss);
            if (!best || final_loss < best->loss_history.back()) {
                best = ClamTrainResult{std::move(model), std::move(history)};
            }
        }
    }
    return std::move(*best);
}

AssignResult assign(const ClamModel& model, const Tensor& features, AssignPath path) {
    const std::int64_t n = features.dim(0), d = features.dim(1);
    if (d != model.dim()) throw std::invalid_argument("assign: dimension mismatch");
    AssignResult res;
    res.labels.resize(n);
    res.warnings.assign(n, false);

    if (path == AssignPath::Soft) {
        MixtureModel mix = MixtureModel::uniform(model.memories(), model.beta());
        for (std::int64_t i = 0; i < n; ++i) {
            VecD x(features.data() + i * d, features.data() + (i + 1) * d);
            const VecD post = posterior(mix, x);
            int bestk = 0;
            for (std::size_t j = 1; j < post.size(); ++j)
                if (post[j] > post[bestk]) bestk = static_cast<int>(j);
            res.labels[i] = bestk;
        }
        return res;
    }

    ClamEnergy energy(model);
    FlowConfig flow;
    flow.dt = 0.25;
    flow.max_steps = 2000;
    flow.tol = 1e-9;
    for (std::int64_t i = 0; i < n; ++i) {
        VecD x(features.data() + i * d, features.data() + (i + 1) * d);
        auto [fp, converged] = find_fixed_point(energy, x, flow);
        res.warnings[i] = !converged;
        int bestk = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < model.count(); ++j) {
            double dd = 0.0;
            for (std::int64_t p = 0; p < d; ++p) {
                const double diff = fp[p] - model.memories().at(j, p);
                dd += diff * diff;
            }
            if (dd < bestd) {
                bestd = dd;
                bestk = static_cast<int>(j);
            }
        }
        res.labels[i] = bestk;
    }
    return res;
}

}  // namespace am
