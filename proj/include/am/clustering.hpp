#pragma once

#include <optional>
#include <string>
#include <vector>

#include "am/energy.hpp"
#include "am/tensor.hpp"

namespace am {

struct Dataset {
    Tensor features;                        // N x D
    std::optional<std::vector<int>> labels; // 0..C-1 when present
    std::string name;

    std::int64_t count() const { return features.dim(0); }
    std::int64_t dim() const { return features.dim(1); }
    int classes() const;
};

enum class MemoryInit { Sample, KmeansPlusPlus };

struct TrainConfig {
    std::int64_t k = 3;
    double beta = 1.0;
    std::int64_t rollout_steps = 15;
    double rollout_dt = 0.1;
    double lr = 0.05;
    std::int64_t epochs = 100;
    std::int64_t restarts = 1;
    std::uint64_t seed = 0;
    MemoryInit init = MemoryInit::Sample;

    void validate() const;
};

struct ClamTrainResult {
    ClamModel model;
    VecD loss_history;  // loss before each update, plus the final loss
};

// Reconstruction-through-rollout training: Euler rollout of the softmax
// attraction dynamics for rollout_steps from every data point, squared
// reconstruction error summed over points, differentiated through the
// rollout; best of `restarts` by final loss.
ClamTrainResult train_clam(const Dataset& data, const TrainConfig& cfg);

enum class AssignPath { Hard, Soft };

struct AssignResult {
    std::vector<int> labels;
    std::vector<bool> warnings;  // hard path: rollout did not converge
};

// Hard: roll each point to its fixed point, label by nearest memory.
// Soft: argmax of the cluster posterior. Ties break to the lowest index.
AssignResult assign(const ClamModel& model, const Tensor& features, AssignPath path);

struct MetricReport {
    std::optional<double> rand;
    std::optional<double> adjusted_rand;
    std::optional<double> adjusted_mutual_info;
    std::optional<double> normalized_mutual_info;
    std::optional<double> calinski_harabasz;
    std::optional<double> davies_bouldin;
    std::optional<double> silhouette;
};

double rand_score(const std::vector<int>& pred, const std::vector<int>& truth);
double adjusted_rand(const std::vector<int>& pred, const std::vector<int>& truth);
double adjusted_mutual_info(const std::vector<int>& pred, const std::vector<int>& truth);
double normalized_mutual_info(const std::vector<int>& pred, const std::vector<int>& truth);
std::optional<double> calinski_harabasz(const Tensor& features, const std::vector<int>& pred);
std::optional<double> davies_bouldin(const Tensor& features, const std::vector<int>& pred);
std::optional<double> silhouette(const Tensor& features, const std::vector<int>& pred);

MetricReport metric_report(const Tensor& features, const std::vector<int>& pred,
                           const std::optional<std::vector<int>>& truth);
std::string metric_report_json(const MetricReport& r);

// Header row with numeric feature columns and an optional `label` column;
// parse failures carry the 1-based line number.
Dataset load_csv(const std::string& path);

struct KmeansResult {
    std::vector<int> labels;
    Tensor centroids;
    double inertia = 0.0;
};

// Lloyd iterations, k-means++ seeding, best of `restarts` by inertia.
// An emptied cluster is re-seeded at the point farthest from its centroid.
KmeansResult kmeans(const Tensor& features, std::int64_t k, std::int64_t restarts,
                    std::uint64_t seed);

// Per-column zero mean and unit variance; constant columns become zero.
Tensor standardize(const Tensor& features);

// K Gaussian blobs with labels; centers uniform in [-center_box, center_box]^D.
Dataset make_blobs(std::int64_t k, std::int64_t per_cluster, std::int64_t d,
                   double center_box, double cluster_std, std::uint64_t seed);

}  // namespace am
