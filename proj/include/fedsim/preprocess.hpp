#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedsim/ingest.hpp"
#include "fedsim/types.hpp"

namespace fedsim::preprocess {

enum class AugmentationMode { None, Base, Balanced };

struct AugmentationPlan {
    AugmentationMode mode = AugmentationMode::None;
    // Extra noisy replicas per original sample, by class index (base mode).
    std::vector<std::size_t> replication;
    double noise_mean = 0.0;
    double noise_std = 1e-4;
};

// Default base-mode replication for the six activities: running x20,
// bicycling x8, standing x1, walking x2 (class order: lying, sitting,
// standing, walking, running, bicycling).
std::vector<std::size_t> default_activity_replication();

// 64-16-20% shuffled split: 80/20 applied twice with round-half-up.
// Throws on tables with fewer than 5 rows.
ClientDataset partition_client(const ingest::RawClientTable& table, std::uint64_t rng_seed);

// Per-feature mean/std over non-missing train entries, population convention.
// Features with no observed value default to mean 0, std 1 (counted in
// `all_missing_features`).
FeatureStats compute_local_stats(const ClientDataset& client, std::size_t* all_missing_features = nullptr);

// Count-weighted mean and law-of-total-variance pooling; equals the stats of
// the concatenated data exactly.
FeatureStats aggregate_global_stats(const std::vector<FeatureStats>& stats);

// Standardizes all three splits in place with the given stats: missing values
// are imputed with the feature mean (hence 0 after scaling), then
// x -> (x - mean)/std; zero-std features only get centered.
void standardize(ClientDataset& client, const FeatureStats& stats);

// Base augmentation: each sample of class c gains replication[c] noisy
// replicas, so the class count becomes n_c * (1 + k_c).
std::vector<Sample> augment_base(const std::vector<Sample>& train, const AugmentationPlan& plan,
                                 std::uint64_t rng_seed);

// Balanced augmentation: with m the most common class count on this client,
// each class-c sample gains floor(m/n_c) - 1 replicas, giving a final count
// of n_c * floor(m/n_c) <= m. Absent classes stay absent.
std::vector<Sample> augment_balanced(const std::vector<Sample>& train, double noise_mean,
                                     double noise_std, std::uint64_t rng_seed);

// Concatenation of every client's local test split, tagged by source client.
CentralTestSet build_fair_test_set(const std::vector<ClientDataset>& clients);

// Removes k seed-chosen clients from the training pool; their entire data
// (all splits) forms the central test set.
struct HoldoutResult {
    CentralTestSet test_set;
    std::vector<std::size_t> held_out;   // indices into the input vector
    std::vector<std::size_t> remaining;  // indices of the surviving pool
};
HoldoutResult build_holdout_test_set(const std::vector<ClientDataset>& clients, std::size_t k,
                                     std::uint64_t rng_seed);

}  // namespace fedsim::preprocess
