#include "fedsim/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/rng.hpp"

namespace fedsim::preprocess {

namespace {

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

std::vector<std::size_t> class_counts(const std::vector<Sample>& split) {
    std::vector<std::size_t> counts;
    for (const auto& s : split) {
        const auto c = static_cast<std::size_t>(s.label);
        if (c >= counts.size()) counts.resize(c + 1, 0);
        ++counts[c];
    }
    return counts;
}

Sample noisy_replica(const Sample& src, double noise_mean, double noise_std, Rng& rng) {
    Sample r = src;
    for (auto& v : r.features) v += rng.normal(noise_mean, noise_std);
    return r;
}

}  // namespace

std::vector<std::size_t> default_activity_replication() {
    // lying, sitting, standing, walking, running, bicycling
    return {0, 0, 1, 2, 20, 8};
}

ClientDataset partition_client(const ingest::RawClientTable& table, std::uint64_t rng_seed) {
    const std::size_t n = table.rows.size();
    if (n < 5) {
        throw ValidationError("client " + table.client_id + " has " + std::to_string(n) +
                              " rows; cannot populate train/val/test");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(rng_seed);
    rng.shuffle(order);

    const std::size_t n_test = round_half_up(0.2 * static_cast<double>(n));
    const std::size_t rem = n - n_test;
    const std::size_t n_val = round_half_up(0.2 * static_cast<double>(rem));
    const std::size_t n_train = rem - n_val;

    ClientDataset ds;
    ds.client_id = table.client_id;
    auto take = [&](std::size_t begin, std::size_t count, std::vector<Sample>& out) {
        out.reserve(count);
        for (std::size_t i = begin; i < begin + count; ++i) {
            const auto& row = table.rows[order[i]];
            out.push_back(Sample{row.features, row.label});
        }
    };
    take(0, n_train, ds.train);
    take(n_train, n_val, ds.val);
    take(n_train + n_val, n_test, ds.test);
    return ds;
}

FeatureStats compute_local_stats(const ClientDataset& client, std::size_t* all_missing_features) {
    if (client.train.empty()) throw std::runtime_error("empty train split for " + client.client_id);
    const std::size_t dim = client.train.front().features.size();
    FeatureStats st;
    st.scope = StatsScope::Local;
    st.client_id = client.client_id;
    st.count = client.train.size();
    st.mean.assign(dim, 0.0);
    st.stddev.assign(dim, 0.0);

    std::size_t missing_feats = 0;
    for (std::size_t j = 0; j < dim; ++j) {
        double sum = 0.0, sq = 0.0;
        std::size_t n = 0;
        for (const auto& s : client.train) {
            const double v = s.features[j];
            if (std::isnan(v)) continue;
            sum += v;
            sq += v * v;
            ++n;
        }
        if (n == 0) {
            st.mean[j] = 0.0;
            st.stddev[j] = 1.0;
            ++missing_feats;
            continue;
        }
        const double mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
        st.mean[j] = mean;
        st.stddev[j] = std::sqrt(var);
    }
    if (all_missing_features) *all_missing_features = missing_feats;
    return st;
}

FeatureStats aggregate_global_stats(const std::vector<FeatureStats>& stats) {
    if (stats.empty()) throw std::runtime_error("no stats to aggregate");
    const std::size_t dim = stats.front().mean.size();
    double total = 0.0;
    for (const auto& s : stats) {
        if (s.mean.size() != dim || s.stddev.size() != dim) {
            throw std::runtime_error("feature dimension mismatch in stats aggregation");
        }
        total += static_cast<double>(s.count);
    }

    FeatureStats g;
    g.scope = StatsScope::Global;
    g.count = static_cast<std::size_t>(total);
    g.mean.assign(dim, 0.0);
    g.stddev.assign(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (const auto& s : stats) {
            mean += static_cast<double>(s.count) / total * s.mean[j];
        }
        // Law of total variance with population local variances.
        double var = 0.0;
        for (const auto& s : stats) {
            const double w = static_cast<double>(s.count) / total;
            var += w * (s.stddev[j] * s.stddev[j] + s.mean[j] * s.mean[j]);
        }
        var -= mean * mean;
        g.mean[j] = mean;
        g.stddev[j] = std::sqrt(std::max(0.0, var));
    }
    return g;
}

void standardize(ClientDataset& client, const FeatureStats& stats) {
    auto apply = [&](std::vector<Sample>& split) {
        for (auto& s : split) {
            if (s.features.size() != stats.mean.size()) {
                throw std::runtime_error("feature dimension mismatch in standardize");
            }
            for (std::size_t j = 0; j < s.features.size(); ++j) {
                double v = s.features[j];
                if (std::isnan(v)) v = stats.mean[j];
                v -= stats.mean[j];
                if (stats.stddev[j] > 0.0) v /= stats.stddev[j];
                s.features[j] = v;
            }
        }
    };
    apply(client.train);
    apply(client.val);
    apply(client.test);
}

std::vector<Sample> augment_base(const std::vector<Sample>& train, const AugmentationPlan& plan,
                                 std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    std::vector<Sample> out;
    out.reserve(train.size());
    for (const auto& s : train) {
        out.push_back(s);
        const auto c = static_cast<std::size_t>(s.label);
        const std::size_t k = c < plan.replication.size() ? plan.replication[c] : 0;
        for (std::size_t r = 0; r < k; ++r) {
            out.push_back(noisy_replica(s, plan.noise_mean, plan.noise_std, rng));
        }
    }
    return out;
}

std::vector<Sample> augment_balanced(const std::vector<Sample>& train, double noise_mean,
                                     double noise_std, std::uint64_t rng_seed) {
    const auto counts = class_counts(train);
    const std::size_t m = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    Rng rng(rng_seed);
    std::vector<Sample> out;
    out.reserve(train.size());
    for (const auto& s : train) {
        out.push_back(s);
        const std::size_t n_c = counts[static_cast<std::size_t>(s.label)];
        const std::size_t replicas = m / n_c - 1;  // floor(m/n_c) copies in total
        for (std::size_t r = 0; r < replicas; ++r) {
            out.push_back(noisy_replica(s, noise_mean, noise_std, rng));
        }
    }
    return out;
}

CentralTestSet build_fair_test_set(const std::vector<ClientDataset>& clients) {
    CentralTestSet set;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        set.client_ids.push_back(clients[i].client_id);
        for (const auto& s : clients[i].test) {
            set.samples.push_back(s);
            set.source.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return set;
}

HoldoutResult build_holdout_test_set(const std::vector<ClientDataset>& clients, std::size_t k,
                                     std::uint64_t rng_seed) {
    if (k == 0 || k >= clients.size()) {
        throw ValidationError("holdout count k must satisfy 0 < k < client count");
    }
    std::vector<std::size_t> order(clients.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(rng_seed);
    rng.shuffle(order);

    HoldoutResult result;
    result.held_out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    result.remaining.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(result.held_out.begin(), result.held_out.end());
    std::sort(result.remaining.begin(), result.remaining.end());

    for (std::size_t idx : result.held_out) {
        const auto& c = clients[idx];
        const auto tag = static_cast<std::uint32_t>(result.test_set.client_ids.size());
        result.test_set.client_ids.push_back(c.client_id);
        for (const auto* split : {&c.train, &c.val, &c.test}) {
            for (const auto& s : *split) {
                result.test_set.samples.push_back(s);
                result.test_set.source.push_back(tag);
            }
        }
    }
    return result;
}

}  // namespace fedsim::preprocess
