#include "qs/selection.hpp"

#include <cmath>
#include <limits>

#include "qs/errors.hpp"
#include "qs/rng.hpp"

namespace qs::selection {

namespace {

struct XY {
    double x, y;
};

double dist2(const XY& a, const XY& b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

std::vector<XY> features(const std::vector<FeaturePoint>& points, bool standardize) {
    std::vector<XY> f(points.size());
    for (size_t i = 0; i < points.size(); ++i) f[i] = {points[i].pga, points[i].pgv};
    if (!standardize || points.size() < 2) return f;

    double mx = 0, my = 0;
    for (const auto& p : f) { mx += p.x; my += p.y; }
    mx /= f.size();
    my /= f.size();
    double vx = 0, vy = 0;
    for (const auto& p : f) {
        vx += (p.x - mx) * (p.x - mx);
        vy += (p.y - my) * (p.y - my);
    }
    double sx = std::sqrt(vx / f.size());
    double sy = std::sqrt(vy / f.size());
    if (sx <= 0.0) sx = 1.0;
    if (sy <= 0.0) sy = 1.0;
    for (auto& p : f) { p.x = (p.x - mx) / sx; p.y = (p.y - my) / sy; }
    return f;
}

std::vector<size_t> fps_from_start(const std::vector<XY>& f, size_t k, size_t start) {
    std::vector<size_t> selected;
    selected.reserve(k);
    selected.push_back(start);

    std::vector<char> taken(f.size(), 0);
    taken[start] = 1;
    std::vector<double> min_d2(f.size(), std::numeric_limits<double>::infinity());
    while (selected.size() < k) {
        size_t last = selected.back();
        size_t best = f.size();
        double best_d2 = -1.0;
        for (size_t i = 0; i < f.size(); ++i) {
            double d2 = dist2(f[i], f[last]);
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (!taken[i] && min_d2[i] > best_d2) { // strict: ties keep the lowest index
                best_d2 = min_d2[i];
                best = i;
            }
        }
        taken[best] = 1;
        selected.push_back(best);
    }
    return selected;
}

size_t max_norm_index(const std::vector<XY>& f) {
    size_t best = 0;
    double best_n = -1.0;
    for (size_t i = 0; i < f.size(); ++i) {
        double n = f[i].x * f[i].x + f[i].y * f[i].y;
        if (n > best_n) {
            best_n = n;
            best = i;
        }
    }
    return best;
}

} // namespace

std::vector<size_t> select_fps(const std::vector<FeaturePoint>& points,
                               size_t k, bool standardize) {
    if (k < 1 || k > points.size())
        throw Error(ErrorClass::Domain, "select_fps: k outside [1, pool size]");
    auto f = features(points, standardize);
    return fps_from_start(f, k, max_norm_index(f));
}

std::vector<size_t> select_fps_seeded(const std::vector<FeaturePoint>& points,
                                      size_t k, bool standardize,
                                      uint64_t start_seed) {
    if (k < 1 || k > points.size())
        throw Error(ErrorClass::Domain, "select_fps_seeded: k outside [1, pool size]");
    auto f = features(points, standardize);
    Rng rng(derive_seed({start_seed, 0x465053ULL /*"FPS"*/}));
    size_t start = static_cast<size_t>(rng.integer(points.size()));
    return fps_from_start(f, k, start);
}

void SelectionPlan::validate(size_t pool_size) const {
    if (n_source_train < 1 || n_validation < 0)
        throw Error(ErrorClass::Config, "selection: invalid pool sizes");
    if (static_cast<size_t>(n_source_train) + static_cast<size_t>(n_validation) > pool_size)
        throw Error(ErrorClass::Config,
                    "selection: pool too small for source_train + validation");
    for (int n : target_sizes)
        if (n < 1 || n > n_source_train)
            throw Error(ErrorClass::Config,
                        "selection: target size must be in [1, n_source_train]");
    if (replicate_seeds.empty())
        throw Error(ErrorClass::Config, "selection: no replicate seeds");
}

PoolPartition partition_pools(const std::vector<FeaturePoint>& points,
                              const SelectionPlan& plan) {
    plan.validate(points.size());

    PoolPartition part;
    part.source_train = select_fps(points, static_cast<size_t>(plan.n_source_train), true);

    // Validation pool: everything not taken for source training.
    std::vector<char> taken(points.size(), 0);
    for (size_t i : part.source_train) taken[i] = 1;
    std::vector<size_t> remaining_ids;
    std::vector<FeaturePoint> remaining;
    for (size_t i = 0; i < points.size(); ++i) {
        if (!taken[i]) {
            remaining_ids.push_back(i);
            remaining.push_back(points[i]);
        }
    }
    if (plan.n_validation > 0) {
        auto val_local = select_fps(remaining, static_cast<size_t>(plan.n_validation), true);
        part.validation.reserve(val_local.size());
        for (size_t j : val_local) part.validation.push_back(remaining_ids[j]);
    }

    // Target training sets are re-sampled from the source pool.
    std::vector<FeaturePoint> source_pool;
    source_pool.reserve(part.source_train.size());
    for (size_t i : part.source_train) source_pool.push_back(points[i]);

    part.target_train.resize(plan.target_sizes.size());
    for (size_t s = 0; s < plan.target_sizes.size(); ++s) {
        part.target_train[s].resize(plan.replicate_seeds.size());
        for (size_t r = 0; r < plan.replicate_seeds.size(); ++r) {
            auto local = select_fps_seeded(source_pool,
                                           static_cast<size_t>(plan.target_sizes[s]),
                                           true, plan.replicate_seeds[r]);
            auto& out = part.target_train[s][r];
            out.reserve(local.size());
            for (size_t j : local) out.push_back(part.source_train[j]);
        }
    }
    return part;
}

} // namespace qs::selection
