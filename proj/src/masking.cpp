#include "tcjepa/masking.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tcjepa {

std::vector<int> MaskSpec::target_union() const {
    std::set<int> u;
    for (const auto& b : target_blocks) u.insert(b.begin(), b.end());
    return {u.begin(), u.end()};
}

namespace {

struct Rect {
    int r0, c0, h, w;
};

std::vector<int> rect_indices(const Rect& r, GridShape grid) {
    std::vector<int> idx;
    idx.reserve(size_t(r.h) * r.w);
    for (int i = r.r0; i < r.r0 + r.h; ++i)
        for (int j = r.c0; j < r.c0 + r.w; ++j) idx.push_back(i * grid.cols + j);
    return idx;
}

// dimensions = round(sqrt(area*aspect)), round(sqrt(area/aspect)), clamped
Rect sample_rect(GridShape grid, double scale_min, double scale_max,
                 double aspect_min, double aspect_max, Rng& rng) {
    double area = rng.uniform(scale_min, scale_max) * grid.num_patches();
    double aspect = rng.uniform(aspect_min, aspect_max);
    int h = int(std::lround(std::sqrt(area * aspect)));
    int w = int(std::lround(std::sqrt(area / aspect)));
    h = std::clamp(h, 1, grid.rows);
    w = std::clamp(w, 1, grid.cols);
    int r0 = int(rng.uniform_int(uint64_t(grid.rows - h + 1)));
    int c0 = int(rng.uniform_int(uint64_t(grid.cols - w + 1)));
    return {r0, c0, h, w};
}

}  // namespace

MaskSpec sample_mask(const MaskingConfig& cfg, GridShape grid, Rng& rng) {
    if (grid.rows < 1 || grid.cols < 1) throw DomainError("sample_mask: empty grid");
    for (int attempt = 0; attempt < cfg.retry_budget; ++attempt) {
        MaskSpec spec;
        spec.grid = grid;
        std::set<int> target_set;
        for (int t = 0; t < cfg.num_targets; ++t) {
            Rect r = sample_rect(grid, cfg.target_scale_min, cfg.target_scale_max,
                                 cfg.target_aspect_min, cfg.target_aspect_max, rng);
            auto idx = rect_indices(r, grid);
            target_set.insert(idx.begin(), idx.end());
            spec.target_blocks.push_back(std::move(idx));
        }
        Rect ctx = sample_rect(grid, cfg.context_scale_min, cfg.context_scale_max,
                               1.0, 1.0, rng);
        for (int i : rect_indices(ctx, grid))
            if (!target_set.count(i)) spec.context_indices.push_back(i);
        if (!spec.context_indices.empty()) return spec;
    }
    throw SamplingError("sample_mask: retry budget exhausted (context always empty); "
                        "masking config infeasible for this grid");
}

std::vector<std::string> validate_mask(const MaskSpec& spec) {
    std::vector<std::string> v;
    const GridShape g = spec.grid;
    auto in_grid = [&](int i) { return i >= 0 && i < g.num_patches(); };

    if (spec.context_indices.empty()) v.push_back("context is empty");
    if (!std::is_sorted(spec.context_indices.begin(), spec.context_indices.end()))
        v.push_back("context indices not sorted");
    for (int i : spec.context_indices)
        if (!in_grid(i)) v.push_back("context index out of grid");

    std::set<int> target_set;
    for (size_t b = 0; b < spec.target_blocks.size(); ++b) {
        const auto& blk = spec.target_blocks[b];
        std::string tag = "target block " + std::to_string(b);
        if (blk.empty()) {
            v.push_back(tag + " is empty");
            continue;
        }
        if (!std::is_sorted(blk.begin(), blk.end())) v.push_back(tag + " not sorted");
        bool ok = true;
        for (int i : blk)
            if (!in_grid(i)) ok = false;
        if (!ok) {
            v.push_back(tag + " index out of grid");
            continue;
        }
        // solid axis-aligned rectangle check
        int rmin = g.rows, rmax = -1, cmin = g.cols, cmax = -1;
        for (int i : blk) {
            rmin = std::min(rmin, i / g.cols);
            rmax = std::max(rmax, i / g.cols);
            cmin = std::min(cmin, i % g.cols);
            cmax = std::max(cmax, i % g.cols);
        }
        size_t expect = size_t(rmax - rmin + 1) * size_t(cmax - cmin + 1);
        std::set<int> blkset(blk.begin(), blk.end());
        if (blkset.size() != blk.size()) v.push_back(tag + " has duplicate indices");
        if (blkset.size() != expect) v.push_back(tag + " is not a solid rectangle");
        target_set.insert(blk.begin(), blk.end());
    }
    for (int i : spec.context_indices)
        if (target_set.count(i))
            v.push_back("context overlaps targets at patch " + std::to_string(i));
    return v;
}

}  // namespace tcjepa
