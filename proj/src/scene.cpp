#include "wmc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "wmc/tensor.hpp"

namespace wmc {

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();

int free_cell_count(const std::vector<uint8_t>& occ) {
    int n = 0;
    for (uint8_t c : occ) {
        n += c == 0;
    }
    return n;
}

// BFS over free cells, 4-connected.
bool connected(const std::vector<uint8_t>& occ, int grid) {
    int start = -1;
    for (int i = 0; i < grid * grid; ++i) {
        if (occ[static_cast<size_t>(i)] == 0) {
            start = i;
            break;
        }
    }
    if (start < 0) {
        return false;
    }
    std::vector<uint8_t> seen(occ.size(), 0);
    std::queue<int> q;
    q.push(start);
    seen[static_cast<size_t>(start)] = 1;
    int visited = 0;
    while (!q.empty()) {
        const int cur = q.front();
        q.pop();
        ++visited;
        const int cx = cur % grid, cy = cur / grid;
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int nx = cx + dx[k], ny = cy + dy[k];
            if (nx < 0 || ny < 0 || nx >= grid || ny >= grid) {
                continue;
            }
            const int idx = ny * grid + nx;
            if (occ[static_cast<size_t>(idx)] == 0 && !seen[static_cast<size_t>(idx)]) {
                seen[static_cast<size_t>(idx)] = 1;
                q.push(idx);
            }
        }
    }
    return visited == free_cell_count(occ);
}

// Position clear of walls with a margin (the four margin corners must be free).
bool position_clear(const SceneSpec& s, Vec2 p, float margin) {
    return !s.occupied_at(p.x - margin, p.y - margin) &&
           !s.occupied_at(p.x + margin, p.y - margin) &&
           !s.occupied_at(p.x - margin, p.y + margin) &&
           !s.occupied_at(p.x + margin, p.y + margin);
}

}  // namespace

const TextureSpec& SceneSpec::face_texture(int cx, int cy, int side) const {
    const size_t idx = (static_cast<size_t>(cy) * grid + cx) * 4 + side;
    return textures[static_cast<size_t>(face_tex[idx])];
}

SceneSpec build_scene(uint64_t scene_seed, uint64_t texture_seed, Split split,
                      const SceneGenConfig& cfg) {
    SceneSpec s;
    s.grid = cfg.interior_cells + 2;
    s.cell = cfg.cell_m;
    s.scene_seed = scene_seed;
    s.texture_seed = texture_seed;
    s.split = split;

    // geometry from scene_seed only
    RngStream geo = RngStream(scene_seed).split("geometry");
    const int g = s.grid;
    s.occ.assign(static_cast<size_t>(g) * g, 0);
    for (int i = 0; i < g; ++i) {
        s.occ[static_cast<size_t>(i)] = 1;                                   // south row
        s.occ[static_cast<size_t>(g - 1) * g + i] = 1;                       // north row
        s.occ[static_cast<size_t>(i) * g] = 1;                               // west col
        s.occ[static_cast<size_t>(i) * g + g - 1] = 1;                       // east col
    }
    int placed = 0;
    int attempts = 0;
    while (placed < cfg.wall_segments && attempts < 200) {
        ++attempts;
        const bool horizontal = geo.bernoulli(0.5);
        const int len = 2 + geo.uniform_int(3);
        const int cx = 1 + geo.uniform_int(g - 2);
        const int cy = 1 + geo.uniform_int(g - 2);
        std::vector<int> cells;
        bool ok = true;
        for (int k = 0; k < len; ++k) {
            const int x = horizontal ? cx + k : cx;
            const int y = horizontal ? cy : cy + k;
            if (x <= 0 || y <= 0 || x >= g - 1 || y >= g - 1) {
                ok = false;
                break;
            }
            cells.push_back(y * g + x);
        }
        if (!ok) {
            continue;
        }
        for (int c : cells) {
            s.occ[static_cast<size_t>(c)] = 1;
        }
        if (!connected(s.occ, g)) {
            for (int c : cells) {
                s.occ[static_cast<size_t>(c)] = 0;
            }
            continue;
        }
        ++placed;
    }

    // appearance from (texture_seed, split) only
    RngStream tex = RngStream(texture_seed).split("textures");
    const int n_tex = 6;
    for (int i = 0; i < n_tex; ++i) {
        const auto family = static_cast<TextureFamily>(i % 4);
        s.textures.push_back(sample_texture(family, split, tex));
    }
    s.face_tex.resize(static_cast<size_t>(g) * g * 4);
    RngStream faces = RngStream(texture_seed).split("faces");
    for (size_t i = 0; i < s.face_tex.size(); ++i) {
        s.face_tex[i] = faces.uniform_int(n_tex);
    }
    // Floor/ceiling shades are style too: sampled from split-disjoint bands so
    // held-out scenes look globally different.
    RngStream shade = RngStream(texture_seed).split("shades");
    const float base = split == Split::train
                           ? static_cast<float>(shade.uniform(0.15, 0.40))
                           : static_cast<float>(shade.uniform(0.55, 0.80));
    const float tint = static_cast<float>(shade.uniform(-0.05, 0.05));
    s.floor_shade = {base + tint, base, base - tint};
    const float cbase = split == Split::train
                            ? static_cast<float>(shade.uniform(0.45, 0.65))
                            : static_cast<float>(shade.uniform(0.20, 0.40));
    s.ceil_shade = {cbase, cbase, cbase};

    // start/goal from scene_seed; geodesic distance within [d_min, d_max]
    RngStream place = RngStream(scene_seed).split("placement");
    const float world = s.world_size();
    bool placed_pair = false;
    for (int attempt = 0; attempt < cfg.max_place_retries; ++attempt) {
        Vec2 a{static_cast<float>(place.uniform(0, world)),
               static_cast<float>(place.uniform(0, world))};
        Vec2 b{static_cast<float>(place.uniform(0, world)),
               static_cast<float>(place.uniform(0, world))};
        if (!position_clear(s, a, cfg.spawn_margin) ||
            !position_clear(s, b, cfg.spawn_margin)) {
            continue;
        }
        const float d = geodesic_distance(s, a, b);
        if (d < cfg.d_min || d > cfg.d_max || !std::isfinite(d)) {
            continue;
        }
        s.start = a;
        s.goal = b;
        s.start_heading =
            static_cast<float>(place.uniform(-3.14159265358979, 3.14159265358979));
        placed_pair = true;
        break;
    }
    check(placed_pair, "build_scene: unsatisfiable start/goal placement after retries");
    return s;
}

float GeodesicField::at(Vec2 p) const {
    int ix = static_cast<int>(std::floor(p.x / h));
    int iy = static_cast<int>(std::floor(p.y / h));
    ix = std::clamp(ix, 0, nx - 1);
    iy = std::clamp(iy, 0, ny - 1);
    const float d = dist[static_cast<size_t>(iy) * nx + ix];
    if (!std::isfinite(d)) {
        return d;
    }
    const Vec2 center{(static_cast<float>(ix) + 0.5f) * h,
                      (static_cast<float>(iy) + 0.5f) * h};
    return d + dist2d(p, center);
}

GeodesicField geodesic_field(const SceneSpec& scene, Vec2 target, int sub) {
    GeodesicField f;
    f.sub = sub;
    f.h = scene.cell / static_cast<float>(sub);
    f.nx = scene.grid * sub;
    f.ny = scene.grid * sub;
    f.dist.assign(static_cast<size_t>(f.nx) * f.ny, kInf);

    auto node_free = [&](int ix, int iy) {
        if (ix < 0 || iy < 0 || ix >= f.nx || iy >= f.ny) {
            return false;
        }
        return !scene.occupied(ix / sub, iy / sub);
    };

    const int tx = std::clamp(static_cast<int>(std::floor(target.x / f.h)), 0, f.nx - 1);
    const int ty = std::clamp(static_cast<int>(std::floor(target.y / f.h)), 0, f.ny - 1);
    if (!node_free(tx, ty)) {
        return f;
    }

    using Item = std::pair<float, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    auto push = [&](int ix, int iy, float d) {
        const size_t idx = static_cast<size_t>(iy) * f.nx + ix;
        if (d < f.dist[idx]) {
            f.dist[idx] = d;
            pq.emplace(d, static_cast<int>(idx));
        }
    };
    push(tx, ty, 0.0f);
    const float diag = f.h * std::sqrt(2.0f);
    while (!pq.empty()) {
        const auto [d, idx] = pq.top();
        pq.pop();
        if (d > f.dist[static_cast<size_t>(idx)]) {
            continue;
        }
        const int ix = idx % f.nx, iy = idx / f.nx;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) {
                    continue;
                }
                const int nx2 = ix + dx, ny2 = iy + dy;
                if (!node_free(nx2, ny2)) {
                    continue;
                }
                // no corner cutting on diagonals
                if (dx != 0 && dy != 0 &&
                    (!node_free(ix + dx, iy) || !node_free(ix, iy + dy))) {
                    continue;
                }
                push(nx2, ny2, d + ((dx != 0 && dy != 0) ? diag : f.h));
            }
        }
    }
    return f;
}

bool line_of_sight(const SceneSpec& scene, Vec2 p, Vec2 q) {
    if (scene.occupied_at(p.x, p.y) || scene.occupied_at(q.x, q.y)) {
        return false;
    }
    // Amanatides-Woo traversal of cells crossed by segment p -> q
    const float dx = q.x - p.x, dy = q.y - p.y;
    if (std::fabs(dx) < 1e-9f && std::fabs(dy) < 1e-9f) {
        return true;
    }
    int cx = static_cast<int>(std::floor(p.x / scene.cell));
    int cy = static_cast<int>(std::floor(p.y / scene.cell));
    const int gx = static_cast<int>(std::floor(q.x / scene.cell));
    const int gy = static_cast<int>(std::floor(q.y / scene.cell));
    const int step_x = dx > 0 ? 1 : -1;
    const int step_y = dy > 0 ? 1 : -1;
    const float t_delta_x = dx != 0 ? scene.cell / std::fabs(dx) : kInf;
    const float t_delta_y = dy != 0 ? scene.cell / std::fabs(dy) : kInf;
    float t_max_x =
        dx != 0 ? ((dx > 0 ? (static_cast<float>(cx) + 1.0f) * scene.cell
                           : static_cast<float>(cx) * scene.cell) -
                   p.x) /
                      dx
                : kInf;
    float t_max_y =
        dy != 0 ? ((dy > 0 ? (static_cast<float>(cy) + 1.0f) * scene.cell
                           : static_cast<float>(cy) * scene.cell) -
                   p.y) /
                      dy
                : kInf;
    const int guard_max = 4 * scene.grid;
    for (int guard = 0; guard < guard_max; ++guard) {
        if (cx == gx && cy == gy) {
            return true;
        }
        if (t_max_x < t_max_y) {
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            cy += step_y;
            t_max_y += t_delta_y;
        }
        if (scene.occupied(cx, cy)) {
            return false;
        }
    }
    return cx == gx && cy == gy;
}

float geodesic_distance(const SceneSpec& scene, Vec2 p, Vec2 q, int sub) {
    if (scene.occupied_at(p.x, p.y) || scene.occupied_at(q.x, q.y)) {
        return kInf;
    }
    const float euclid = dist2d(p, q);
    if (euclid < 1e-9f) {
        return 0.0f;
    }
    if (line_of_sight(scene, p, q)) {
        return euclid;
    }
    // canonical order makes d(p,q) bit-identical to d(q,p)
    Vec2 a = p, b = q;
    if (b.x < a.x || (b.x == a.x && b.y < a.y)) {
        std::swap(a, b);
    }
    GeodesicField f = geodesic_field(scene, a, sub);
    const float d = f.at(b);
    return d;
}

std::string SceneSpec::to_text() const {
    std::ostringstream os;
    os << "scene_seed=" << scene_seed << " texture_seed=" << texture_seed
       << " split=" << split_name(split) << " grid=" << grid << " cell=" << cell << "\n";
    for (int y = grid - 1; y >= 0; --y) {
        for (int x = 0; x < grid; ++x) {
            os << (occupied(x, y) ? '#' : '.');
        }
        os << "\n";
    }
    os << "start=(" << start.x << "," << start.y << ") heading=" << start_heading
       << " goal=(" << goal.x << "," << goal.y << ")\n";
    for (const auto& t : textures) {
        os << "texture " << t.to_text() << "\n";
    }
    return os.str();
}

}  // namespace wmc
