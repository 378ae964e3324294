#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wmc/rng.hpp"
#include "wmc/texture.hpp"

namespace wmc {

struct Vec2 {
    float x = 0.0f;
    float y = 0.0f;
};

inline float dist2d(Vec2 a, Vec2 b) {
    const float dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

struct SceneGenConfig {
    int interior_cells = 8;    // free interior is interior_cells x interior_cells meters
    float cell_m = 1.0f;
    int wall_segments = 5;     // interior wall segments
    float d_min = 2.0f;        // start/goal geodesic distance bounds
    float d_max = 8.0f;
    float spawn_margin = 0.25f;  // clearance from walls for start/goal
    int max_place_retries = 400;
};

// Grid scene: cells are 1 = wall, 0 = free; the outer ring is always wall.
// Geometry (occupancy, start, goal, heading) depends only on scene_seed; all
// appearance (textures, shades) depends only on (texture_seed, split).
struct SceneSpec {
    int grid = 10;  // includes the boundary ring
    float cell = 1.0f;
    std::vector<uint8_t> occ;
    std::vector<int32_t> face_tex;  // (y * grid + x) * 4 + side -> texture idx
    std::vector<TextureSpec> textures;
    std::array<float, 3> floor_shade{0.3f, 0.3f, 0.3f};
    std::array<float, 3> ceil_shade{0.5f, 0.5f, 0.5f};
    Vec2 start;
    float start_heading = 0.0f;
    Vec2 goal;
    uint64_t scene_seed = 0;
    uint64_t texture_seed = 0;
    Split split = Split::train;

    bool occupied(int cx, int cy) const {
        if (cx < 0 || cy < 0 || cx >= grid || cy >= grid) {
            return true;
        }
        return occ[static_cast<size_t>(cy) * grid + cx] != 0;
    }
    bool occupied_at(float x, float y) const {
        return occupied(static_cast<int>(std::floor(x / cell)),
                        static_cast<int>(std::floor(y / cell)));
    }
    float world_size() const { return static_cast<float>(grid) * cell; }
    float diagonal() const { return world_size() * std::sqrt(2.0f); }

    // face sides: 0 = west (-x), 1 = east (+x), 2 = south (-y), 3 = north (+y)
    const TextureSpec& face_texture(int cx, int cy, int side) const;

    std::string to_text() const;
};

SceneSpec build_scene(uint64_t scene_seed, uint64_t texture_seed, Split split,
                      const SceneGenConfig& cfg);

// Dijkstra distance field over a fine subgrid of the free space, 8-connected
// with sqrt(2) diagonal cost. Used for reward shaping and SPL optima.
struct GeodesicField {
    int sub = 4;  // nodes per cell side
    float h = 0.25f;
    int nx = 0, ny = 0;
    std::vector<float> dist;  // +inf where unreachable/occupied

    float at(Vec2 p) const;  // field value + offset to the node center
};

GeodesicField geodesic_field(const SceneSpec& scene, Vec2 target, int sub = 4);

// Exact segment/cell crossing test (corner-safe).
bool line_of_sight(const SceneSpec& scene, Vec2 p, Vec2 q);

// Straight-line-refined shortest path length; symmetric by construction;
// +inf for disconnected points.
float geodesic_distance(const SceneSpec& scene, Vec2 p, Vec2 q, int sub = 4);

}  // namespace wmc
