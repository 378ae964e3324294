#include "wmc/env.hpp"

#include <algorithm>
#include <cmath>

namespace wmc {

namespace {

constexpr float kPi = 3.14159265358979323846f;

struct RayHit {
    float t = 0.0f;  // ray length to the hit
    int cell_x = 0, cell_y = 0;
    int side = 0;   // 0 west, 1 east, 2 south, 3 north (face of the solid cell)
    float u = 0.0f; // coordinate along the face in [0,1)
};

// DDA raycast against solid cells; the scene border guarantees a hit.
RayHit raycast(const SceneSpec& scene, Vec2 origin, float dir_x, float dir_y) {
    int cx = static_cast<int>(std::floor(origin.x / scene.cell));
    int cy = static_cast<int>(std::floor(origin.y / scene.cell));
    const int step_x = dir_x > 0 ? 1 : -1;
    const int step_y = dir_y > 0 ? 1 : -1;
    const float inf = 1e30f;
    const float t_delta_x = dir_x != 0 ? scene.cell / std::fabs(dir_x) : inf;
    const float t_delta_y = dir_y != 0 ? scene.cell / std::fabs(dir_y) : inf;
    float t_max_x =
        dir_x != 0
            ? ((dir_x > 0 ? (static_cast<float>(cx) + 1.0f) * scene.cell
                          : static_cast<float>(cx) * scene.cell) -
               origin.x) /
                  dir_x
            : inf;
    float t_max_y =
        dir_y != 0
            ? ((dir_y > 0 ? (static_cast<float>(cy) + 1.0f) * scene.cell
                          : static_cast<float>(cy) * scene.cell) -
               origin.y) /
                  dir_y
            : inf;
    RayHit hit;
    for (int guard = 0; guard < 4 * scene.grid; ++guard) {
        bool crossed_x;
        if (t_max_x < t_max_y) {
            hit.t = t_max_x;
            cx += step_x;
            t_max_x += t_delta_x;
            crossed_x = true;
        } else {
            hit.t = t_max_y;
            cy += step_y;
            t_max_y += t_delta_y;
            crossed_x = false;
        }
        if (scene.occupied(cx, cy)) {
            hit.cell_x = cx;
            hit.cell_y = cy;
            if (crossed_x) {
                hit.side = step_x > 0 ? 0 : 1;  // entered from west face if moving +x
                const float y = origin.y + hit.t * dir_y;
                hit.u = y / scene.cell - std::floor(y / scene.cell);
            } else {
                hit.side = step_y > 0 ? 2 : 3;
                const float x = origin.x + hit.t * dir_x;
                hit.u = x / scene.cell - std::floor(x / scene.cell);
            }
            return hit;
        }
    }
    // unreachable with a closed border; return a far hit to stay defined
    hit.t = scene.diagonal();
    return hit;
}

}  // namespace

float wrap_angle(float a) {
    while (a > kPi) {
        a -= 2.0f * kPi;
    }
    while (a <= -kPi) {
        a += 2.0f * kPi;
    }
    return a;
}

namespace {

// Moves `center` by `delta` along one axis, stopping the disc's leading edge
// at the first blocked cell boundary. Overlap tests shrink the disc by a
// contact epsilon so that resting exactly on a boundary (up to float rounding)
// neither counts as overlap nor lets the boundary scan start one cell short.
constexpr float kContactEps = 1e-4f;

float slide_axis(const SceneSpec& s, float center, float delta, float r, float other,
                 bool axis_x) {
    if (delta == 0.0f) {
        return center;
    }
    const float cell = s.cell;
    const int o_lo = static_cast<int>(std::floor((other - r + kContactEps) / cell));
    const int o_hi = static_cast<int>(std::ceil((other + r - kContactEps) / cell)) - 1;
    auto blocked = [&](int c) {
        for (int o = o_lo; o <= o_hi; ++o) {
            if (axis_x ? s.occupied(c, o) : s.occupied(o, c)) {
                return true;
            }
        }
        return false;
    };
    if (delta > 0.0f) {
        const float edge0 = center + r;
        float target = edge0 + delta;
        const int c0 = static_cast<int>(std::ceil((edge0 - kContactEps) / cell));
        for (int c = c0; static_cast<float>(c) * cell < target; ++c) {
            if (blocked(c)) {
                target = static_cast<float>(c) * cell;
                break;
            }
        }
        return target - r;
    }
    const float edge0 = center - r;
    float target = edge0 + delta;
    const int m0 = static_cast<int>(std::floor((edge0 + kContactEps) / cell));
    for (int m = m0; static_cast<float>(m) * cell > target; --m) {
        if (blocked(m - 1)) {
            target = static_cast<float>(m) * cell;
            break;
        }
    }
    return target + r;
}

}  // namespace

void render_view(const SceneSpec& scene, const AgentState& agent, const EnvConfig& cfg,
                 Tensor32& rgb, Tensor32& depth) {
    const int h = cfg.img_h, w = cfg.img_w;
    if (rgb.shape != Shape{h, w, 3}) {
        rgb = Tensor32({h, w, 3});
    }
    if (depth.shape != Shape{h, w}) {
        depth = Tensor32({h, w});
    }
    const float focal = (static_cast<float>(w) / 2.0f) /
                        std::tan(cfg.fov_deg * kPi / 180.0f / 2.0f);
    const float fwd_x = std::cos(agent.heading);
    const float fwd_y = std::sin(agent.heading);
    const float right_x = std::sin(agent.heading);
    const float right_y = -std::cos(agent.heading);
    const float above = cfg.wall_h - cfg.cam_h;  // camera to ceiling plane
    const float below = cfg.cam_h;               // camera to floor plane

    for (int x = 0; x < w; ++x) {
        const float tan_b = (static_cast<float>(x) + 0.5f - static_cast<float>(w) / 2.0f) /
                            focal;
        const float inv_cos_b = std::sqrt(1.0f + tan_b * tan_b);
        const float dir_x = fwd_x + tan_b * right_x;
        const float dir_y = fwd_y + tan_b * right_y;
        // dir is unnormalized with |dir| = 1/cos(beta); raycast with the
        // normalized direction, then z = t_ray * cos(beta).
        const float norm = inv_cos_b;
        const RayHit hit = raycast(scene, agent.pos, dir_x / norm, dir_y / norm);
        const float z_wall = hit.t / inv_cos_b;
        static const TextureSpec fallback_tex{};
        const TextureSpec& tex = scene.textures.empty()
                                     ? fallback_tex
                                     : scene.face_texture(hit.cell_x, hit.cell_y, hit.side);

        const float center = static_cast<float>(h) / 2.0f;
        const float top_f = center - focal * above / z_wall;
        const float bot_f = center + focal * below / z_wall;
        for (int y = 0; y < h; ++y) {
            const float yc = static_cast<float>(y) + 0.5f;
            float* px = rgb.data() + (static_cast<int64_t>(y) * w + x) * 3;
            float z;
            if (yc < top_f) {
                // ceiling
                const float dy = center - yc;
                z = above * focal / dy;
                px[0] = scene.ceil_shade[0];
                px[1] = scene.ceil_shade[1];
                px[2] = scene.ceil_shade[2];
            } else if (yc >= bot_f) {
                // floor
                const float dy = yc - center;
                z = below * focal / dy;
                px[0] = scene.floor_shade[0];
                px[1] = scene.floor_shade[1];
                px[2] = scene.floor_shade[2];
            } else {
                z = z_wall;
                const float v = (yc - top_f) / std::max(1e-6f, bot_f - top_f);
                const auto c = tex.sample(hit.u, v);
                px[0] = c[0];
                px[1] = c[1];
                px[2] = c[2];
            }
            depth.data()[static_cast<int64_t>(y) * w + x] = z;
        }
    }
}

EnvObservation PointGoalEnv::observe() const {
    EnvObservation obs;
    render_view(scene_, agent_, cfg_, obs.rgb, obs.depth);
    const float dx = scene_.goal.x - agent_.pos.x;
    const float dy = scene_.goal.y - agent_.pos.y;
    const float c = std::cos(agent_.heading), s = std::sin(agent_.heading);
    obs.task_vec = {c * dx + s * dy, -s * dx + c * dy, agent_.pos.x, agent_.pos.y,
                    agent_.lin_vel, agent_.ang_vel};
    return obs;
}

EnvObservation PointGoalEnv::reset(uint64_t scene_seed, uint64_t texture_seed,
                                   Split split) {
    scene_ = build_scene(scene_seed, texture_seed, split, cfg_.scene);
    goal_field_ = geodesic_field(scene_, scene_.goal);
    agent_.pos = scene_.start;
    agent_.heading = scene_.start_heading;
    agent_.lin_vel = 0.0f;
    agent_.ang_vel = 0.0f;
    steps_ = 0;
    path_len_ = 0.0f;
    geodesic_start_ = geodesic_distance(scene_, scene_.start, scene_.goal);
    prev_geodesic_ = goal_field_.at(agent_.pos);
    active_ = true;
    return observe();
}

EnvStepResult PointGoalEnv::step(const EnvAction& action) {
    check(active_, "env.step called after episode end");
    const float rot = std::clamp(action.rotation, -cfg_.max_rotation, cfg_.max_rotation);
    const float fwd = std::clamp(action.forward, 0.0f, cfg_.max_forward);
    agent_.heading = wrap_angle(agent_.heading + rot);

    // axis-separated slide-to-contact against the (axis-aligned) wall grid
    const float r = cfg_.agent_radius;
    const Vec2 before = agent_.pos;
    const float dx = fwd * std::cos(agent_.heading);
    const float dy = fwd * std::sin(agent_.heading);
    agent_.pos.x = slide_axis(scene_, agent_.pos.x, dx, r, agent_.pos.y, true);
    agent_.pos.y = slide_axis(scene_, agent_.pos.y, dy, r, agent_.pos.x, false);
    agent_.lin_vel = fwd;
    agent_.ang_vel = rot;
    path_len_ += dist2d(before, agent_.pos);
    steps_ += 1;

    const float geod = goal_field_.at(agent_.pos);
    const bool success = dist2d(agent_.pos, scene_.goal) <= cfg_.success_radius;
    float reward = cfg_.progress_scale * (prev_geodesic_ - geod) - cfg_.step_cost;
    if (success) {
        reward += cfg_.success_bonus;
    }
    prev_geodesic_ = geod;

    EnvStepResult result;
    result.success = success;
    result.done = success || steps_ >= cfg_.max_steps;
    result.reward = reward;
    result.obs = observe();
    if (result.done) {
        active_ = false;
    }
    return result;
}

std::pair<EpisodeRecord, EpisodeRecord> replay_actions(
    const EnvConfig& cfg, const std::vector<EnvAction>& actions, uint64_t scene_seed,
    uint64_t texture_seed_a, uint64_t texture_seed_b, Split split) {
    check(!actions.empty(), "replay_actions: empty action sequence");
    auto run = [&](uint64_t texture_seed) {
        PointGoalEnv env(cfg);
        EpisodeRecord ep;
        ep.scene_seed = scene_seed;
        ep.texture_seed = texture_seed;
        ep.split = split;
        EnvObservation obs = env.reset(scene_seed, texture_seed, split);
        ep.geodesic_start = env.geodesic_start();
        for (size_t i = 0; i < actions.size(); ++i) {
            check(env.episode_active(),
                  "replay_actions: episode terminated before the action sequence ended");
            EpisodeStep step;
            step.obs = std::move(obs);
            step.action = actions[i];
            auto res = env.step(actions[i]);
            step.reward = res.reward;
            step.done = res.done;
            ep.steps.push_back(std::move(step));
            obs = std::move(res.obs);
            if (res.done) {
                ep.success = res.success;
                check(i + 1 == actions.size(),
                      "replay_actions: action sequence continues past episode end");
            }
        }
        ep.path_length = env.path_length();
        return ep;
    };
    return {run(texture_seed_a), run(texture_seed_b)};
}

}  // namespace wmc
