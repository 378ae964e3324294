#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "wmc/scene.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

struct EnvConfig {
    int img_h = 64;
    int img_w = 64;
    float fov_deg = 90.0f;
    float wall_h = 1.0f;
    float cam_h = 0.5f;
    float agent_radius = 0.15f;
    float max_rotation = 0.78539816339744831f / 1.0f;  // pi/4
    float max_forward = 0.25f;
    float success_radius = 0.36f;
    int max_steps = 200;
    float progress_scale = 1.0f;
    float success_bonus = 10.0f;
    float step_cost = 0.05f;
    SceneGenConfig scene;
};

struct AgentState {
    Vec2 pos;
    float heading = 0.0f;  // wrapped to (-pi, pi]
    float lin_vel = 0.0f;  // previous applied forward distance
    float ang_vel = 0.0f;  // previous applied rotation
};

struct EnvAction {
    float rotation = 0.0f;  // radians, clamped to [-pi/4, pi/4]
    float forward = 0.0f;   // meters, clamped to [0, 0.25]
};

struct EnvObservation {
    Tensor32 rgb;    // [H, W, 3] in [0,1]
    Tensor32 depth;  // [H, W] meters, perpendicular-corrected
    std::array<float, 6> task_vec{};  // goal (agent frame, 2), position (2), vel (2)
};

struct EnvStepResult {
    EnvObservation obs;
    float reward = 0.0f;
    bool done = false;
    bool success = false;
};

// One recorded step: the observation seen before acting, the action taken,
// and the reward received.
struct EpisodeStep {
    EnvObservation obs;
    EnvAction action;
    float reward = 0.0f;
    bool done = false;
};

struct EpisodeRecord {
    std::vector<EpisodeStep> steps;
    uint64_t scene_seed = 0;
    uint64_t texture_seed = 0;
    Split split = Split::train;
    bool success = false;
    float path_length = 0.0f;
    float geodesic_start = 0.0f;  // shortest-path optimum at spawn

    int length() const { return static_cast<int>(steps.size()); }
};

void render_view(const SceneSpec& scene, const AgentState& agent, const EnvConfig& cfg,
                 Tensor32& rgb, Tensor32& depth);

class PointGoalEnv {
public:
    explicit PointGoalEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {}

    EnvObservation reset(uint64_t scene_seed, uint64_t texture_seed, Split split);
    EnvStepResult step(const EnvAction& action);

    bool episode_active() const { return active_; }
    const SceneSpec& scene() const { return scene_; }
    const AgentState& agent() const { return agent_; }
    const EnvConfig& config() const { return cfg_; }
    int steps_taken() const { return steps_; }
    float path_length() const { return path_len_; }
    float geodesic_start() const { return geodesic_start_; }
    float geodesic_to_goal(Vec2 p) const { return goal_field_.at(p); }

private:
    EnvObservation observe() const;

    EnvConfig cfg_;
    SceneSpec scene_;
    GeodesicField goal_field_;
    AgentState agent_;
    bool active_ = false;
    int steps_ = 0;
    float path_len_ = 0.0f;
    float geodesic_start_ = 0.0f;
    float prev_geodesic_ = 0.0f;
};

// Texture randomization as intervention: two episodes with identical geometry,
// start pose and action sequence under different texture seeds. Trajectories,
// depths, rewards and task vectors match step for step; only rgb differs.
std::pair<EpisodeRecord, EpisodeRecord> replay_actions(
    const EnvConfig& cfg, const std::vector<EnvAction>& actions, uint64_t scene_seed,
    uint64_t texture_seed_a, uint64_t texture_seed_b, Split split);

float wrap_angle(float a);

}  // namespace wmc
