#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "wmc/env.hpp"
#include "wmc/rng.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

// B time-contiguous windows of length L, each lying inside one episode.
// Action-replay partners, when stored and alive, ride along per row.
struct SequenceBatch {
    int b = 0, l = 0, h = 0, w = 0;
    Tensor32 rgb;      // [B, L, H, W, 3]
    Tensor32 depth;    // [B, L, H, W]
    Tensor32 task;     // [B, L, 6]
    Tensor32 action;   // [B, L, 2]
    Tensor32 reward;   // [B, L]
    Tensor32 done;     // [B, L]
    Tensor32 partner_rgb;             // [B, L, H, W, 3]; valid where partner_present
    std::vector<uint8_t> partner_present;  // [B]
};

// FIFO experience store. Observations are quantized (rgb u8, depth u16 over
// [0, depth_max]) to keep desk-scale runs inside laptop RAM.
class ReplayBuffer {
public:
    ReplayBuffer(int64_t capacity_steps, float depth_max)
        : capacity_(capacity_steps), depth_max_(depth_max) {}

    // Returns the stored episode id. partner_id links action-replay pairs.
    int64_t add_episode(const EpisodeRecord& episode, int64_t partner_id = -1);

    int64_t total_steps() const;
    size_t num_episodes() const;
    int64_t capacity() const { return capacity_; }

    bool can_sample(int length) const;
    SequenceBatch sample_sequences(int b, int l, RngStream& rng) const;

    // Indices {0, stride, 2*stride, ...} below episode_len.
    static std::vector<int> mine_negatives(int episode_len, int stride);

    // Episode ids currently stored, oldest first (for tests).
    std::vector<int64_t> episode_ids() const;
    int episode_length(int64_t id) const;

private:
    struct StoredStep {
        std::vector<uint8_t> rgb;
        std::vector<uint16_t> depth;
        std::array<float, 6> task;
        EnvAction action;
        float reward = 0.0f;
        bool done = false;
    };
    struct StoredEpisode {
        int64_t id = 0;
        int64_t partner_id = -1;
        int img_h = 0, img_w = 0;
        std::vector<StoredStep> steps;
    };

    void fill_row(const StoredEpisode& ep, int start, int l, int row,
                  SequenceBatch& batch, bool partner) const;
    const StoredEpisode* find(int64_t id) const;

    mutable std::mutex mutex_;
    std::deque<StoredEpisode> episodes_;
    int64_t next_id_ = 0;
    int64_t steps_ = 0;
    int64_t capacity_;
    float depth_max_;
};

// Episode dump: the checkpoint container with arrays rgb[T,H,W,3],
// depth[T,H,W], action[T,2], reward[T].
void write_episode_dump(const std::string& path, const EpisodeRecord& episode);
EpisodeRecord read_episode_dump(const std::string& path);

}  // namespace wmc
