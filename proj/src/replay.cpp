#include "wmc/replay.hpp"

#include <algorithm>
#include <cmath>

#include "wmc/checkpoint.hpp"

namespace wmc {

namespace {

uint8_t quant_u8(float v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

uint16_t quant_u16(float v, float vmax) {
    const float t = std::clamp(v / vmax, 0.0f, 1.0f);
    return static_cast<uint16_t>(std::lround(t * 65535.0f));
}

}  // namespace

int64_t ReplayBuffer::add_episode(const EpisodeRecord& episode, int64_t partner_id) {
    check(!episode.steps.empty(), "replay: empty episode");
    check(episode.steps.back().done, "replay: episode not terminated");
    check(static_cast<int64_t>(episode.steps.size()) <= capacity_,
          "replay: episode longer than buffer capacity");
    std::lock_guard<std::mutex> lock(mutex_);
    StoredEpisode ep;
    ep.id = next_id_++;
    ep.partner_id = partner_id;
    ep.img_h = episode.steps[0].obs.rgb.shape[0];
    ep.img_w = episode.steps[0].obs.rgb.shape[1];
    ep.steps.reserve(episode.steps.size());
    for (const auto& s : episode.steps) {
        StoredStep st;
        st.rgb.resize(static_cast<size_t>(s.obs.rgb.size()));
        for (int64_t i = 0; i < s.obs.rgb.size(); ++i) {
            st.rgb[static_cast<size_t>(i)] = quant_u8(s.obs.rgb[i]);
        }
        st.depth.resize(static_cast<size_t>(s.obs.depth.size()));
        for (int64_t i = 0; i < s.obs.depth.size(); ++i) {
            st.depth[static_cast<size_t>(i)] = quant_u16(s.obs.depth[i], depth_max_);
        }
        st.task = s.obs.task_vec;
        st.action = s.action;
        st.reward = s.reward;
        st.done = s.done;
        ep.steps.push_back(std::move(st));
    }
    steps_ += static_cast<int64_t>(ep.steps.size());
    episodes_.push_back(std::move(ep));
    while (steps_ > capacity_) {
        const StoredEpisode& oldest = episodes_.front();
        steps_ -= static_cast<int64_t>(oldest.steps.size());
        const int64_t gone = oldest.id;
        episodes_.pop_front();
        for (auto& e : episodes_) {
            if (e.partner_id == gone) {
                e.partner_id = -1;
            }
        }
    }
    return episodes_.back().id;
}

int64_t ReplayBuffer::total_steps() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return steps_;
}

size_t ReplayBuffer::num_episodes() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return episodes_.size();
}

std::vector<int64_t> ReplayBuffer::episode_ids() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<int64_t> ids;
    for (const auto& e : episodes_) {
        ids.push_back(e.id);
    }
    return ids;
}

int ReplayBuffer::episode_length(int64_t id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const StoredEpisode* ep = find(id);
    check(ep != nullptr, "replay: unknown episode id");
    return static_cast<int>(ep->steps.size());
}

const ReplayBuffer::StoredEpisode* ReplayBuffer::find(int64_t id) const {
    for (const auto& e : episodes_) {
        if (e.id == id) {
            return &e;
        }
    }
    return nullptr;
}

bool ReplayBuffer::can_sample(int length) const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& e : episodes_) {
        if (static_cast<int>(e.steps.size()) >= length) {
            return true;
        }
    }
    return false;
}

void ReplayBuffer::fill_row(const StoredEpisode& ep, int start, int l, int row,
                            SequenceBatch& batch, bool partner) const {
    const int h = batch.h, w = batch.w;
    const int64_t img = static_cast<int64_t>(h) * w;
    for (int t = 0; t < l; ++t) {
        const StoredStep& s = ep.steps[static_cast<size_t>(start + t)];
        const int64_t base = (static_cast<int64_t>(row) * l + t);
        float* rgb_dst =
            (partner ? batch.partner_rgb.data() : batch.rgb.data()) + base * img * 3;
        for (int64_t i = 0; i < img * 3; ++i) {
            rgb_dst[i] = static_cast<float>(s.rgb[static_cast<size_t>(i)]) / 255.0f;
        }
        if (partner) {
            continue;  // partner contributes rgb only; content channels are shared
        }
        float* d_dst = batch.depth.data() + base * img;
        for (int64_t i = 0; i < img; ++i) {
            d_dst[i] = static_cast<float>(s.depth[static_cast<size_t>(i)]) / 65535.0f *
                       depth_max_;
        }
        float* task_dst = batch.task.data() + base * 6;
        for (int i = 0; i < 6; ++i) {
            task_dst[i] = s.task[static_cast<size_t>(i)];
        }
        batch.action.data()[base * 2] = s.action.rotation;
        batch.action.data()[base * 2 + 1] = s.action.forward;
        batch.reward.data()[base] = s.reward;
        batch.done.data()[base] = s.done ? 1.0f : 0.0f;
    }
}

SequenceBatch ReplayBuffer::sample_sequences(int b, int l, RngStream& rng) const {
    std::lock_guard<std::mutex> lock(mutex_);
    check(b > 0 && l > 0, "replay: batch and length must be positive");
    // uniform over all valid (episode, start) windows
    std::vector<std::pair<const StoredEpisode*, int>> index;
    int64_t total_windows = 0;
    for (const auto& e : episodes_) {
        const int windows = static_cast<int>(e.steps.size()) - l + 1;
        if (windows > 0) {
            index.emplace_back(&e, windows);
            total_windows += windows;
        }
    }
    check(total_windows > 0,
          "replay: no episode long enough to sample length " + std::to_string(l));
    SequenceBatch batch;
    batch.b = b;
    batch.l = l;
    batch.h = index[0].first->img_h;
    batch.w = index[0].first->img_w;
    const int h = batch.h, w = batch.w;
    batch.rgb = Tensor32({b, l, h, w, 3});
    batch.depth = Tensor32({b, l, h, w});
    batch.task = Tensor32({b, l, 6});
    batch.action = Tensor32({b, l, 2});
    batch.reward = Tensor32({b, l});
    batch.done = Tensor32({b, l});
    batch.partner_rgb = Tensor32({b, l, h, w, 3});
    batch.partner_present.assign(static_cast<size_t>(b), 0);

    for (int row = 0; row < b; ++row) {
        int64_t pick = rng.uniform_int64(total_windows);
        const StoredEpisode* ep = nullptr;
        int start = 0;
        for (const auto& [e, windows] : index) {
            if (pick < windows) {
                ep = e;
                start = static_cast<int>(pick);
                break;
            }
            pick -= windows;
        }
        check(ep != nullptr, "replay: window selection out of range");
        fill_row(*ep, start, l, row, batch, false);
        if (ep->partner_id >= 0) {
            const StoredEpisode* partner = find(ep->partner_id);
            if (partner != nullptr && partner->steps.size() == ep->steps.size()) {
                fill_row(*partner, start, l, row, batch, true);
                batch.partner_present[static_cast<size_t>(row)] = 1;
            }
        }
    }
    return batch;
}

std::vector<int> ReplayBuffer::mine_negatives(int episode_len, int stride) {
    check(episode_len > 0, "mine_negatives: empty episode");
    check(stride >= 1, "mine_negatives: stride must be >= 1");
    std::vector<int> idx;
    for (int i = 0; i < episode_len; i += stride) {
        idx.push_back(i);
    }
    return idx;
}

void write_episode_dump(const std::string& path, const EpisodeRecord& episode) {
    check(!episode.steps.empty(), "episode dump: empty episode");
    const int t = episode.length();
    const int h = episode.steps[0].obs.rgb.shape[0];
    const int w = episode.steps[0].obs.rgb.shape[1];
    Tensor32 rgb({t, h, w, 3});
    Tensor32 depth({t, h, w});
    Tensor32 action({t, 2});
    Tensor32 reward({t});
    for (int i = 0; i < t; ++i) {
        const auto& s = episode.steps[static_cast<size_t>(i)];
        std::copy(s.obs.rgb.v.begin(), s.obs.rgb.v.end(),
                  rgb.v.begin() + static_cast<int64_t>(i) * h * w * 3);
        std::copy(s.obs.depth.v.begin(), s.obs.depth.v.end(),
                  depth.v.begin() + static_cast<int64_t>(i) * h * w);
        action[i * 2] = s.action.rotation;
        action[i * 2 + 1] = s.action.forward;
        reward[i] = s.reward;
    }
    Checkpoint ck;
    ck.config_text = "episode scene_seed=" + std::to_string(episode.scene_seed) +
                     " texture_seed=" + std::to_string(episode.texture_seed) +
                     " split=" + split_name(episode.split) + "\n";
    ck.add_tensor("rgb", rgb);
    ck.add_tensor("depth", depth);
    ck.add_tensor("action", action);
    ck.add_tensor("reward", reward);
    ck.add_scalar_i64("success", episode.success ? 1 : 0);
    ck.save(path);
}

EpisodeRecord read_episode_dump(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    const auto rgb = ck.get_tensor<float>("rgb");
    const auto depth = ck.get_tensor<float>("depth");
    const auto action = ck.get_tensor<float>("action");
    const auto reward = ck.get_tensor<float>("reward");
    const int t = rgb.shape[0], h = rgb.shape[1], w = rgb.shape[2];
    EpisodeRecord ep;
    ep.success = ck.get_scalar_i64("success") != 0;
    for (int i = 0; i < t; ++i) {
        EpisodeStep s;
        s.obs.rgb = Tensor32({h, w, 3});
        std::copy(rgb.v.begin() + static_cast<int64_t>(i) * h * w * 3,
                  rgb.v.begin() + static_cast<int64_t>(i + 1) * h * w * 3,
                  s.obs.rgb.v.begin());
        s.obs.depth = Tensor32({h, w});
        std::copy(depth.v.begin() + static_cast<int64_t>(i) * h * w,
                  depth.v.begin() + static_cast<int64_t>(i + 1) * h * w,
                  s.obs.depth.v.begin());
        s.action.rotation = action[i * 2];
        s.action.forward = action[i * 2 + 1];
        s.reward = reward[i];
        s.done = i == t - 1;
        ep.steps.push_back(std::move(s));
    }
    return ep;
}

}  // namespace wmc
