#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "icl/reward.hpp"

namespace icl {

inline constexpr const char* kCheckpointVersion = "icl-checkpoint/1";

struct Checkpoint {
    std::string version = kCheckpointVersion;
    std::string stage = "init";  // init | reward | ppo
    RetrievalHead head;
    std::optional<RewardHeadModel> reward_head;
    std::string config_text;
    std::uint64_t task_fingerprint = 0;
    std::uint64_t task_seed = 0;
    std::uint64_t train_seed = 0;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// JSON with shortest round-trip doubles: load(save(c)) == c bit for bit.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

}  // namespace icl
