#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcast/errors.hpp"
#include "mcast/types.hpp"

namespace mcast {

/// One encoding of a video: average rate and an abstract perceptual score.
struct Tier {
  double bitrate_bps = 0;
  double quality = 0; // in [0, 1]
};

/// Ordered encoding ladder. Bitrate and quality are strictly increasing
/// with tier index; construct through validate_ladder.
struct BitrateLadder {
  std::vector<Tier> tiers;

  int size() const { return static_cast<int>(tiers.size()); }
  int top() const { return size() - 1; }

  const Tier& tier(int i) const {
    if (i < 0 || i >= size())
      throw StateError("tier index " + std::to_string(i) + " out of range [0, " +
                       std::to_string(size()) + ")");
    return tiers[static_cast<std::size_t>(i)];
  }
};

inline BitrateLadder validate_ladder(std::vector<Tier> tiers) {
  if (tiers.empty()) throw ConfigError("bitrate ladder is empty");
  for (std::size_t i = 0; i < tiers.size(); ++i) {
    const Tier& t = tiers[i];
    if (!(t.bitrate_bps > 0))
      throw ConfigError("tier " + std::to_string(i) + ": bitrate must be > 0");
    if (!(t.quality > 0) || t.quality > 1.0)
      throw ConfigError("tier " + std::to_string(i) + ": quality must be in (0, 1]");
    if (i > 0) {
      if (!(t.bitrate_bps > tiers[i - 1].bitrate_bps))
        throw ConfigError("tier " + std::to_string(i) + ": bitrate must strictly increase");
      if (!(t.quality > tiers[i - 1].quality))
        throw ConfigError("tier " + std::to_string(i) + ": quality must strictly increase");
    }
  }
  return BitrateLadder{std::move(tiers)};
}

struct VideoAsset {
  AssetId id;
  double duration_s = 0;
  double segment_s = 0;
  BitrateLadder ladder;

  int segment_count() const {
    return static_cast<int>(std::ceil(duration_s / segment_s));
  }
};

/// Size in bits of one segment at the given tier. The final segment is
/// prorated when the duration is not a whole number of segments.
inline double segment_bits(const VideoAsset& asset, int tier, int segment_index) {
  const Tier& t = asset.ladder.tier(tier);
  const int count = asset.segment_count();
  if (segment_index < 0 || segment_index >= count)
    throw StateError("segment index " + std::to_string(segment_index) +
                     " out of range [0, " + std::to_string(count) + ")");
  double seg_s = asset.segment_s;
  if (segment_index == count - 1) {
    const double remainder = asset.duration_s - asset.segment_s * (count - 1);
    if (remainder > 0) seg_s = remainder;
  }
  return t.bitrate_bps * seg_s;
}

} // namespace mcast
