#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ntssl/tensor.hpp"

namespace ntssl {

inline constexpr std::string_view kDatasetSchema = "ntssl-tracklets/1";

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
  double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
};

struct Detection {
  std::string video_id;
  std::int64_t frame_index = 0;
  BoundingBox box;
  std::vector<double> features;
  std::optional<std::string> polyp_id;  // ground truth, evaluation only
};

/// Binary evaluation attributes, keyed "size_class" / "histology_class".
using AttributeMap = std::map<std::string, int>;

struct Tracklet {
  std::string tracklet_id;
  std::string video_id;
  std::int64_t position = 0;  // frame index of the first retained frame
  Tensor frames;              // L x d_in
  std::optional<std::string> polyp_id;
  AttributeMap attrs;

  friend bool operator==(const Tracklet&, const Tracklet&) = default;
};

/// Immutable collection of equally shaped tracklets.
///
/// Training code reads through features()/video_id()/position()/id() only.
/// Ground-truth identity and attributes sit behind labels(), which exists for
/// evaluation and diagnostics.
class TrackletDataset {
 public:
  struct Labels {
    const std::optional<std::string>& polyp_id;
    const AttributeMap& attrs;
  };

  TrackletDataset() = default;
  /// Validates shapes, id uniqueness and positions; throws UsageError.
  TrackletDataset(std::vector<Tracklet> tracklets, std::size_t L, std::size_t d_in);

  std::size_t size() const noexcept { return tracklets_.size(); }
  bool empty() const noexcept { return tracklets_.empty(); }
  std::size_t L() const noexcept { return L_; }
  std::size_t d_in() const noexcept { return d_in_; }

  const std::string& id(std::size_t i) const { return tracklets_[i].tracklet_id; }
  const std::string& video_id(std::size_t i) const { return tracklets_[i].video_id; }
  std::int64_t position(std::size_t i) const { return tracklets_[i].position; }
  const Tensor& features(std::size_t i) const { return tracklets_[i].frames; }
  std::optional<std::size_t> index_of(const std::string& tracklet_id) const;

  Labels labels(std::size_t i) const { return {tracklets_[i].polyp_id, tracklets_[i].attrs}; }
  /// Full records, for serialization and tooling.
  std::span<const Tracklet> records() const noexcept { return tracklets_; }

  friend bool operator==(const TrackletDataset& a, const TrackletDataset& b) {
    return a.L_ == b.L_ && a.d_in_ == b.d_in_ && a.tracklets_ == b.tracklets_;
  }

 private:
  std::vector<Tracklet> tracklets_;
  std::size_t L_ = 0;
  std::size_t d_in_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads the JSON Lines dataset format (header line, then one tracklet per line).
TrackletDataset load_dataset(const std::filesystem::path& path);
/// Writes a dataset so that load_dataset reproduces it bit for bit.
void save_dataset(const TrackletDataset& dataset, const std::filesystem::path& path);

}  // namespace ntssl
